"""Command-line entry point: ``foglane <subcommand> ...``.

Exit codes: 0 full success, 1 failure (including per-file failures recorded
in the report), 2 usage error. Reports are JSON lines, one record per item.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import annotations as ann
from . import dataset, depth, edges, fog, metrics
from .errors import FoglaneError
from .imaging import list_images, read_image, write_mask

log = logging.getLogger("foglane")

# provenance tags used in --help
BENCH = "[published setting]"
TOOL = "[toolkit default]"


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _odd_int(text):
    v = _pos_int(text)
    if v % 2 == 0:
        raise argparse.ArgumentTypeError(f"must be odd, got {text}")
    return v


def _unit_float(text):
    v = _nonneg_float(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _fraction(text):
    v = _unit_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("size must be at least 1x1")
    return w, h


def _ratio(text):
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TRAIN:TEST, got {text!r}") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError("ratio parts must be >= 1")
    return a, b


def _thresholds(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from None
    if not vals or any(not 0 < v <= 1 for v in vals):
        raise argparse.ArgumentTypeError("thresholds must lie in (0, 1]")
    return vals


def _grid(text):
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP:STEP, got {text!r}") from None
    if step <= 0 or not 0 < start <= stop <= 1:
        raise argparse.ArgumentTypeError("grid must satisfy 0 < start <= stop <= 1, step > 0")
    return metrics.threshold_grid(start, stop, step)


def _rows(text):
    """``160:710:10`` (inclusive range) or ``160,170,180``."""
    try:
        if ":" in text:
            start, stop, step = (int(v) for v in text.split(":"))
            if step < 1:
                raise ValueError
            rows = list(range(start, stop + 1, step))
        else:
            rows = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad row list {text!r}") from None
    if not rows or any(b <= a for a, b in zip(rows, rows[1:])):
        raise argparse.ArgumentTypeError("rows must be non-empty and strictly ascending")
    return rows


def _jobs_arg(p):
    p.add_argument("--jobs", "-j", type=_pos_int, default=os.cpu_count() or 1,
                   help=f"worker count; outputs are identical for any value {TOOL}: hardware threads")


def build_parser():
    parser = argparse.ArgumentParser(prog="foglane", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("fog", help="synthesize fog over a directory of clear images")
    p.add_argument("--input", required=True, type=Path, help="directory of clear images")
    p.add_argument("--out", required=True, type=Path, help="output directory (same relative names)")
    p.add_argument("--beta", required=True, type=_nonneg_float,
                   help="extinction coefficient per unit normalized depth; light/medium/heavy "
                        "tiers use 2, 4, 8 " + BENCH)
    p.add_argument("--atmospheric-light", type=_unit_float, default=None,
                   help="fixed airlight in [0,1] instead of the dark-channel estimate")
    p.add_argument("--window", type=_odd_int, default=15,
                   help=f"dark-channel window side (odd) {TOOL}: 15")
    p.add_argument("--percentile", type=_fraction, default=0.001,
                   help=f"fraction of brightest dark-channel pixels used for airlight {BENCH}: 0.001")
    p.add_argument("--depth", type=Path, default=None,
                   help="directory of depth maps <stem>.png (16-bit) or <stem>.pfm")
    p.add_argument("--synthetic-depth", action="store_true",
                   help="use the ground-plane depth model where no depth file exists")
    _ground_plane_args(p)
    p.add_argument("--report", type=Path, default=None, help="report path (default <out>/report.jsonl)")
    _jobs_arg(p)

    p = sub.add_parser("depth-synth", help="write ground-plane depth maps as 16-bit PNG")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="image directory; one depth map per image")
    src.add_argument("--size", type=_size, help="single map of WIDTHxHEIGHT")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--name", default="depth", help="file stem when --size is used")
    _ground_plane_args(p)

    p = sub.add_parser("convert", help="convert lane annotations between CULane and Tusimple")
    p.add_argument("--from", dest="src_format", required=True, choices=("culane", "tusimple"))
    p.add_argument("--to", dest="dst_format", required=True, choices=("culane", "tusimple"))
    p.add_argument("--input", required=True, type=Path,
                   help="CULane sidecar root, or Tusimple JSON-lines file")
    p.add_argument("--out", required=True, type=Path,
                   help="Tusimple JSON-lines file, or CULane sidecar root")
    p.add_argument("--rows", type=_rows, default=None,
                   help="h_samples for Tusimple output, e.g. 160:710:10 (inclusive)")
    p.add_argument("--image-ext", default=".jpg", help=f"image suffix for raw_file {TOOL}: .jpg")

    p = sub.add_parser("edges", help="build edge-supervision labels (Canny OR lane strokes)")
    p.add_argument("--input", required=True, type=Path, help="image directory")
    p.add_argument("--labels", required=True, type=Path, help="CULane sidecar root mirroring --input")
    p.add_argument("--out", required=True, type=Path, help="label PNG directory (0/255)")
    p.add_argument("--low", type=_nonneg_float, default=50.0, help=f"hysteresis low threshold {TOOL}: 50")
    p.add_argument("--high", type=_nonneg_float, default=150.0, help=f"hysteresis high threshold {TOOL}: 150")
    p.add_argument("--sigma", type=_nonneg_float, default=1.4, help=f"Gaussian sigma {TOOL}: 1.4")
    p.add_argument("--stroke", type=_pos_int, default=3, help=f"lane stroke width px {TOOL}: 3")
    p.add_argument("--downsample", type=_pos_int, default=1, help=f"max-pool factor {TOOL}: 1")
    p.add_argument("--report", type=Path, default=None, help="report path (default <out>/report.jsonl)")
    _jobs_arg(p)

    p = sub.add_parser("eval", help="benchmark metrics")
    esub = p.add_subparsers(dest="benchmark", metavar="BENCHMARK")
    esub.required = True
    e = esub.add_parser("culane", help="IoU-matched F1 over 30 px lane strokes")
    e.add_argument("--pred", required=True, type=Path, help="prediction sidecar root")
    e.add_argument("--gt", required=True, type=Path, help="ground-truth sidecar root")
    e.add_argument("--list", required=True, type=Path, help="list file: image path [scene]")
    e.add_argument("--width", type=_pos_int, default=metrics.LANE_WIDTH,
                   help=f"lane stroke width {BENCH}: 30")
    e.add_argument("--thresholds", type=_thresholds, default=metrics.REPORT_THRESHOLDS,
                   help=f"IoU thresholds to report {BENCH}: 0.5,0.65,0.75,0.85")
    e.add_argument("--mf1-grid", type=_grid, default=metrics.MF1_GRID,
                   help=f"mF1 threshold grid START:STOP:STEP {TOOL}: 0.5:0.95:0.05")
    e.add_argument("--size", type=_size, default=ann.CULANE_SIZE,
                   help=f"image size used for rasterizing {BENCH}: 1640x590")
    e.add_argument("--report", type=Path, default=Path("eval_culane.jsonl"), help="report path")
    _jobs_arg(e)
    e = esub.add_parser("tusimple", help="point accuracy with lateral tolerance")
    e.add_argument("--pred", required=True, type=Path, help="prediction JSON-lines file")
    e.add_argument("--gt", required=True, type=Path, help="ground-truth JSON-lines file")
    e.add_argument("--tol", type=_nonneg_float, default=metrics.TUSIMPLE_PIXEL_TOL,
                   help=f"point tolerance in px {BENCH}: 20")
    e.add_argument("--ratio", type=_unit_float, default=metrics.TUSIMPLE_MATCH_RATIO,
                   help=f"matched-point ratio for a true-positive lane {BENCH}: 0.85")
    e.add_argument("--report", type=Path, default=Path("eval_tusimple.jsonl"), help="report path")

    p = sub.add_parser("sample", help="keep every N-th frame of an extracted sequence")
    p.add_argument("--input", required=True, type=Path, help="frame directory")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--interval", required=True, type=_pos_int,
                   help="frame interval; no default (20 was used for downloaded footage)")

    p = sub.add_parser("resize", help="resize images (and sidecars) to a uniform size")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--to", type=_size, default=dataset.TARGET_SIZE, help=f"target size {BENCH}: 1640x590")
    p.add_argument("--with-annotations", action="store_true", help="rescale CULane sidecars too")
    p.add_argument("--report", type=Path, default=None, help="report path (default <out>/report.jsonl)")
    _jobs_arg(p)

    p = sub.add_parser("split", help="scene-balanced train/test split")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", type=Path, help="manifest file: path<TAB>scene")
    src.add_argument("--root", type=Path, help="build the manifest from this image tree")
    p.add_argument("--scene-map", type=Path, default=None, help="path<TAB>scene overrides for --root")
    p.add_argument("--out", required=True, type=Path, help="directory for train.txt / test.txt")
    p.add_argument("--ratio", type=_ratio, default=(2, 1), help=f"train:test {BENCH}: 2:1")
    p.add_argument("--seed", type=int, default=0, help=f"shuffle seed {TOOL}: 0")
    return parser


def _ground_plane_args(p):
    p.add_argument("--horizon", type=_nonneg_float, default=None,
                   help="horizon row in px for the ground-plane model")
    p.add_argument("--horizon-frac", type=_unit_float, default=0.4,
                   help=f"horizon as a fraction of image height when --horizon is absent {TOOL}: 0.4")
    p.add_argument("--depth-scale", type=_nonneg_float, default=100.0,
                   help=f"ground-plane scale k in d = k/(row-horizon) {TOOL}: 100")
    p.add_argument("--d-min", type=_nonneg_float, default=0.1, help=f"near depth clamp {TOOL}: 0.1")
    p.add_argument("--d-max", type=_nonneg_float, default=10.0, help=f"far depth clamp {TOOL}: 10")


def _validate(parser, args):
    def need_dir(path, flag):
        if path is not None and not path.is_dir():
            parser.error(f"{flag}: not a directory: {path}")

    def need_file(path, flag):
        if path is not None and not path.is_file():
            parser.error(f"{flag}: not a file: {path}")

    cmd = args.command
    if cmd in ("fog", "depth-synth"):
        if not 0 < args.d_min < args.d_max:
            parser.error("need 0 < --d-min < --d-max")
        if args.depth_scale <= 0:
            parser.error("--depth-scale must be positive")
    if cmd == "fog":
        need_dir(args.input, "--input")
        need_dir(args.depth, "--depth")
        if args.depth is None and not args.synthetic_depth:
            parser.error("fog needs --depth and/or --synthetic-depth")
    elif cmd == "depth-synth":
        need_dir(args.input, "--input")
    elif cmd == "convert":
        if args.src_format == args.dst_format:
            parser.error("--from and --to must differ")
        if args.src_format == "culane":
            need_dir(args.input, "--input")
        else:
            need_file(args.input, "--input")
        if args.dst_format == "tusimple" and args.rows is None:
            parser.error("Tusimple output needs --rows")
    elif cmd == "edges":
        need_dir(args.input, "--input")
        need_dir(args.labels, "--labels")
        if args.sigma <= 0:
            parser.error("--sigma must be positive")
        if not args.low < args.high:
            parser.error("need --low < --high")
    elif cmd == "eval":
        if args.benchmark == "culane":
            need_dir(args.pred, "--pred")
            need_dir(args.gt, "--gt")
            need_file(args.list, "--list")
        else:
            need_file(args.pred, "--pred")
            need_file(args.gt, "--gt")
    elif cmd in ("sample", "resize"):
        need_dir(args.input, "--input")
    elif cmd == "split":
        need_file(args.manifest, "--manifest")
        need_dir(args.root, "--root")
        need_file(args.scene_map, "--scene-map")
        if args.scene_map is not None and args.root is None:
            parser.error("--scene-map only applies with --root")


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    return args


def _write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _depth_source(args, depth_dir=None, synthetic=True):
    return depth.DepthSource(depth_dir=depth_dir, synthetic=synthetic, horizon_row=args.horizon,
                             horizon_frac=args.horizon_frac, scale=args.depth_scale,
                             d_min=args.d_min, d_max=args.d_max)


def cmd_fog(args):
    params = fog.FogParams(args.beta, args.atmospheric_light, args.window, args.percentile)
    source = _depth_source(args, args.depth, args.synthetic_depth)
    summary = fog.fog_batch(args.input, args.out, params, source, jobs=args.jobs)
    summary.write_report(args.report or args.out / "report.jsonl")
    print(f"fogged {summary.count} image(s), {len(summary.failures)} failure(s)")
    return 1 if summary.failures else 0


def cmd_depth_synth(args):
    source = _depth_source(args)
    if args.size is not None:
        w, h = args.size
        jobs = [(Path(args.name), h, w)]
    else:
        jobs = []
        for rel in list_images(args.input):
            try:
                img = read_image(args.input / rel)
            except FoglaneError as exc:
                log.warning("%s: %s", rel.as_posix(), exc)
                jobs.append((rel, None, None))
                continue
            jobs.append((rel, img.shape[0], img.shape[1]))
    records, failed = [], 0
    for rel, h, w in jobs:
        name = rel.as_posix()
        if h is None:
            records.append({"path": name, "status": "failed", "error": "cannot decode image"})
            failed += 1
            continue
        try:
            d = depth.synth_ground_plane_depth(w, h, source.model_for(h))
            depth.save_depth_png(args.out / rel.parent / (rel.stem + ".png"), d)
            records.append({"path": name, "status": "ok"})
        except FoglaneError as exc:
            records.append({"path": name, "status": "failed", "error": str(exc)})
            failed += 1
    _write_jsonl(args.out / "report.jsonl", records)
    print(f"wrote {len(records) - failed} depth map(s), {failed} failure(s)")
    return 1 if failed else 0


def cmd_convert(args):
    if args.src_format == "culane":
        lines = []
        for sidecar in sorted(args.input.rglob("*.lines.txt"), key=lambda p: p.as_posix()):
            rel = sidecar.relative_to(args.input).as_posix()
            lanes = ann.parse_culane(sidecar.read_text(encoding="utf-8"))
            raw_file = rel[: -len(".lines.txt")] + args.image_ext
            lines.append(ann.convert(lanes, "tusimple", rows=args.rows, raw_file=raw_file))
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        print(f"converted {len(lines)} sidecar(s)")
        return 0
    records = ann.read_tusimple(args.input)
    for record, lanes in records:
        dst = args.out / ann.culane_sidecar(record.raw_file.lstrip("/"))
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_text(ann.convert(lanes, "culane"), encoding="utf-8")
    print(f"converted {len(records)} record(s)")
    return 0


def _edges_one(args, params, rel):
    name = rel.as_posix()
    try:
        img = read_image(args.input / rel)
        h, w = img.shape[:2]
        sidecar = args.labels / ann.culane_sidecar(name)
        if sidecar.is_file():
            lanes = ann.parse_culane(sidecar.read_text(encoding="utf-8"), w, h)
        else:
            log.warning("%s: no lane label, using Canny edges only", name)
            lanes = ann.LaneSet(w, h, [])
        label = edges.edge_label(img, lanes, params, args.stroke, args.downsample)
        write_mask(args.out / rel.parent / (rel.stem + ".png"), label)
    except (FoglaneError, OSError, ValueError) as exc:
        return {"path": name, "status": "failed", "error": str(exc)}
    return {"path": name, "status": "ok", "edge_pixels": int(np.count_nonzero(label)),
            "lanes": len(lanes)}


def cmd_edges(args):
    from concurrent.futures import ThreadPoolExecutor
    params = edges.CannyParams(args.sigma, args.low, args.high)
    paths = list_images(args.input)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        records = list(pool.map(lambda rel: _edges_one(args, params, rel), paths))
    _write_jsonl(args.report or args.out / "report.jsonl", records)
    failed = sum(r["status"] != "ok" for r in records)
    print(f"labelled {len(records) - failed} image(s), {failed} failure(s)")
    return 1 if failed else 0


def cmd_eval(args):
    if args.benchmark == "culane":
        report = metrics.culane_f1(args.pred, args.gt, args.list, args.thresholds, args.width,
                                   args.size, args.mf1_grid, jobs=args.jobs)
        print(report.table())
        args.report.parent.mkdir(parents=True, exist_ok=True)
        args.report.write_text(report.to_jsonl(), encoding="utf-8")
        return 0
    report = metrics.tusimple_eval(metrics.read_tusimple_records(args.pred),
                                   metrics.read_tusimple_records(args.gt), args.tol, args.ratio)
    print(f"Accuracy {report.accuracy:.4f}  FP {report.fp_rate:.4f}  "
          f"FN {report.fn_rate:.4f}  F1 {report.f1:.4f}")
    _write_jsonl(args.report, [report.as_dict()])
    return 0


def cmd_sample(args):
    chosen = dataset.sample_directory(args.input, args.out, args.interval)
    print(f"kept {len(chosen)} frame(s)")
    return 0


def cmd_resize(args):
    records = dataset.resize_dataset(args.input, args.out, args.to[0], args.to[1],
                                     args.with_annotations, jobs=args.jobs)
    _write_jsonl(args.report or args.out / "report.jsonl", [r.as_dict() for r in records])
    failed = sum(r.status != "ok" for r in records)
    print(f"resized {len(records) - failed} image(s), {failed} failure(s)")
    return 1 if failed else 0


def cmd_split(args):
    if args.manifest is not None:
        manifest = dataset.Manifest.read(args.manifest)
    else:
        manifest = dataset.build_manifest(args.root, args.scene_map)
    train, test = dataset.split_dataset(manifest, args.ratio[0], args.ratio[1], args.seed)
    train.write(args.out / "train.txt")
    test.write(args.out / "test.txt")
    print(f"train {len(train)}  test {len(test)}")
    return 0


COMMANDS = {
    "fog": cmd_fog,
    "depth-synth": cmd_depth_synth,
    "convert": cmd_convert,
    "edges": cmd_edges,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "resize": cmd_resize,
    "split": cmd_split,
}


def run(args):
    try:
        return COMMANDS[args.command](args)
    except (FoglaneError, OSError) as exc:
        print(f"foglane {args.command}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
