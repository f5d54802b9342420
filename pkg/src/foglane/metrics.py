"""Lane benchmark metrics.

CULane-style: every lane is drawn as a 30 px wide stroke, predicted and
ground-truth strokes are matched one-to-one by IoU, and a match at IoU >= tau
is a true positive. Precision, recall and F1 follow from the dataset-wide
TP/FP/FN counts; mF1 averages F1 over tau = 0.50, 0.55, ..., 0.95.

Tusimple-style: lanes are x-positions at fixed rows. A predicted point is
correct within 20 px of the ground truth at the same row; accuracy is the
ratio of correct points to ground-truth points, and a predicted lane counts
as a hit when more than 85% of its ground-truth lane's points are correct.
"""
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assignment
from .annotations import (CULANE_SIZE, LaneSet, culane_sidecar, parse_culane, read_tusimple,
                          record_to_laneset, resample_at_rows)
from .errors import EvaluationError, ParseError, ShapeError
from .raster import stroke_crop, stroke_polyline

log = logging.getLogger(__name__)

LANE_WIDTH = 30
REPORT_THRESHOLDS = (0.5, 0.65, 0.75, 0.85)
TUSIMPLE_PIXEL_TOL = 20
TUSIMPLE_MATCH_RATIO = 0.85


def threshold_grid(start=0.5, stop=0.95, step=0.05):
    n = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


MF1_GRID = threshold_grid()


def safe_div(num, den):
    return num / den if den else 0.0


def f1_score(precision, recall):
    return safe_div(2 * precision * recall, precision + recall)


def rasterize_lane(lane, width, height, line_width=LANE_WIDTH):
    points = lane.points if hasattr(lane, "points") else lane
    return stroke_polyline(points, width, height, line_width)


def iou(a, b):
    a, b = np.asarray(a, dtype=bool), np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    return safe_div(np.count_nonzero(a & b), union)


def _crop_iou(a, b):
    if a is None or b is None:
        return 0.0
    ar, ac, am = a
    br, bc, bm = b
    r0, r1 = max(ar, br), min(ar + am.shape[0], br + bm.shape[0])
    c0, c1 = max(ac, bc), min(ac + am.shape[1], bc + bm.shape[1])
    inter = 0
    if r0 < r1 and c0 < c1:
        inter = np.count_nonzero(am[r0 - ar:r1 - ar, c0 - ac:c1 - ac]
                                 & bm[r0 - br:r1 - br, c0 - bc:c1 - bc])
    union = np.count_nonzero(am) + np.count_nonzero(bm) - inter
    return safe_div(inter, union)


def iou_matrix(pred, gt, width, height, line_width=LANE_WIDTH):
    """Pairwise stroke IoU, shape (len(pred), len(gt))."""
    pc = [stroke_crop(l.points, width, height, line_width) for l in pred.lanes]
    gc = [stroke_crop(l.points, width, height, line_width) for l in gt.lanes]
    out = np.zeros((len(pc), len(gc)))
    for i, p in enumerate(pc):
        for j, g in enumerate(gc):
            out[i, j] = _crop_iou(p, g)
    return out


@dataclass
class MatchResult:
    pairs: list
    tp: int
    fp: int
    fn: int


def match_ious(ious, tau):
    """Optimal one-to-one matching of an IoU matrix at threshold ``tau``."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.ndim != 2:
        raise ShapeError(f"IoU matrix must be 2-D, got shape {ious.shape}")
    n_pred, n_gt = ious.shape
    pairs = assignment.solve(ious, ious >= tau)
    tp = len(pairs)
    return MatchResult([(p, g, float(ious[p, g])) for p, g in pairs], tp, n_pred - tp, n_gt - tp)


def match_lanes(pred, gt, tau=0.5, width=None, height=None, line_width=LANE_WIDTH):
    width = width or gt.image_width
    height = height or gt.image_height
    return match_ious(iou_matrix(pred, gt, width, height, line_width), tau)


@dataclass
class ThresholdScore:
    tau: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self):
        return safe_div(self.tp, self.tp + self.fp)

    @property
    def recall(self):
        return safe_div(self.tp, self.tp + self.fn)

    @property
    def f1(self):
        return f1_score(self.precision, self.recall)

    def as_dict(self):
        return {"tau": self.tau, "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class CULaneReport:
    thresholds: list
    mf1: float
    mf1_grid: tuple = MF1_GRID
    by_scene: dict = field(default_factory=dict)
    images: int = 0

    def score(self, tau):
        for rec in self.thresholds:
            if abs(rec.tau - tau) < 1e-9:
                return rec
        raise KeyError(tau)

    def to_jsonl(self):
        lines = [json.dumps({"kind": "summary", "images": self.images, "mf1": self.mf1,
                             "mf1_grid": list(self.mf1_grid)})]
        lines += [json.dumps({"kind": "threshold", **r.as_dict()}) for r in self.thresholds]
        for scene in sorted(self.by_scene):
            lines += [json.dumps({"kind": "scene", "scene": scene, **r.as_dict()})
                      for r in self.by_scene[scene]]
        return "".join(l + "\n" for l in lines)

    def table(self):
        head = f"{'tau':>6} {'TP':>7} {'FP':>7} {'FN':>7} {'Prec':>8} {'Rec':>8} {'F1':>8}"
        rows = [head]
        for r in self.thresholds:
            rows.append(f"{r.tau:6.2f} {r.tp:7d} {r.fp:7d} {r.fn:7d} "
                        f"{r.precision:8.4f} {r.recall:8.4f} {r.f1:8.4f}")
        rows.append(f"mF1 {self.mf1:.4f}")
        if self.by_scene:
            taus = [r.tau for r in self.thresholds]
            rows.append("scene " + " ".join(f"F1@{int(round(t * 100))}" for t in taus))
            for scene in sorted(self.by_scene):
                rows.append(scene + " " + " ".join(f"{r.f1:.4f}" for r in self.by_scene[scene]))
        return "\n".join(rows)


def read_list_file(path):
    """Entries ``(relative image path, scene or None)`` of a list/manifest file."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split()
            if not parts:
                continue
            entries.append((parts[0].lstrip("/"), parts[1] if len(parts) > 1 else None))
    return entries


def _load_sidecar(path, width, height, required):
    try:
        text = Path(path).read_text(encoding="utf-8")
        return parse_culane(text, width, height)
    except (OSError, ParseError, UnicodeDecodeError) as exc:
        if required:
            raise EvaluationError(f"cannot read ground truth {path}: {exc}") from None
        log.warning("prediction %s unreadable (%s); counted as no lanes", path, exc)
        return LaneSet(width, height, [])


def _eval_image(args):
    rel, pred_root, gt_root, taus, width, height, line_width = args
    sidecar = culane_sidecar(rel)
    gt = _load_sidecar(Path(gt_root) / sidecar, width, height, required=True)
    pred_path = Path(pred_root) / sidecar
    if pred_path.is_file():
        pred = _load_sidecar(pred_path, width, height, required=False)
    else:
        log.warning("no prediction for %s; counted as no lanes", rel)
        pred = LaneSet(width, height, [])
    ious = iou_matrix(pred, gt, width, height, line_width)
    out = []
    for tau in taus:
        m = match_ious(ious, tau)
        out.append((m.tp, m.fp, m.fn))
    return out


def culane_f1(pred_root, gt_root, list_file, thresholds=REPORT_THRESHOLDS,
              line_width=LANE_WIDTH, image_size=CULANE_SIZE, mf1_grid=MF1_GRID, jobs=1):
    """Dataset-level CULane F1 over the images named in ``list_file``.

    Sidecars ``<image stem>.lines.txt`` are looked up under both roots. A
    missing or unreadable prediction counts as zero lanes; an unreadable
    ground truth is an error. When the list file has a second column it is
    taken as the scene tag and per-scene scores are reported as well.
    """
    entries = read_list_file(list_file)
    thresholds = tuple(float(t) for t in thresholds)
    taus = sorted(set(thresholds) | set(mf1_grid))
    width, height = image_size
    work = [(rel, pred_root, gt_root, taus, width, height, line_width) for rel, _ in entries]
    if jobs and jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_image = list(pool.map(_eval_image, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        per_image = [_eval_image(w) for w in work]

    totals = {tau: ThresholdScore(tau) for tau in taus}
    scenes = defaultdict(lambda: {tau: ThresholdScore(tau) for tau in thresholds})
    for (rel, scene), counts in zip(entries, per_image):
        for tau, (tp, fp, fn) in zip(taus, counts):
            buckets = [totals[tau]]
            if scene is not None and tau in thresholds:
                buckets.append(scenes[scene][tau])
            for b in buckets:
                b.tp += tp
                b.fp += fp
                b.fn += fn
    mf1 = float(np.mean([totals[t].f1 for t in mf1_grid])) if mf1_grid else 0.0
    by_scene = {s: [v[t] for t in thresholds] for s, v in scenes.items()}
    return CULaneReport([totals[t] for t in thresholds], mf1, tuple(mf1_grid), by_scene, len(entries))


@dataclass
class TusimpleReport:
    accuracy: float
    fp_rate: float
    fn_rate: float
    f1: float
    correct_points: int = 0
    gt_points: int = 0
    tp: int = 0
    pred_lanes: int = 0
    gt_lanes: int = 0

    def as_dict(self):
        return {"accuracy": self.accuracy, "fp_rate": self.fp_rate, "fn_rate": self.fn_rate,
                "f1": self.f1, "correct_points": self.correct_points, "gt_points": self.gt_points,
                "tp": self.tp, "pred_lanes": self.pred_lanes, "gt_lanes": self.gt_lanes}


def _aligned_pred_rows(pred, gt):
    if list(pred.h_samples) == list(gt.h_samples):
        return [np.asarray(row, dtype=np.float64) for row in pred.lanes]
    lanes = record_to_laneset(pred).lanes
    return [resample_at_rows(lane, gt.h_samples) for lane in lanes]


def tusimple_image_counts(pred, gt, pixel_tol=TUSIMPLE_PIXEL_TOL, match_ratio=TUSIMPLE_MATCH_RATIO):
    """Per-image ``(correct, gt_points, tp, n_pred, n_gt)``.

    ``pred`` may be ``None`` (no prediction for this image). Lanes without a
    single valid point are ignored on both sides.
    """
    gt_rows = [np.asarray(r, dtype=np.float64) for r in gt.lanes]
    gt_rows = [r for r in gt_rows if np.any(r >= 0)]
    pred_rows = [] if pred is None else [r for r in _aligned_pred_rows(pred, gt) if np.any(r >= 0)]
    gt_valid = [r >= 0 for r in gt_rows]
    hits = np.zeros((len(pred_rows), len(gt_rows)), dtype=np.int64)
    for i, p in enumerate(pred_rows):
        for j, g in enumerate(gt_rows):
            ok = (p >= 0) & gt_valid[j] & (np.abs(p - g) <= pixel_tol)
            hits[i, j] = np.count_nonzero(ok)
    pairs = assignment.solve(hits, hits > 0)
    correct = sum(int(hits[i, j]) for i, j in pairs)
    tp = sum(hits[i, j] / np.count_nonzero(gt_valid[j]) > match_ratio for i, j in pairs)
    total = sum(int(np.count_nonzero(v)) for v in gt_valid)
    return correct, total, int(tp), len(pred_rows), len(gt_rows)


def tusimple_eval(pred_records, gt_records, pixel_tol=TUSIMPLE_PIXEL_TOL,
                  match_ratio=TUSIMPLE_MATCH_RATIO):
    """Score Tusimple predictions against ground truth; records are keyed by ``raw_file``."""
    gt_by_file = {}
    for rec in gt_records:
        gt_by_file[rec.raw_file] = rec
    pred_by_file = {}
    for rec in pred_records:
        if rec.raw_file not in gt_by_file:
            raise EvaluationError(f"prediction for unknown image {rec.raw_file!r}")
        pred_by_file[rec.raw_file] = rec
    correct = total = tp = n_pred = n_gt = 0
    for raw_file, gt in gt_by_file.items():
        c, s, t, np_, ng = tusimple_image_counts(pred_by_file.get(raw_file), gt, pixel_tol, match_ratio)
        correct += c
        total += s
        tp += t
        n_pred += np_
        n_gt += ng
    precision = safe_div(tp, n_pred)
    recall = safe_div(tp, n_gt)
    return TusimpleReport(
        accuracy=safe_div(correct, total),
        fp_rate=safe_div(n_pred - tp, n_pred),
        fn_rate=safe_div(n_gt - tp, n_gt),
        f1=f1_score(precision, recall),
        correct_points=correct, gt_points=total, tp=tp, pred_lanes=n_pred, gt_lanes=n_gt)


def read_tusimple_records(path):
    return [rec for rec, _ in read_tusimple(path)]
