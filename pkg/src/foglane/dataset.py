"""Dataset construction: frame sampling, resizing, manifests and scene-balanced splits."""
import enum
import logging
import os
import re
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .annotations import culane_sidecar, parse_culane, rescale_annotations, write_culane
from .errors import FoglaneError, IngestionError, ParameterError, ParseError
from .imaging import list_images, read_image_u8, write_image_u8

log = logging.getLogger(__name__)

TARGET_SIZE = (1640, 590)


class SceneTag(str, enum.Enum):
    NORMAL = "Normal"
    ARROW = "Arrow"
    CROWD = "Crowd"
    CURVE = "Curve"
    NIGHT = "Night"
    CROSSROAD = "Crossroad"

    @classmethod
    def parse(cls, text):
        for tag in cls:
            if tag.value.lower() == str(text).strip().lower():
                return tag
        raise ParameterError(f"unknown scene tag {text!r}")


@dataclass
class Manifest:
    entries: list = field(default_factory=list)  # (relative posix path, SceneTag)
    split: str = "all"

    def __post_init__(self):
        paths = [p for p, _ in self.entries]
        if len(set(paths)) != len(paths):
            raise ParameterError("manifest paths must be unique")

    def __len__(self):
        return len(self.entries)

    def scene_counts(self):
        counts = {}
        for _, tag in self.entries:
            counts[tag] = counts.get(tag, 0) + 1
        return counts

    def to_text(self):
        return "".join(f"{path}\t{tag.value}\n" for path, tag in self.entries)

    def write(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def read(cls, path, split="all"):
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t") if "\t" in line else line.split()
                if not parts or not parts[0].strip():
                    continue
                try:
                    tag = SceneTag.parse(parts[1]) if len(parts) > 1 else SceneTag.NORMAL
                except ParameterError as exc:
                    raise ParseError(str(exc), line=lineno) from None
                entries.append((parts[0].strip().lstrip("/"), tag))
        return cls(entries, split)


def _frame_key(path):
    # natural order so frame 10 sorts after frame 9
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", str(path))]


def sample_frames(frame_paths, interval):
    """Every ``interval``-th frame, starting with the first."""
    if int(interval) != interval or interval < 1:
        raise ParameterError(f"interval must be a positive integer, got {interval}")
    return list(frame_paths)[::int(interval)]


def sample_directory(frame_dir, out_dir, interval):
    """Copy the sampled frames of an extracted frame sequence to ``out_dir``."""
    frames = sorted(list_images(frame_dir), key=_frame_key)
    chosen = sample_frames(frames, interval)
    for rel in chosen:
        dst = Path(out_dir) / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(Path(frame_dir) / rel, dst)
    return [rel.as_posix() for rel in chosen]


@dataclass
class ResizeRecord:
    path: str
    status: str
    src_size: tuple | None = None
    dst_size: tuple | None = None
    annotation: bool = False
    error: str | None = None

    def as_dict(self):
        rec = {"path": self.path, "status": self.status,
               "src_size": list(self.src_size) if self.src_size else None,
               "dst_size": list(self.dst_size) if self.dst_size else None,
               "annotation": self.annotation}
        if self.error is not None:
            rec["error"] = self.error
        return rec


def _resize_one(rel, in_root, out_root, target_w, target_h, annotations):
    name = rel.as_posix()
    try:
        img = read_image_u8(Path(in_root) / rel)
        h, w = img.shape[:2]
        if (w, h) == (target_w, target_h):
            out = img
        else:
            out = cv2.resize(img, (target_w, target_h), interpolation=cv2.INTER_LINEAR)
        write_image_u8(Path(out_root) / rel, out)
        has_ann = False
        if annotations:
            sidecar = Path(in_root) / culane_sidecar(name)
            if sidecar.is_file():
                lanes = parse_culane(sidecar.read_text(encoding="utf-8"), w, h)
                scaled = rescale_annotations(lanes, target_w, target_h)
                dst = Path(out_root) / culane_sidecar(name)
                dst.write_text(write_culane(scaled), encoding="utf-8")
                has_ann = True
    except (FoglaneError, OSError, ValueError) as exc:
        log.warning("resize failed for %s: %s", name, exc)
        return ResizeRecord(name, "failed", error=str(exc))
    return ResizeRecord(name, "ok", (w, h), (target_w, target_h), has_ann)


def resize_dataset(in_root, out_root, target_w=TARGET_SIZE[0], target_h=TARGET_SIZE[1],
                   annotations=False, jobs=None):
    """Bilinear resize of every image under ``in_root``; CULane sidecars follow when asked.

    The resize is anisotropic: both axes are scaled independently to the
    target, and annotation coordinates are scaled by the same factors.
    """
    if target_w < 1 or target_h < 1:
        raise ParameterError("target size must be at least 1x1")
    paths = list_images(in_root)

    def work(rel):
        return _resize_one(rel, in_root, out_root, target_w, target_h, annotations)

    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        return [work(rel) for rel in paths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, paths))


def _allocate(n, ratio_train, ratio_test):
    # largest remainder; a tie goes to train
    total = ratio_train + ratio_test
    exact_train = n * ratio_train / total
    exact_test = n * ratio_test / total
    train, test = int(exact_train), int(exact_test)
    if train + test < n:
        if exact_train - train >= exact_test - test:
            train += 1
        else:
            test += 1
    return train, n - train


def split_dataset(manifest, ratio_train=2, ratio_test=1, seed=0):
    """Scene-balanced train/test split.

    Each scene is shuffled with a seeded generator and divided at the global
    ratio, so every scene's split is within one item of proportional.
    Outputs are listed in path order.
    """
    if ratio_train < 1 or ratio_test < 1:
        raise ParameterError("split ratios must be >= 1")
    rng = np.random.default_rng(seed)
    groups = {}
    for path, tag in manifest.entries:
        groups.setdefault(tag, []).append(path)
    train, test = [], []
    for tag in SceneTag:
        paths = sorted(groups.get(tag, []))
        if not paths:
            continue
        order = rng.permutation(len(paths))
        n_train, _ = _allocate(len(paths), ratio_train, ratio_test)
        train += [(paths[i], tag) for i in order[:n_train]]
        test += [(paths[i], tag) for i in order[n_train:]]
    return Manifest(sorted(train), "train"), Manifest(sorted(test), "test")


def read_scene_map(path):
    """``path<TAB>scene`` lines; when a path repeats, the last line wins."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t") if "\t" in line else line.split()
            if len(parts) < 2 or not parts[0].strip():
                continue
            key = parts[0].strip().lstrip("/")
            try:
                tag = SceneTag.parse(parts[1])
            except ParameterError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if key in mapping:
                log.warning("scene map: %s assigned twice (line %d); last one wins", key, lineno)
            mapping[key] = tag
    return mapping


def build_manifest(root, scene_map=None):
    """Every image under ``root`` in lexicographic order, tagged Normal unless mapped."""
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise IngestionError(f"cannot read directory {root}")
    if isinstance(scene_map, (str, Path)):
        scene_map = read_scene_map(scene_map)
    scene_map = scene_map or {}
    entries = []
    for rel in list_images(root):
        key = rel.as_posix()
        entries.append((key, scene_map.get(key, SceneTag.NORMAL)))
    return Manifest(entries)
