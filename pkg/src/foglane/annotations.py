"""Lane annotations: CULane ``.lines.txt`` sidecars and Tusimple JSON lines.

In memory every lane is a polyline stored y-ascending; each serializer owns
its own ordering convention. Tusimple records mark rows without a lane point
with the ``-2`` sentinel.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ParseError

log = logging.getLogger(__name__)

NO_POINT = -2
MAX_LANES = 8
CULANE_SIZE = (1640, 590)


@dataclass
class Lane:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 2:
            raise ParameterError("a lane needs at least two points")
        if not np.all(np.diff(pts[:, 1]) > 0):
            raise ParameterError("lane points must be strictly increasing in y")
        self.points = pts

    @classmethod
    def from_unordered(cls, points):
        """Sort by y (stable) and keep the first point of each repeated row."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        pts = pts[np.argsort(pts[:, 1], kind="stable")]
        if len(pts):
            keep = np.concatenate([[True], np.diff(pts[:, 1]) > 0])
            pts = pts[keep]
        return cls(pts)

    @property
    def xs(self):
        return self.points[:, 0]

    @property
    def ys(self):
        return self.points[:, 1]

    def __eq__(self, other):
        return isinstance(other, Lane) and np.array_equal(self.points, other.points)


@dataclass
class LaneSet:
    image_width: int = CULANE_SIZE[0]
    image_height: int = CULANE_SIZE[1]
    lanes: list = field(default_factory=list)
    # degenerate lanes skipped while parsing
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.lanes) > MAX_LANES:
            raise ParameterError(f"at most {MAX_LANES} lanes per image, got {len(self.lanes)}")
        w = self.image_width
        for lane in self.lanes:
            if lane.xs.min() < -w or lane.xs.max() > 2 * w:
                raise ParameterError("lane x coordinate far outside the image")

    def __len__(self):
        return len(self.lanes)


@dataclass
class TusimpleRecord:
    raw_file: str
    h_samples: list
    lanes: list

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.h_samples, self.h_samples[1:])):
            raise ParseError("h_samples must be strictly ascending")
        for i, row in enumerate(self.lanes):
            if len(row) != len(self.h_samples):
                raise ParseError(
                    f"lane {i} has {len(row)} entries for {len(self.h_samples)} h_samples")

    def to_json(self):
        return json.dumps({
            "lanes": [[_json_number(x) for x in row] for row in self.lanes],
            "h_samples": [_json_number(y) for y in self.h_samples],
            "raw_file": self.raw_file,
        })


def _json_number(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _format_coord(v):
    # 5 decimals, trailing zeros dropped
    text = f"{v:.5f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def parse_culane(text, image_width=CULANE_SIZE[0], image_height=CULANE_SIZE[1]):
    """Parse the body of a ``.lines.txt`` file.

    Lanes with fewer than two distinct rows are dropped with a warning and
    counted in ``LaneSet.dropped``.
    """
    lanes, dropped = [], 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) % 2:
            raise ParseError(f"odd number of coordinates ({len(tokens)})", line=lineno)
        try:
            values = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise ParseError(f"non-numeric token: {exc}", line=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite coordinate", line=lineno)
        pts = np.array(values).reshape(-1, 2)
        if len(np.unique(pts[:, 1])) < 2:
            dropped += 1
            continue
        lanes.append(Lane.from_unordered(pts))
    if dropped:
        log.warning("dropped %d lane(s) with fewer than two points", dropped)
    try:
        return LaneSet(image_width, image_height, lanes, dropped)
    except ParameterError as exc:
        raise ParseError(str(exc)) from None


def write_culane(lane_set):
    """One line per lane, bottom point first."""
    out = []
    for lane in lane_set.lanes:
        coords = []
        for x, y in lane.points[::-1]:
            coords += [_format_coord(x), _format_coord(y)]
        out.append(" ".join(coords))
    return "".join(line + "\n" for line in out)


def parse_tusimple(record_line, image_size=(1280, 720)):
    """Parse one JSON line into ``(TusimpleRecord, LaneSet)``.

    Rows whose x is negative (the ``-2`` sentinel) carry no point.
    """
    try:
        obj = json.loads(record_line)
        raw_file = obj["raw_file"]
        h_samples = list(obj["h_samples"])
        rows = [list(r) for r in obj["lanes"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed Tusimple record: {exc}") from None
    record = TusimpleRecord(raw_file, h_samples, rows)
    return record, record_to_laneset(record, image_size)


def record_to_laneset(record, image_size=(1280, 720)):
    lanes, dropped = [], 0
    ys = np.asarray(record.h_samples, dtype=np.float64)
    for row in record.lanes:
        xs = np.asarray(row, dtype=np.float64)
        valid = xs >= 0
        if valid.sum() < 2:
            dropped += 1
            continue
        lanes.append(Lane(np.column_stack([xs[valid], ys[valid]])))
    if dropped:
        log.warning("%s: dropped %d lane(s) with fewer than two points", record.raw_file, dropped)
    return LaneSet(image_size[0], image_size[1], lanes, dropped)


def read_tusimple(path, image_size=(1280, 720)):
    """All records of a Tusimple JSON-lines file, as ``(record, LaneSet)`` pairs."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse_tusimple(line, image_size))
            except ParseError as exc:
                raise ParseError(str(exc), line=lineno) from None
    return out


def resample_at_rows(lane, rows):
    """Linearly interpolated x at each row; ``-2`` outside the lane's y-span."""
    rows = np.asarray(rows, dtype=np.float64)
    xs = np.interp(rows, lane.ys, lane.xs)
    outside = (rows < lane.ys[0]) | (rows > lane.ys[-1])
    xs[outside] = NO_POINT
    return xs


def rescale_annotations(lane_set, new_w, new_h):
    """Scale x and y independently to a ``new_w`` x ``new_h`` frame."""
    if new_w < 1 or new_h < 1:
        raise ParameterError("target size must be at least 1x1")
    sx = new_w / lane_set.image_width
    sy = new_h / lane_set.image_height
    lanes = [Lane(lane.points * (sx, sy)) for lane in lane_set.lanes]
    return LaneSet(new_w, new_h, lanes)


def to_tusimple(lane_set, rows, raw_file=""):
    if rows is None:
        raise ParameterError("Tusimple output needs h_samples rows")
    rows = [int(r) if float(r).is_integer() else float(r) for r in rows]
    lanes = [resample_at_rows(lane, rows).tolist() for lane in lane_set.lanes]
    return TusimpleRecord(raw_file, rows, lanes)


def convert(lane_set, target_format, rows=None, raw_file=""):
    """Serialize ``lane_set`` as ``"culane"`` text or a ``"tusimple"`` JSON line."""
    if target_format == "culane":
        return write_culane(lane_set)
    if target_format == "tusimple":
        return to_tusimple(lane_set, rows, raw_file).to_json()
    raise ParameterError(f"unknown annotation format {target_format!r}")


def culane_sidecar(image_rel):
    """``a/b/00120.jpg`` -> ``a/b/00120.lines.txt``."""
    image_rel = str(image_rel)
    stem = image_rel.rsplit(".", 1)[0] if "." in image_rel.rsplit("/", 1)[-1] else image_rel
    return stem + ".lines.txt"
