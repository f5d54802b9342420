"""Per-pixel depth for the transmittance model.

Depth comes either from external files (16-bit grayscale PNG or PFM) or from
a flat-road ground-plane approximation, where the depth of an image row below
the horizon falls off as ``scale / (row - horizon)``.

All depth handed to the fog model is relative: values in [0, 1] after
``normalize_depth``. Extinction coefficients are therefore expressed per unit
of normalized depth.
"""
import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import IngestionError, ParameterError


@dataclass
class DepthMap:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError(f"depth must be 2-D, got shape {self.values.shape}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ParameterError("depth values must be finite and non-negative")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class GroundPlaneModel:
    horizon_row: float
    scale: float = 100.0
    d_min: float = 0.1
    d_max: float = 10.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ParameterError("ground-plane scale must be positive")
        if not 0 < self.d_min < self.d_max:
            raise ParameterError("need 0 < d_min < d_max")


def read_pfm(path):
    """Read a PFM file into a float array (rows top-to-bottom)."""
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise IngestionError(f"{path}: not a PFM file")
        dims = fh.readline()
        while dims.startswith(b"#"):
            dims = fh.readline()
        m = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise IngestionError(f"{path}: malformed PFM dimensions")
        width, height = int(m.group(1)), int(m.group(2))
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        channels = 3 if header == b"PF" else 1
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != width * height * channels:
        raise IngestionError(f"{path}: PFM payload size mismatch")
    shape = (height, width, 3) if channels == 3 else (height, width)
    # PFM scanlines run bottom-to-top
    return np.flipud(data.reshape(shape)).astype(np.float64)


def write_pfm(path, values):
    values = np.asarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ParameterError("write_pfm expects a 2-D array")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        fh.write(np.ascontiguousarray(np.flipud(values)).tobytes())


def load_depth(path, expected_shape=None):
    """Load a depth file.

    16-bit PNGs decode to ``value / 65535`` and are marked normalized; PFM
    floats pass through unchanged. ``expected_shape`` is the (H, W) of the
    paired image, if any.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        raw = read_pfm(path)
        if raw.ndim != 2:
            raise IngestionError(f"{path}: depth PFM must be single-channel")
        depth = DepthMap(raw, normalized=False)
    elif suffix == ".png":
        arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise IngestionError(f"cannot decode depth {path}")
        if arr.dtype != np.uint16 or arr.ndim != 2:
            raise IngestionError(f"{path}: depth PNG must be 16-bit grayscale")
        depth = DepthMap(arr / 65535.0, normalized=True)
    else:
        raise IngestionError(f"unsupported depth format: {path}")
    if expected_shape is not None and depth.values.shape != tuple(expected_shape):
        raise IngestionError(
            f"{path}: depth is {depth.values.shape}, image is {tuple(expected_shape)}")
    return depth


def save_depth_png(path, depth):
    """Store a normalized depth map as a 16-bit PNG."""
    values = depth.values if isinstance(depth, DepthMap) else np.asarray(depth)
    if values.size and (values.min() < 0 or values.max() > 1):
        raise ParameterError("only depth in [0, 1] can be stored as 16-bit PNG")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.rint(values * 65535.0).astype(np.uint16)):
        raise IngestionError(f"cannot encode depth {path}")


def normalize_depth(depth):
    """Divide by the maximum; an all-zero map is returned unchanged."""
    peak = depth.values.max() if depth.values.size else 0.0
    if peak > 0:
        return DepthMap(depth.values / peak, normalized=True)
    return DepthMap(depth.values.copy(), normalized=True)


def synth_ground_plane_depth(width, height, model):
    if width < 1 or height < 1:
        raise ParameterError("depth size must be at least 1x1")
    if not 0 <= model.horizon_row < height:
        raise ParameterError(
            f"horizon row {model.horizon_row} outside image of height {height}")
    rows = np.arange(height, dtype=np.float64)
    below = rows > model.horizon_row
    raw = np.full(height, model.d_max, dtype=np.float64)
    raw[below] = np.clip(model.scale / (rows[below] - model.horizon_row),
                         model.d_min, model.d_max)
    column = raw / model.d_max
    return DepthMap(np.repeat(column[:, None], width, axis=1), normalized=True)


@dataclass(frozen=True)
class DepthSource:
    """Resolves the depth map for each image of a batch.

    External maps live in ``depth_dir`` under the image's relative parent, as
    ``<stem>.png`` or ``<stem>.pfm``. When ``synthetic`` is set, images without
    an external map fall back to the ground-plane model; the horizon is
    ``horizon_row`` if given, else ``horizon_frac * height``.
    """
    depth_dir: Path | None = None
    synthetic: bool = False
    horizon_row: float | None = None
    horizon_frac: float = 0.4
    scale: float = 100.0
    d_min: float = 0.1
    d_max: float = 10.0

    def model_for(self, height):
        horizon = self.horizon_row
        if horizon is None:
            horizon = float(np.floor(self.horizon_frac * height))
        return GroundPlaneModel(horizon, self.scale, self.d_min, self.d_max)

    def external_path(self, rel_path):
        if self.depth_dir is None:
            return None
        rel_path = Path(rel_path)
        for suffix in (".png", ".pfm"):
            candidate = Path(self.depth_dir) / rel_path.parent / (rel_path.stem + suffix)
            if candidate.is_file():
                return candidate
        return None

    def depth_for(self, rel_path, height, width):
        path = self.external_path(rel_path)
        if path is not None:
            depth = load_depth(path, expected_shape=(height, width))
            return depth if depth.normalized else normalize_depth(depth)
        if self.synthetic:
            return synth_ground_plane_depth(width, height, self.model_for(height))
        raise IngestionError(f"no depth map for {Path(rel_path).as_posix()}")
