"""Fog synthesis with the atmospheric scattering model.

A clear image ``J`` seen through a homogeneous medium becomes

    I = J * t + A * (1 - t),    t = exp(-beta * d)

where ``d`` is relative depth, ``beta`` the extinction coefficient and ``A``
the airlight. ``A`` is estimated from the clear image with the dark channel:
the brightest fraction of dark-channel pixels is selected and ``A`` is the
largest channel value among them.
"""
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .depth import DepthMap, DepthSource
from .errors import FoglaneError, ParameterError, ShapeError
from .imaging import check_image, list_images, read_image_u8, write_image_u8

log = logging.getLogger(__name__)

# published fog tiers (light, medium, heavy) on normalized depth
BETA_PRESETS = (2.0, 4.0, 8.0)


@dataclass(frozen=True)
class FogParams:
    beta: float
    atmospheric_light: float | None = None
    dc_window: int = 15
    bright_percentile: float = 0.001

    def __post_init__(self):
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if self.atmospheric_light is not None and not 0 <= self.atmospheric_light <= 1:
            raise ParameterError("atmospheric light must lie in [0, 1]")
        _check_window(self.dc_window)
        if not 0 < self.bright_percentile <= 1:
            raise ParameterError("bright_percentile must lie in (0, 1]")


def _check_window(window):
    if int(window) != window or window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be a positive odd integer, got {window}")


def _min_filter_axis(a, radius, axis):
    # Edge replication equals shrinking the window at the border for a min.
    if radius == 0:
        return a
    n = a.shape[axis]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(a, pad, mode="edge")
    lead = (slice(None),) * axis
    out = padded[lead + (slice(0, n),)].copy()
    for offset in range(1, 2 * radius + 1):
        np.minimum(out, padded[lead + (slice(offset, offset + n),)], out=out)
    return out


def dark_channel(img, window=15):
    """Per-pixel minimum over the three channels and a ``window`` x ``window`` square.

    The square is clipped at the image border rather than padded.
    """
    _check_window(window)
    img = check_image(img)
    radius = window // 2
    per_pixel = np.minimum(np.minimum(img[..., 0], img[..., 1]), img[..., 2])
    return _min_filter_axis(_min_filter_axis(per_pixel, radius, 0), radius, 1)


def estimate_atmospheric_light(img, dark, percentile=0.001):
    """Airlight from the top ``percentile`` of dark-channel pixels.

    ``k = max(1, floor(percentile * H * W))`` pixels with the largest dark
    values are chosen (ties go to the lower row-major index) and the largest
    channel value among them is returned.
    """
    if not 0 < percentile <= 1:
        raise ParameterError("percentile must lie in (0, 1]")
    img = check_image(img)
    flat = np.asarray(dark).ravel()
    if flat.size != img.shape[0] * img.shape[1]:
        raise ShapeError("dark channel does not match image size")
    n = flat.size
    k = max(1, math.floor(percentile * n))
    if flat.dtype == np.uint8:
        # cutoff = largest level whose upper tail holds at least k pixels
        tail = np.cumsum(np.bincount(flat, minlength=256)[::-1])
        cutoff = 255 - int(np.searchsorted(tail, k))
    else:
        cutoff = np.partition(flat, n - k)[n - k]
    above = np.flatnonzero(flat > cutoff)
    at_cutoff = np.flatnonzero(flat == cutoff)[: k - above.size]
    chosen = np.concatenate([above, at_cutoff])
    return float(img.reshape(-1, 3)[chosen].max())


def transmittance(depth, beta):
    if not beta >= 0:
        raise ParameterError(f"beta must be >= 0, got {beta}")
    values = depth.values if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    return np.exp(-beta * values)


def compose_fog(clear, t, airlight):
    clear = check_image(clear)
    t = np.asarray(t)
    if t.shape != clear.shape[:2]:
        raise ShapeError(f"transmittance {t.shape} does not match image {clear.shape[:2]}")
    if not 0 <= airlight <= 1:
        raise ParameterError("atmospheric light must lie in [0, 1]")
    t3 = t[..., None]
    foggy = clear * t3 + airlight * (1.0 - t3)
    return np.clip(foggy, 0.0, 1.0, out=foggy)


def fog_image(clear, depth, params):
    """Fog one float image; returns ``(foggy, A)``."""
    airlight = params.atmospheric_light
    if airlight is None:
        dark = dark_channel(clear, params.dc_window)
        airlight = estimate_atmospheric_light(clear, dark, params.bright_percentile)
    return compose_fog(clear, transmittance(depth, params.beta), airlight), airlight


def fog_image_u8(clear, depth, params):
    """8-bit in, 8-bit out variant of :func:`fog_image` used by the batch path.

    Minima and maxima commute with ``v / 255``, so the dark channel and
    airlight are computed on the raw bytes and agree exactly with the float
    route; composition runs in float32.
    """
    clear = check_image(clear)
    airlight = params.atmospheric_light
    if airlight is None:
        dark = dark_channel(clear, params.dc_window)
        airlight = estimate_atmospheric_light(clear, dark, params.bright_percentile) / 255.0
    t = transmittance(depth, params.beta).astype(np.float32)
    if t.shape != clear.shape[:2]:
        raise ShapeError(f"transmittance {t.shape} does not match image {clear.shape[:2]}")
    level = np.float32(airlight * 255.0)
    # J t + A (1 - t) rearranged as A + (J - A) t to stay in place
    foggy = clear.astype(np.float32)
    foggy -= level
    foggy *= t[..., None]
    foggy += level
    np.rint(foggy, out=foggy)
    np.clip(foggy, 0, 255, out=foggy)
    return foggy.astype(np.uint8), airlight


@dataclass
class FogRecord:
    path: str
    status: str
    atmospheric_light: float | None = None
    error: str | None = None

    def to_json(self):
        rec = {"path": self.path, "status": self.status, "A": self.atmospheric_light}
        if self.error is not None:
            rec["error"] = self.error
        return json.dumps(rec, sort_keys=True)


@dataclass
class FogSummary:
    records: list = field(default_factory=list)

    @property
    def count(self):
        return sum(r.status == "ok" for r in self.records)

    @property
    def failures(self):
        return [r for r in self.records if r.status != "ok"]

    def write_report(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")


def _fog_one(rel, input_dir, out_dir, depth_source, params):
    name = rel.as_posix()
    try:
        clear = read_image_u8(Path(input_dir) / rel)
        h, w = clear.shape[:2]
        depth = depth_source.depth_for(rel, h, w)
        foggy, airlight = fog_image_u8(clear, depth, params)
        write_image_u8(Path(out_dir) / rel, foggy)
    except (FoglaneError, OSError, ValueError) as exc:
        log.warning("fog failed for %s: %s", name, exc)
        return FogRecord(name, "failed", error=str(exc))
    return FogRecord(name, "ok", atmospheric_light=airlight)


def fog_batch(input_dir, out_dir, params, depth_source=None, jobs=None):
    """Fog every image under ``input_dir`` into the same relative path under ``out_dir``.

    Per-file problems are recorded in the summary and do not stop the batch.
    Records are kept in sorted path order whatever the degree of parallelism.
    """
    if depth_source is None:
        depth_source = DepthSource(synthetic=True)
    paths = list_images(input_dir)
    jobs = jobs or os.cpu_count() or 1

    def work(rel):
        return _fog_one(rel, input_dir, out_dir, depth_source, params)

    if jobs == 1:
        records = [work(rel) for rel in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(work, paths))
    return FogSummary(records)
