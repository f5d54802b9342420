"""Edge supervision maps: Canny edges merged with rasterized lane strokes."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError, ShapeError
from .imaging import check_image
from .raster import stroke_polyline

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class CannyParams:
    """Thresholds are on the gradient magnitude of an 8-bit (0-255) luma image."""
    gaussian_sigma: float = 1.4
    low_threshold: float = 50.0
    high_threshold: float = 150.0

    def __post_init__(self):
        if not self.gaussian_sigma > 0:
            raise ParameterError("sigma must be positive")
        if not 0 <= self.low_threshold < self.high_threshold:
            raise ParameterError("need 0 <= low < high")


def gaussian_kernel(sigma):
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def _luma(img):
    img = check_image(img)
    return (LUMA[0] * img[..., 0] + LUMA[1] * img[..., 1] + LUMA[2] * img[..., 2]) * 255.0


def gradients(gray, sigma):
    """Gaussian-smoothed Sobel gradients ``(gx, gy)``; borders replicate."""
    k = gaussian_kernel(sigma)
    smooth = ndimage.correlate1d(gray, k, axis=0, mode="nearest")
    smooth = ndimage.correlate1d(smooth, k, axis=1, mode="nearest")
    diff, tri = np.array([-1.0, 0.0, 1.0]), np.array([1.0, 2.0, 1.0])
    gx = ndimage.correlate1d(ndimage.correlate1d(smooth, tri, axis=0, mode="nearest"),
                             diff, axis=1, mode="nearest")
    gy = ndimage.correlate1d(ndimage.correlate1d(smooth, diff, axis=0, mode="nearest"),
                             tri, axis=1, mode="nearest")
    return gx, gy


# (drow, dcol) of the "forward" neighbour for each quantized direction:
# 0 deg -> along x, 45 -> down-right, 90 -> along y (down), 135 -> down-left
_NEIGHBOURS = ((0, 1), (1, 1), (1, 0), (1, -1))


def non_maximum_suppression(mag, gx, gy):
    """Keep pixels that are a local maximum across the edge.

    Ties are resolved toward the backward side: a pixel must be strictly
    greater than its backward neighbour and at least its forward one, so a
    plateau of two equal responses yields a single edge pixel.
    """
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = (((angle + 22.5) // 45.0).astype(np.int64)) % 4
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dr, dc) in enumerate(_NEIGHBOURS):
        fwd = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        back = padded[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        keep |= (sector == s) & (mag > back) & (mag >= fwd)
    return keep


def hysteresis(candidates, strong):
    """Candidate pixels 8-connected (through candidates) to a strong pixel."""
    labels, n = ndimage.label(candidates, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(candidates.shape, dtype=bool)
    hit = np.zeros(n + 1, dtype=bool)
    hit[np.unique(labels[strong & candidates])] = True
    hit[0] = False
    return hit[labels]


def canny(img, params=CannyParams()):
    """Binary edge map of an RGB float image in [0, 1]."""
    gx, gy = gradients(_luma(img), params.gaussian_sigma)
    mag = np.hypot(gx, gy)
    peaks = non_maximum_suppression(mag, gx, gy)
    candidates = peaks & (mag >= params.low_threshold) & (mag > 0)
    return hysteresis(candidates, mag >= params.high_threshold)


def render_lane_strokes(lane_set, stroke_width=3, width=None, height=None):
    """Centre-line strokes of all lanes, round caps and joins, clipped to the frame."""
    if stroke_width < 1:
        raise ParameterError("stroke width must be >= 1")
    width = width or lane_set.image_width
    height = height or lane_set.image_height
    mask = np.zeros((height, width), dtype=bool)
    for lane in lane_set.lanes:
        stroke_polyline(lane.points, width, height, stroke_width, out=mask)
    return mask


def merge_edge_label(canny_map, lane_map):
    a, b = np.asarray(canny_map, dtype=bool), np.asarray(lane_map, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f"edge maps differ in size: {a.shape} vs {b.shape}")
    return a | b


def downsample_label(edge_map, factor):
    """Block max-pooling by an integer factor; the ragged remainder is cropped."""
    if int(factor) != factor or factor < 1:
        raise ParameterError(f"downsample factor must be a positive integer, got {factor}")
    m = np.asarray(edge_map, dtype=bool)
    if factor == 1:
        return m.copy()
    h, w = m.shape[0] // factor, m.shape[1] // factor
    blocks = m[:h * factor, :w * factor].reshape(h, factor, w, factor)
    return blocks.any(axis=(1, 3))


def edge_label(img, lane_set, params=CannyParams(), stroke_width=3, factor=1):
    """Full label pipeline for one image."""
    h, w = img.shape[:2]
    lanes = render_lane_strokes(lane_set, stroke_width, w, h)
    return downsample_label(merge_edge_label(canny(img, params), lanes), factor)
