"""Binary polyline strokes with round caps and joins, no anti-aliasing.

A pixel belongs to a stroke of width ``w`` when its sample point lies
strictly closer than ``w / 2`` to the polyline. The sample point is the
integer pixel coordinate for odd widths and is offset by half a pixel for
even widths, so a stroke along an integer column or row is exactly ``w``
pixels across and never lands on the boundary. Width 1 falls back to
Bresenham between rounded vertices.
"""
import math

import numpy as np

from .errors import ParameterError


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def bresenham(x0, y0, x1, y1):
    """Integer pixels on the segment (x0, y0)-(x1, y1), endpoints included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _stroke_thin(mask, origin, frame, points):
    r_org, c_org = origin
    w, h = frame
    verts = [(_round_half_up(x), _round_half_up(y)) for x, y in points]
    if len(verts) == 1:
        verts = verts * 2
    mh, mw = mask.shape
    for (x0, y0), (x1, y1) in zip(verts, verts[1:]):
        pix = np.array(bresenham(x0, y0, x1, y1))
        cols, rows = pix[:, 0] - c_org, pix[:, 1] - r_org
        keep = ((pix[:, 0] >= 0) & (pix[:, 0] < w) & (pix[:, 1] >= 0) & (pix[:, 1] < h)
                & (cols >= 0) & (cols < mw) & (rows >= 0) & (rows < mh))
        mask[rows[keep], cols[keep]] = True


def _stroke_thick(mask, origin, frame, points, line_width):
    # all distance arithmetic is done in frame coordinates so a crop and the
    # full frame produce identical pixels
    r_org, c_org = origin
    mh, mw = mask.shape
    half = line_width / 2.0
    limit = half * half
    offset = 0.5 if line_width % 2 == 0 else 0.0
    segs = list(zip(points, points[1:])) or [(points[0], points[0])]
    for (ax, ay), (bx, by) in segs:
        c0 = max(math.floor(min(ax, bx) - half - offset) - 1, c_org)
        c1 = min(math.ceil(max(ax, bx) + half - offset) + 1, c_org + mw - 1)
        r0 = max(math.floor(min(ay, by) - half - offset) - 1, r_org)
        r1 = min(math.ceil(max(ay, by) + half - offset) + 1, r_org + mh - 1)
        if c0 > c1 or r0 > r1:
            continue
        px = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] + (offset - ax)
        py = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] + (offset - ay)
        vx, vy = bx - ax, by - ay
        seg_len2 = vx * vx + vy * vy
        if seg_len2 > 0:
            s = np.clip((px * vx + py * vy) / seg_len2, 0.0, 1.0)
            dx = px - s * vx
            dy = py - s * vy
        else:
            dx, dy = px, py
        mask[r0 - r_org:r1 - r_org + 1, c0 - c_org:c1 - c_org + 1] |= dx * dx + dy * dy < limit


def _as_points(points):
    return [(float(x), float(y)) for x, y in np.asarray(points, dtype=np.float64).reshape(-1, 2)]


def _draw(mask, origin, frame, pts, line_width):
    if line_width < 1:
        raise ParameterError(f"line width must be >= 1, got {line_width}")
    if not pts:
        return
    if line_width == 1:
        _stroke_thin(mask, origin, frame, pts)
    else:
        _stroke_thick(mask, origin, frame, pts, line_width)


def stroke_polyline(points, width, height, line_width, out=None):
    """Rasterize one polyline into a ``height`` x ``width`` boolean mask.

    ``points`` is an (N, 2) array of (x, y) pixel coordinates. Pixels outside
    the frame are clipped. If ``out`` is given the stroke is OR-ed into it.
    """
    mask = np.zeros((height, width), dtype=bool) if out is None else out
    _draw(mask, (0, 0), (width, height), _as_points(points), line_width)
    return mask


def stroke_crop(points, width, height, line_width):
    """Rasterize into the stroke's bounding box only.

    Returns ``(row0, col0, crop)`` with ``crop`` equal to the corresponding
    window of :func:`stroke_polyline`'s output, or ``None`` when the stroke
    misses the frame entirely.
    """
    pts = _as_points(points)
    if not pts:
        return None
    arr = np.array(pts)
    pad = line_width / 2.0 + 2
    c0 = max(math.floor(arr[:, 0].min() - pad), 0)
    c1 = min(math.ceil(arr[:, 0].max() + pad), width - 1)
    r0 = max(math.floor(arr[:, 1].min() - pad), 0)
    r1 = min(math.ceil(arr[:, 1].max() + pad), height - 1)
    if c0 > c1 or r0 > r1:
        return None
    crop = np.zeros((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
    _draw(crop, (r0, c0), (width, height), pts, line_width)
    return r0, c0, crop
