"""Raster primitives: morphology, label-map overlap, slot bands, pinhole deprojection.

Pixel coordinates are ``(col, row)`` pairs (x right, y down); arrays are
indexed ``[row, col]``. Pixel sets are ``(k, 2)`` integer arrays of
``(row, col)`` as returned by ``np.argwhere``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DepthError, DimensionError


class Point3(NamedTuple):
    """Camera-frame point in metres (x right, y down, z forward)."""

    x: float
    y: float
    z: float

    def distance(self, other):
        return math.dist(self, other)


def encode_label_map(masks, ids, shape):
    """Sum of ``mask * (id + 1)``; where masks overlap the higher ID wins."""
    out = np.zeros(shape, dtype=np.int32)
    for iid, mask in sorted(zip(ids, masks), key=lambda t: t[0]):
        if mask.shape != tuple(shape):
            raise DimensionError(f"mask {iid} is {mask.shape}, label map is {tuple(shape)}")
        out[mask] = iid + 1
    return out


def dilate(mask, radius):
    """Binary dilation by a Euclidean disc of ``radius`` pixels, clipped at the border."""
    if radius < 1:
        raise ValueError("dilation radius must be >= 1")
    return kernels.dilate_disc(mask, radius)


def overlap_labels(label_map, mask):
    """Instances of ``label_map`` under ``mask`` with the shared pixels of each."""
    if label_map.shape != mask.shape:
        raise DimensionError(f"label map {label_map.shape} vs mask {mask.shape}")
    pix = np.argwhere(mask & (label_map > 0))
    if pix.size == 0:
        return []
    labels = label_map[pix[:, 0], pix[:, 1]]
    order = np.argsort(labels, kind="stable")
    labels, pix = labels[order], pix[order]
    uniq, starts = np.unique(labels, return_index=True)
    bounds = list(starts[1:]) + [len(labels)]
    return [(int(v) - 1, pix[s:e]) for v, s, e in zip(uniq, starts, bounds)]


def slot_index(bbox, pixel_set, n_slots):
    """Band (1..n_slots) of ``bbox`` holding the centroid of ``pixel_set``.

    The box is cut along its longer side; slot 1 is the top band (left band
    for boxes wider than tall).
    """
    x0, y0, x1, y1 = bbox
    pts = np.asarray(pixel_set, dtype=np.float64).reshape(-1, 2)
    if y1 - y0 >= x1 - x0:
        lo, hi, axis = y0, y1, 0
    else:
        lo, hi, axis = x0, x1, 1
    if hi <= lo:
        return 1
    # offsets from the box edge first, so integer pixel sets are translation exact
    t = (pts[:, axis] - lo).mean() / (hi - lo)
    return int(min(n_slots, max(1, math.floor(t * n_slots) + 1)))


def deproject(pixel, depth_m, intrinsics):
    """Pinhole back-projection of ``(col, row)`` at metric depth ``depth_m``."""
    if not depth_m > 0:
        raise DepthError(f"cannot deproject with depth {depth_m}")
    col, row = pixel
    return Point3(
        (col - intrinsics.cx) * depth_m / intrinsics.fx,
        (row - intrinsics.cy) * depth_m / intrinsics.fy,
        float(depth_m),
    )


def project(point, intrinsics):
    x, y, z = point
    return (x * intrinsics.fx / z + intrinsics.cx, y * intrinsics.fy / z + intrinsics.cy)


def estimate_real_depth(pixel, depth, intrinsics=None, window=2, max_radius=15):
    """Median of the valid depths in a ``(2w+1)^2`` window around ``pixel``, in metres.

    An all-invalid window falls back to the nearest valid pixel within
    ``max_radius``.
    """
    col, row = int(round(pixel[0])), int(round(pixel[1]))
    h, w = depth.values.shape
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"pixel {pixel} outside {w}x{h} depth image")
    win = depth.values[max(0, row - window) : row + window + 1, max(0, col - window) : col + window + 1]
    good = win[win > 0]
    if good.size:
        return float(np.median(good.astype(np.float64))) * depth.depth_scale

    r = int(max_radius)
    r0, c0 = max(0, row - r), max(0, col - r)
    patch = depth.values[r0 : row + r + 1, c0 : col + r + 1]
    cand = np.argwhere(patch > 0)
    if cand.size:
        d2 = (cand[:, 0] + r0 - row) ** 2 + (cand[:, 1] + c0 - col) ** 2
        ok = d2 <= max_radius * max_radius
        if ok.any():
            best = cand[ok][np.argmin(d2[ok])]
            return float(patch[best[0], best[1]]) * depth.depth_scale
    raise DepthError(f"no valid depth within {max_radius} px of {pixel}")


def crop_window(bbox, margin, shape):
    """Slices covering ``bbox`` grown by ``margin`` and clipped to ``shape``."""
    x0, y0, x1, y1 = bbox
    h, w = shape
    return (
        slice(max(0, y0 - margin), min(h, y1 + margin + 1)),
        slice(max(0, x0 - margin), min(w, x1 + margin + 1)),
    )
