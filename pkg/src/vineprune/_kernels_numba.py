"""numba-compiled kernels; same contracts as :mod:`vineprune._kernels_numpy`."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _rasterize(xs, ys, height, width):
    out = np.zeros((height, width), dtype=np.bool_)
    n = xs.shape[0]
    r0 = max(0, int(math.ceil(ys.min())))
    r1 = min(height - 1, int(math.floor(ys.max())))
    c0 = max(0, int(math.ceil(xs.min())))
    c1 = min(width - 1, int(math.floor(xs.max())))
    if r1 < r0 or c1 < c0:
        return out
    buf = np.empty(n, dtype=np.float64)
    for r in range(r0, r1 + 1):
        k = 0
        for i in range(n):
            j = (i + 1) % n
            x0, y0, x1, y1 = xs[i], ys[i], xs[j], ys[j]
            if (y0 <= r and r < y1) or (y1 <= r and r < y0):
                buf[k] = x0 + (r - y0) * (x1 - x0) / (y1 - y0)
                k += 1
        cr = np.sort(buf[:k])
        for p in range(0, k - 1, 2):
            a = max(c0, int(math.ceil(cr[p])))
            b = min(c1, int(math.floor(cr[p + 1])))
            for c in range(a, b + 1):
                out[r, c] = True

    for i in range(n):
        j = (i + 1) % n
        x0, y0, x1, y1 = xs[i], ys[i], xs[j], ys[j]
        dx = x1 - x0
        dy = y1 - y0
        if dy == 0.0:
            if y0 != math.floor(y0) or y0 < r0 or y0 > r1:
                continue
            r = int(y0)
            for c in range(max(c0, int(math.ceil(min(x0, x1)))), min(c1, int(math.floor(max(x0, x1)))) + 1):
                out[r, c] = True
            continue
        tol = 1e-9 * (abs(dx) + abs(dy) + 1.0)
        lo = max(r0, int(math.ceil(min(y0, y1))))
        hi = min(r1, int(math.floor(max(y0, y1))))
        for r in range(lo, hi + 1):
            c = float(math.floor(x0 + (r - y0) * dx / dy + 0.5))
            if abs(dx * (r - y0) - dy * (c - x0)) <= tol and c >= c0 and c <= c1:
                out[r, int(c)] = True
    return out


def rasterize_polygon(xs, ys, height, width):
    return _rasterize(
        np.ascontiguousarray(xs, dtype=np.float64),
        np.ascontiguousarray(ys, dtype=np.float64),
        int(height),
        int(width),
    )


@njit(cache=True)
def _dilate(mask, offsets):
    h, w = mask.shape
    out = mask.copy()
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            for k in range(offsets.shape[0]):
                rr = r + offsets[k, 0]
                cc = c + offsets[k, 1]
                if 0 <= rr < h and 0 <= cc < w:
                    out[rr, cc] = True
    return out


def dilate_disc(mask, radius):
    from ._kernels_numpy import disc_offsets

    return _dilate(np.ascontiguousarray(mask, dtype=np.bool_), disc_offsets(radius))


@njit(cache=True)
def _row_extents(mask):
    h, w = mask.shape
    count = np.zeros(h, dtype=np.int64)
    cmin = np.full(h, -1, dtype=np.int64)
    cmax = np.full(h, -1, dtype=np.int64)
    csum = np.zeros(h, dtype=np.int64)
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                if count[r] == 0:
                    cmin[r] = c
                cmax[r] = c
                count[r] += 1
                csum[r] += c
    return count, cmin, cmax, csum


def row_extents(mask):
    return _row_extents(np.ascontiguousarray(mask, dtype=np.bool_))
