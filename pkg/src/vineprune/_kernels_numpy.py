"""Vectorised numpy kernels. Reference path when numba is disabled."""

import numpy as np


def rasterize_polygon(xs, ys, height, width):
    """Boolean mask of pixel centres inside or on the ring ``(xs, ys)``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    out = np.zeros((height, width), dtype=np.bool_)
    r0 = max(0, int(np.ceil(ys.min())))
    r1 = min(height - 1, int(np.floor(ys.max())))
    if r1 < r0:
        return out
    c0 = max(0, int(np.ceil(xs.min())))
    c1 = min(width - 1, int(np.floor(xs.max())))
    if c1 < c0:
        return out

    x0, y0 = xs, ys
    x1, y1 = np.roll(xs, -1), np.roll(ys, -1)
    rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]

    # even-odd scanline fill with half-open edge rule
    crosses = ((y0 <= rows) & (rows < y1)) | ((y1 <= rows) & (rows < y0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        xc = x0 + (rows - y0) * (x1 - x0) / (y1 - y0)
    xc = np.where(crosses, xc, np.inf)
    xc.sort(axis=1)
    inside = np.zeros((rows.shape[0], cols.shape[1]), dtype=np.bool_)
    for j in range(0, xs.shape[0] - 1, 2):
        a = np.ceil(xc[:, j : j + 1])
        b = np.floor(xc[:, j + 1 : j + 2])
        inside |= (cols >= a) & (cols <= b)

    # boundary pixels the half-open rule misses (local maxima, horizontal edges)
    dx = x1 - x0
    dy = y1 - y0
    tol = 1e-9 * (np.abs(dx) + np.abs(dy) + 1.0)
    for i in range(xs.shape[0]):
        lo_y, hi_y = min(y0[i], y1[i]), max(y0[i], y1[i])
        lo_x, hi_x = min(x0[i], x1[i]), max(x0[i], x1[i])
        if dy[i] == 0.0:
            r = y0[i]
            if r != np.floor(r) or r < r0 or r > r1:
                continue
            sel = (cols[0] >= lo_x) & (cols[0] <= hi_x)
            inside[int(r) - r0, sel] = True
            continue
        rr = np.arange(max(r0, np.ceil(lo_y)), min(r1, np.floor(hi_y)) + 1)
        if rr.size == 0:
            continue
        with np.errstate(over="ignore", invalid="ignore"):
            cc = np.floor(x0[i] + (rr - y0[i]) * dx[i] / dy[i] + 0.5)
            cross = dx[i] * (rr - y0[i]) - dy[i] * (cc - x0[i])
        ok = (np.abs(cross) <= tol[i]) & (cc >= c0) & (cc <= c1)
        inside[(rr[ok] - r0).astype(np.intp), (cc[ok] - c0).astype(np.intp)] = True

    out[r0 : r1 + 1, c0 : c1 + 1] = inside
    return out


def disc_offsets(radius):
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dy * dy + dx * dx <= radius * radius
    return np.stack([dy[keep], dx[keep]], axis=1).astype(np.int64)


def dilate_disc(mask, radius):
    mask = np.asarray(mask, dtype=np.bool_)
    out = mask.copy()
    h, w = mask.shape
    for oy, ox in disc_offsets(radius):
        if abs(oy) >= h or abs(ox) >= w:
            continue
        src = mask[max(0, -oy) : h - max(0, oy), max(0, -ox) : w - max(0, ox)]
        out[max(0, oy) : h - max(0, -oy), max(0, ox) : w - max(0, -ox)] |= src
    return out


def row_extents(mask):
    """Per-row (count, min col, max col, sum of cols); min/max are -1 on empty rows."""
    mask = np.asarray(mask, dtype=np.bool_)
    w = mask.shape[1]
    count = mask.sum(axis=1).astype(np.int64)
    has = count > 0
    cmin = np.where(has, np.argmax(mask, axis=1), -1).astype(np.int64)
    cmax = np.where(has, w - 1 - np.argmax(mask[:, ::-1], axis=1), -1).astype(np.int64)
    csum = (mask.astype(np.int64) @ np.arange(w, dtype=np.int64)).astype(np.int64)
    return count, cmin, cmax, csum
