"""Pure-numpy kernels. Used when numba is unavailable or disabled."""

import numpy as np

from . import _trace


def rle_encode(flat):
    flat = np.asarray(flat, dtype=bool).ravel()
    n = flat.size
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    counts = np.diff(bounds).astype(np.int64)
    if flat[0]:
        counts = np.concatenate((np.zeros(1, dtype=np.int64), counts))
    return counts


def rle_decode(counts, n):
    counts = np.asarray(counts, dtype=np.int64)
    values = (np.arange(counts.size) % 2).astype(bool)
    out = np.repeat(values, counts)
    if out.size != n:
        raise ValueError(f"run lengths sum to {out.size}, expected {n}")
    return out


def horn_gradients(dem, cell_x, cell_y):
    z = np.pad(np.asarray(dem, dtype=np.float64), 1, mode="edge")
    a, b, c = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    d, f = z[1:-1, :-2], z[1:-1, 2:]
    g, h, i = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]
    gx = ((c + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cell_x)
    # rows grow southwards; positive gy points north
    gy = ((a + 2.0 * b + c) - (g + 2.0 * h + i)) / (8.0 * cell_y)
    return gx, gy


def horn_slope(dem, cell_x, cell_y):
    gx, gy = horn_gradients(dem, cell_x, cell_y)
    return np.degrees(np.arctan(np.hypot(gx, gy)))


def correlate_axis(arr, weights, axis):
    """Correlate ``arr`` with symmetric ``weights`` along ``axis`` (half-sample reflect)."""
    arr = np.asarray(arr, dtype=np.float64)
    r = weights.size // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    p = np.pad(arr, pad, mode="symmetric")
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    for k, wk in enumerate(weights):
        out += wk * np.take(p, np.arange(k, k + n), axis=axis)
    return out


def _neighbours(img):
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    return p2, p3, p4, p5, p6, p7, p8, p9


def zhang_suen(mask):
    mask = np.asarray(mask, dtype=bool)
    img = np.pad(mask.astype(np.uint8), 1)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = _neighbours(img)
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            a = sum((ring[k] == 0) & (ring[k + 1] == 1) for k in range(8))
            if step == 0:
                c1 = (p2 * p4 * p6) == 0
                c2 = (p4 * p6 * p8) == 0
            else:
                c1 = (p2 * p4 * p8) == 0
                c2 = (p2 * p6 * p8) == 0
            rm = (img[1:-1, 1:-1] == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            if rm.any():
                img[1:-1, 1:-1][rm] = 0
                changed = True
    return img[1:-1, 1:-1].astype(bool)


follow_borders = _trace.build(lambda fn: fn)
