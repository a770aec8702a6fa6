"""numba-compiled kernels. Same contracts as ``_numpy``."""

import numpy as np
from numba import njit

from . import _trace


@njit(cache=True)
def _rle_encode(flat):
    n = flat.size
    out = np.empty(n + 2, dtype=np.int64)
    k = 0
    cur = False
    run = 0
    for i in range(n):
        v = flat[i]
        if v == cur:
            run += 1
        else:
            out[k] = run
            k += 1
            cur = v
            run = 1
    out[k] = run
    k += 1
    return out[:k].copy()


def rle_encode(flat):
    flat = np.ascontiguousarray(np.asarray(flat, dtype=bool).ravel())
    return _rle_encode(flat)


@njit(cache=True)
def _rle_decode(counts, n):
    out = np.zeros(n, dtype=np.bool_)
    pos = 0
    for k in range(counts.size):
        c = counts[k]
        if k % 2 == 1:
            out[pos:pos + c] = True
        pos += c
    return out


def rle_decode(counts, n):
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total != n:
        raise ValueError(f"run lengths sum to {total}, expected {n}")
    return _rle_decode(counts, n)


@njit(cache=True)
def _horn(z, cell_x, cell_y):
    h, w = z.shape
    gx = np.empty((h, w), dtype=np.float64)
    gy = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        r0 = max(r - 1, 0)
        r1 = min(r + 1, h - 1)
        for c in range(w):
            c0 = max(c - 1, 0)
            c1 = min(c + 1, w - 1)
            a = z[r0, c0]
            b = z[r0, c]
            cc = z[r0, c1]
            d = z[r, c0]
            f = z[r, c1]
            g = z[r1, c0]
            hh = z[r1, c]
            i = z[r1, c1]
            gx[r, c] = ((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cell_x)
            gy[r, c] = ((a + 2.0 * b + cc) - (g + 2.0 * hh + i)) / (8.0 * cell_y)
    return gx, gy


def horn_gradients(dem, cell_x, cell_y):
    return _horn(np.ascontiguousarray(dem, dtype=np.float64), float(cell_x), float(cell_y))


def horn_slope(dem, cell_x, cell_y):
    gx, gy = horn_gradients(dem, cell_x, cell_y)
    return np.degrees(np.arctan(np.hypot(gx, gy)))


@njit(cache=True)
def _reflect(idx, n):
    m = idx % (2 * n)
    if m >= n:
        m = 2 * n - 1 - m
    return m


@njit(cache=True)
def _correlate_rows(arr, weights):
    h, w = arr.shape
    r = weights.size // 2
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for k in range(weights.size):
                acc += weights[k] * arr[i, _reflect(j + k - r, w)]
            out[i, j] = acc
    return out


def correlate_axis(arr, weights, axis):
    arr = np.asarray(arr, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if axis == 1:
        return _correlate_rows(np.ascontiguousarray(arr), weights)
    return np.ascontiguousarray(_correlate_rows(np.ascontiguousarray(arr.T), weights).T)


@njit(cache=True)
def _zs_delete(img, r, c, step):
    p2 = img[r - 1, c]
    p3 = img[r - 1, c + 1]
    p4 = img[r, c + 1]
    p5 = img[r + 1, c + 1]
    p6 = img[r + 1, c]
    p7 = img[r + 1, c - 1]
    p8 = img[r, c - 1]
    p9 = img[r - 1, c - 1]
    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    if b < 2 or b > 6:
        return False
    a = 0
    if p2 == 0 and p3 == 1:
        a += 1
    if p3 == 0 and p4 == 1:
        a += 1
    if p4 == 0 and p5 == 1:
        a += 1
    if p5 == 0 and p6 == 1:
        a += 1
    if p6 == 0 and p7 == 1:
        a += 1
    if p7 == 0 and p8 == 1:
        a += 1
    if p8 == 0 and p9 == 1:
        a += 1
    if p9 == 0 and p2 == 1:
        a += 1
    if a != 1:
        return False
    if step == 0:
        return p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
    return p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0


@njit(cache=True)
def _zhang_suen(img):
    # Only pixels with a background 4-neighbour can satisfy either sub-iteration's
    # deletion test, so the scan is restricted to a maintained border list.
    h, w = img.shape
    stamp = np.zeros((h, w), dtype=np.int64)
    cand = np.empty(h * w, dtype=np.int64)
    nc = 0
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            if img[r, c] == 1 and (img[r - 1, c] == 0 or img[r + 1, c] == 0
                                   or img[r, c - 1] == 0 or img[r, c + 1] == 0):
                cand[nc] = r * w + c
                stamp[r, c] = 1
                nc += 1
    dele = np.empty(h * w, dtype=np.int64)
    nxt = np.empty(h * w, dtype=np.int64)
    gen = 1
    idle = 0
    step = 0
    while idle < 2:
        nd = 0
        for k in range(nc):
            p = cand[k]
            r = p // w
            c = p % w
            if img[r, c] == 1 and _zs_delete(img, r, c, step):
                dele[nd] = p
                nd += 1
        if nd == 0:
            idle += 1
        else:
            idle = 0
            gen += 1
            for k in range(nd):
                p = dele[k]
                img[p // w, p % w] = 0
            nn = 0
            for k in range(nc):
                p = cand[k]
                r = p // w
                c = p % w
                if img[r, c] == 1 and stamp[r, c] != gen:
                    stamp[r, c] = gen
                    nxt[nn] = p
                    nn += 1
            for k in range(nd):
                p = dele[k]
                r = p // w
                c = p % w
                for dr in range(-1, 2):
                    for dc in range(-1, 2):
                        rr = r + dr
                        cc = c + dc
                        if img[rr, cc] == 1 and stamp[rr, cc] != gen:
                            stamp[rr, cc] = gen
                            nxt[nn] = rr * w + cc
                            nn += 1
            cand, nxt = nxt, cand
            nc = nn
        step = 1 - step
    return img


def zhang_suen(mask):
    img = np.pad(np.asarray(mask, dtype=bool).astype(np.int64), 1)
    return _zhang_suen(img)[1:-1, 1:-1].astype(bool)


follow_borders = _trace.build(njit)
