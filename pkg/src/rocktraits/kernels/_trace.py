"""Suzuki-Abe border following, written in the numba-compatible subset of Python.

The same source is executed interpreted (numpy backend) or compiled (numba backend).
"""

import numpy as np

# 8-neighbourhood, clockwise on screen (row axis points down), starting east.
_DR = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
_DC = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)


def build(jit):
    """Return ``follow_borders`` with every helper wrapped by ``jit``."""

    @jit
    def _direction(dr, dc):
        for k in range(8):
            if _DR[k] == dr and _DC[k] == dc:
                return k
        return -1

    @jit
    def _grow(buf, n):
        out = np.empty(buf.shape[0] * 2, dtype=buf.dtype)
        out[:n] = buf[:n]
        return out

    @jit
    def follow_borders(img):
        """Trace every border of a binary image.

        Returns ``(rows, cols, offsets, is_hole, parent)``. Border ``k`` owns points
        ``offsets[k]:offsets[k + 1]``; ``parent[k]`` is the index of the enclosing
        border or -1 for borders whose parent is the image frame.
        """
        h, w = img.shape
        f = np.zeros((h + 2, w + 2), dtype=np.int32)
        for r in range(h):
            for c in range(w):
                if img[r, c] != 0:
                    f[r + 1, c + 1] = 1

        cap = 64
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        npts = 0
        bcap = 16
        # index 0 unused, index 1 is the frame (a hole border)
        b_hole = np.zeros(bcap, dtype=np.bool_)
        b_parent = np.zeros(bcap, dtype=np.int64)
        b_start = np.zeros(bcap, dtype=np.int64)
        b_hole[1] = True
        b_parent[1] = 0
        nbd = 1

        for i in range(1, h + 1):
            lnbd = 1
            for j in range(1, w + 1):
                fij = f[i, j]
                if fij == 0:
                    continue
                start = False
                hole = False
                i2 = i
                j2 = j
                if fij == 1 and f[i, j - 1] == 0:
                    start = True
                    j2 = j - 1
                elif fij >= 1 and f[i, j + 1] == 0:
                    start = True
                    hole = True
                    j2 = j + 1
                    if fij > 1:
                        lnbd = fij
                if start:
                    nbd += 1
                    if nbd >= bcap:
                        b_hole = _grow(b_hole, bcap)
                        b_parent = _grow(b_parent, bcap)
                        b_start = _grow(b_start, bcap)
                        bcap *= 2
                    b_hole[nbd] = hole
                    if hole == b_hole[lnbd]:
                        b_parent[nbd] = b_parent[lnbd]
                    else:
                        b_parent[nbd] = lnbd
                    b_start[nbd] = npts

                    d0 = _direction(i2 - i, j2 - j)
                    found = -1
                    for k in range(8):
                        d = (d0 + k) % 8
                        if f[i + _DR[d], j + _DC[d]] != 0:
                            found = d
                            break
                    if found < 0:
                        f[i, j] = -nbd
                        if npts >= cap:
                            rows = _grow(rows, cap)
                            cols = _grow(cols, cap)
                            cap *= 2
                        rows[npts] = i - 1
                        cols[npts] = j - 1
                        npts += 1
                    else:
                        i1 = i + _DR[found]
                        j1 = j + _DC[found]
                        i2 = i1
                        j2 = j1
                        i3 = i
                        j3 = j
                        while True:
                            d = _direction(i2 - i3, j2 - j3)
                            east_zero = False
                            i4 = i3
                            j4 = j3
                            for k in range(1, 9):
                                dd = (d - k) % 8
                                r = i3 + _DR[dd]
                                c = j3 + _DC[dd]
                                if f[r, c] != 0:
                                    i4 = r
                                    j4 = c
                                    break
                                if dd == 0:
                                    east_zero = True
                            if east_zero:
                                f[i3, j3] = -nbd
                            elif f[i3, j3] == 1:
                                f[i3, j3] = nbd
                            if npts >= cap:
                                rows = _grow(rows, cap)
                                cols = _grow(cols, cap)
                                cap *= 2
                            rows[npts] = i3 - 1
                            cols[npts] = j3 - 1
                            npts += 1
                            if i4 == i and j4 == j and i3 == i1 and j3 == j1:
                                break
                            i2 = i3
                            j2 = j3
                            i3 = i4
                            j3 = j4
                if f[i, j] != 1:
                    lnbd = abs(f[i, j])

        nb = nbd - 1
        offsets = np.empty(nb + 1, dtype=np.int64)
        is_hole = np.empty(nb, dtype=np.bool_)
        parent = np.empty(nb, dtype=np.int64)
        for k in range(nb):
            offsets[k] = b_start[k + 2]
            is_hole[k] = b_hole[k + 2]
            # border numbers start at 2; the frame maps to -1
            parent[k] = b_parent[k + 2] - 2 if b_parent[k + 2] >= 2 else -1
        offsets[nb] = npts
        return rows[:npts].copy(), cols[:npts].copy(), offsets, is_hole, parent

    return follow_borders
