"""Binary masks: row-major run-length coding and a bbox-cropped sparse mask.

RLE counts alternate background and foreground runs and always start with a
background run (possibly of length 0). The canonical form has no zero-length
runs other than that leading one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .tiling import Rect


def encode_rle(mask) -> list[int]:
    return kernels.rle_encode(np.asarray(mask, dtype=bool)).tolist()


def decode_rle(counts, height: int, width: int) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or (counts < 0).any():
        raise ValueError("RLE counts must be a flat list of non-negative integers")
    return kernels.rle_decode(counts, height * width).reshape(height, width)


@dataclass
class SparseMask:
    """Foreground pixels of one object, stored as a crop at ``(x0, y0)``.

    Coordinates are global pixel indices of the parent raster; ``crop`` is a
    boolean array whose shape defines the bbox.
    """

    x0: int
    y0: int
    crop: np.ndarray

    def __post_init__(self):
        self.crop = np.asarray(self.crop, dtype=bool)

    @classmethod
    def from_dense(cls, mask, x0: int = 0, y0: int = 0) -> "SparseMask":
        """Crop a dense mask (placed at ``x0, y0``) to its foreground bbox."""
        mask = np.asarray(mask, dtype=bool)
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            return cls(x0, y0, np.zeros((0, 0), dtype=bool))
        r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
        return cls(x0 + int(c0), y0 + int(r0), mask[r0:r1, c0:c1].copy())

    @property
    def h(self) -> int:
        return self.crop.shape[0]

    @property
    def w(self) -> int:
        return self.crop.shape[1]

    @property
    def rect(self) -> Rect:
        return Rect(self.x0, self.y0, self.x0 + self.w, self.y0 + self.h)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.w, self.h)

    @property
    def area(self) -> int:
        return int(self.crop.sum())

    def translated(self, dx: int, dy: int) -> "SparseMask":
        return SparseMask(self.x0 + dx, self.y0 + dy, self.crop)

    def window(self, rect: Rect) -> np.ndarray:
        """Dense view of this mask over ``rect`` (zeros outside the crop)."""
        out = np.zeros((rect.y1 - rect.y0, rect.x1 - rect.x0), dtype=bool)
        inter = self.rect.intersect(rect)
        if not inter.empty:
            out[inter.y0 - rect.y0:inter.y1 - rect.y0, inter.x0 - rect.x0:inter.x1 - rect.x0] = \
                self.crop[inter.y0 - self.y0:inter.y1 - self.y0, inter.x0 - self.x0:inter.x1 - self.x0]
        return out

    def count_in(self, rect: Rect) -> int:
        inter = self.rect.intersect(rect)
        if inter.empty:
            return 0
        return int(self.crop[inter.y0 - self.y0:inter.y1 - self.y0,
                             inter.x0 - self.x0:inter.x1 - self.x0].sum())

    def intersection(self, other: "SparseMask") -> int:
        inter = self.rect.intersect(other.rect)
        if inter.empty:
            return 0
        return int((self.window(inter) & other.window(inter)).sum())

    def union(self, other: "SparseMask") -> "SparseMask":
        if self.crop.size == 0:
            return SparseMask(other.x0, other.y0, other.crop.copy())
        if other.crop.size == 0:
            return SparseMask(self.x0, self.y0, self.crop.copy())
        a, b = self.rect, other.rect
        hull = Rect(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))
        return SparseMask(hull.x0, hull.y0, self.window(hull) | other.window(hull))

    def centroid(self) -> tuple[float, float]:
        """Mean (col, row) of foreground pixel indices."""
        rr, cc = np.nonzero(self.crop)
        return float(cc.mean() + self.x0), float(rr.mean() + self.y0)

    def to_global_rle(self, height: int, width: int) -> list[int]:
        """Row-major RLE over a ``height x width`` canvas without densifying it."""
        if self.area == 0:
            return [height * width]
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.w > width or self.y0 + self.h > height:
            raise ValueError("mask extends beyond the canvas")
        padded = np.pad(self.crop.astype(np.int8), ((0, 0), (1, 1)))
        d = np.diff(padded, axis=1)
        sr, sc = np.nonzero(d == 1)
        er, ec = np.nonzero(d == -1)
        starts = (sr + self.y0) * width + sc + self.x0
        ends = (er + self.y0) * width + ec + self.x0
        # runs ending at the right edge continue on the next row when the next row
        # starts at column 0; merge those to keep the canonical form
        keep_start = np.ones(starts.size, dtype=bool)
        keep_end = np.ones(ends.size, dtype=bool)
        touching = np.flatnonzero(ends[:-1] == starts[1:])
        keep_end[touching] = False
        keep_start[touching + 1] = False
        starts, ends = starts[keep_start], ends[keep_end]
        bounds = np.empty(starts.size * 2 + 2, dtype=np.int64)
        bounds[0] = 0
        bounds[1:-1:2] = starts
        bounds[2:-1:2] = ends
        bounds[-1] = height * width
        counts = np.diff(bounds)
        if counts[-1] == 0:
            counts = counts[:-1]
        return counts.tolist()

    @classmethod
    def from_global_rle(cls, counts, height: int, width: int) -> "SparseMask":
        counts = np.asarray(counts, dtype=np.int64)
        if int(counts.sum()) != height * width:
            raise ValueError(f"RLE sums to {int(counts.sum())}, expected {height * width}")
        bounds = np.concatenate(([0], np.cumsum(counts)))
        starts = bounds[1:-1:2]
        ends = bounds[2::2]
        keep = ends > starts
        starts, ends = starts[keep], ends[keep]
        if starts.size == 0:
            return cls(0, 0, np.zeros((0, 0), dtype=bool))
        # split runs at row boundaries
        rows_s = starts // width
        rows_e = (ends - 1) // width
        pieces = []
        for s, e, r0, r1 in zip(starts, ends, rows_s, rows_e):
            for r in range(r0, r1 + 1):
                a = max(s, r * width)
                b = min(e, (r + 1) * width)
                pieces.append((r, a - r * width, b - r * width))
        pr = np.array([p[0] for p in pieces])
        pa = np.array([p[1] for p in pieces])
        pb = np.array([p[2] for p in pieces])
        y0, y1 = int(pr.min()), int(pr.max()) + 1
        x0, x1 = int(pa.min()), int(pb.max())
        crop = np.zeros((y1 - y0, x1 - x0), dtype=bool)
        for r, a, b in zip(pr, pa, pb):
            crop[r - y0, a - x0:b - x0] = True
        return cls(x0, y0, crop)
