"""Fault-scarp extraction from a DEM and strike estimation from its skeleton."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import kernels
from .errors import DataError, EmptyScarp
from .georaster import GeoRaster, GeoTransform, pixel_to_world
from .shape import find_contours


@dataclass(frozen=True)
class ScarpParams:
    sigma: float = 5.0
    slope_threshold: float = 15.0
    morph_radius: int = 5
    subsection: float = 0.5


@dataclass
class ScarpModel:
    mask: np.ndarray
    contour: np.ndarray  # (n, 2) pixel (col, row)
    transform: GeoTransform
    skeleton: np.ndarray | None = None
    path: np.ndarray | None = None  # ordered skeleton pixels (col, row)
    strike: np.ndarray | None = None  # world unit vector (east, north)
    cross_strike: np.ndarray | None = None
    anchor: np.ndarray | None = None  # world (x, y) of the fitted subsection centroid
    params: dict = field(default_factory=dict)

    @property
    def strike_deg(self) -> float:
        """Strike direction, degrees CCW from east in [0, 180)."""
        return math.degrees(math.atan2(self.strike[1], self.strike[0])) % 180.0


def horn_slope(dem: GeoRaster, cell: float | None = None) -> GeoRaster:
    """Slope in degrees from Horn's 3x3 weighted differences; edges replicate."""
    if dem.bands != 1:
        raise ValueError("horn_slope expects a single-band DEM")
    cx = cy = cell
    if cell is None:
        cx, cy = dem.transform.res_x, dem.transform.res_y
    if not (cx > 0 and cy > 0):
        raise ValueError("cell size must be positive")
    z = np.where(dem.valid(0), dem.band(0).astype(np.float64), np.nan)
    slope = kernels.horn_slope(z, cx, cy)
    # Horn skips the centre sample, so mask nodata pixels explicitly
    slope[np.isnan(z)] = np.nan
    return GeoRaster(slope, dem.transform, float("nan"), {"product": "slope_deg"})


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    r = int(math.ceil(3.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_smooth(raster, sigma: float):
    """Separable Gaussian (radius ceil(3 sigma), sum 1, half-sample reflect)."""
    w = gaussian_kernel(sigma)
    if isinstance(raster, GeoRaster):
        bands = [kernels.correlate_axis(kernels.correlate_axis(b, w, 1), w, 0) for b in raster.data]
        return raster.with_data(np.stack(bands))
    arr = np.asarray(raster, dtype=np.float64)
    return kernels.correlate_axis(kernels.correlate_axis(arr, w, 1), w, 0)


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def _morph(mask: np.ndarray, radius: int, op) -> np.ndarray:
    if radius <= 0:
        return mask
    padded = np.pad(mask, radius, mode="edge")
    return op(padded, structure=_square(radius))[radius:-radius, radius:-radius]


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def extract_scarp(slope: GeoRaster, slope_threshold: float = 15.0, morph_radius: int = 5) -> ScarpModel:
    """Threshold, open, close, keep the largest 8-component and fill its holes."""
    if not 0.0 < slope_threshold < 90.0:
        raise ValueError("slope threshold must lie in (0, 90) degrees")
    s = slope.band(0)
    mask = np.nan_to_num(s, nan=-1.0) >= slope_threshold
    if not mask.any():
        raise EmptyScarp(f"no pixel reaches {slope_threshold} degrees")
    mask = _morph(mask, morph_radius, ndimage.binary_opening)
    mask = _morph(mask, morph_radius, ndimage.binary_closing)
    mask = largest_component(mask)
    if not mask.any():
        raise EmptyScarp("scarp vanished under morphological opening")
    mask = ndimage.binary_fill_holes(mask)
    contour = find_contours(mask)[0].points
    return ScarpModel(mask, contour, slope.transform,
                      params={"slope_threshold": slope_threshold, "morph_radius": morph_radius})


def skeletonize(mask) -> np.ndarray:
    """Zhang-Suen thinning.

    A component that thinning would erase entirely (a 2x2 block, say) keeps the
    pixel nearest its centroid so the skeleton never loses a component.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("cannot skeletonize an empty mask")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    crop = mask[r0:r1, c0:c1]
    thin = kernels.zhang_suen(crop)
    labels, n = ndimage.label(crop, structure=np.ones((3, 3), dtype=bool))
    if n:
        hit = np.zeros(n + 1, dtype=bool)
        hit[labels[thin]] = True
        for k in range(1, n + 1):
            if not hit[k]:
                rr, cc = np.nonzero(labels == k)
                i = int(np.argmin((rr - rr.mean()) ** 2 + (cc - cc.mean()) ** 2))
                thin[rr[i], cc[i]] = True
    out = np.zeros_like(mask)
    out[r0:r1, c0:c1] = thin
    return out


def skeleton_path(skeleton) -> np.ndarray:
    """Longest geodesic path through the largest skeleton component, as (col, row)."""
    skel = largest_component(np.asarray(skeleton, dtype=bool))
    rr, cc = np.nonzero(skel)
    n = rr.size
    if n == 0:
        raise DataError("empty skeleton")
    if n == 1:
        return np.array([[cc[0], rr[0]]])
    idx = -np.ones(skel.shape, dtype=np.int64)
    idx[rr, cc] = np.arange(n)
    src, dst, wts = [], [], []
    h, w = skel.shape
    for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
        r2, c2 = rr + dr, cc + dc
        ok = (r2 >= 0) & (r2 < h) & (c2 >= 0) & (c2 < w)
        j = np.full(n, -1)
        j[ok] = idx[r2[ok], c2[ok]]
        ok = j >= 0
        src.append(np.arange(n)[ok])
        dst.append(j[ok])
        wts.append(np.full(ok.sum(), math.sqrt(2.0) if dr and dc else 1.0))
    g = coo_matrix((np.concatenate(wts), (np.concatenate(src), np.concatenate(dst))), shape=(n, n)).tocsr()
    d0 = dijkstra(g, directed=False, indices=0)
    a = int(np.argmax(d0))
    da, pred = dijkstra(g, directed=False, indices=a, return_predecessors=True)
    b = int(np.argmax(da))
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    path = np.array(path[::-1])
    return np.stack([cc[path], rr[path]], axis=1)


def _window(subsection) -> tuple[float, float]:
    if np.isscalar(subsection):
        f = float(subsection)
        if not 0.0 < f <= 1.0:
            raise ValueError("subsection fraction must lie in (0, 1]")
        return 0.5 - f / 2.0, 0.5 + f / 2.0
    lo, hi = subsection
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("subsection window must satisfy 0 <= lo < hi <= 1")
    return float(lo), float(hi)


def strike_line(points, subsection=1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total-least-squares line through an arc-length window of ordered points.

    Returns ``(strike, cross_strike, centroid)``. The strike is signed to point
    east (or north when exactly vertical); cross-strike is strike rotated +90 deg.
    """
    pts = np.asarray(points, dtype=np.float64)
    lo, hi = _window(subsection)
    if pts.shape[0] > 1:
        seg = np.hypot(*np.diff(pts, axis=0).T)
        arc = np.concatenate(([0.0], np.cumsum(seg)))
        total = arc[-1]
        sel = (arc >= lo * total - 1e-9) & (arc <= hi * total + 1e-9)
        sub = pts[sel]
    else:
        sub = pts
    if sub.shape[0] < 2:
        sub = pts
    centroid = sub.mean(axis=0)
    centred = sub - centroid
    if not np.any(np.abs(centred) > 0):
        raise DataError("strike line is degenerate: all points coincide")
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    d = vt[0] / np.linalg.norm(vt[0])
    if d[0] < 0 or (d[0] == 0 and d[1] < 0):
        d = -d
    return d, np.array([-d[1], d[0]]), centroid


def path_to_world(path: np.ndarray, gt: GeoTransform) -> np.ndarray:
    x, y = pixel_to_world(gt, (path[:, 0] + 0.5, path[:, 1] + 0.5))
    return np.stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)], axis=1)


def scarp_from_dem(dem: GeoRaster, params: ScarpParams = ScarpParams()) -> ScarpModel:
    """Slope, smoothing, thresholding, morphology, skeleton and strike in one call."""
    slope = horn_slope(dem)
    smooth = gaussian_smooth(slope, params.sigma)
    model = extract_scarp(smooth, params.slope_threshold, params.morph_radius)
    model.skeleton = skeletonize(model.mask)
    model.path = skeleton_path(model.skeleton)
    world = path_to_world(model.path, dem.transform)
    model.strike, model.cross_strike, model.anchor = strike_line(world, params.subsection)
    model.params = {"sigma": params.sigma, "slope_threshold": params.slope_threshold,
                    "morph_radius": params.morph_radius, "subsection": params.subsection}
    return model


def centroid_inside(mask: np.ndarray, col: float, row: float) -> bool:
    r, c = int(math.floor(row + 0.5)), int(math.floor(col + 0.5))
    return 0 <= r < mask.shape[0] and 0 <= c < mask.shape[1] and bool(mask[r, c])


def filter_rocks(registry, scarp: ScarpModel):
    """Keep rocks whose mask centroid falls on a scarp pixel."""
    keep = [rock.id for rock in registry if centroid_inside(scarp.mask, *rock.mask.centroid())]
    return registry.subset(keep)
