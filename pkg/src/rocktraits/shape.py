"""Mask refinement by border following, and moment-based ellipse traits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import DataError, DegenerateShape
from .georaster import GeoTransform, WorldPoint, pixel_to_world
from .masks import SparseMask

MIN_FIT_AREA = 5
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Contour:
    points: np.ndarray  # (n, 2) as (col, row)
    is_hole: bool
    parent: int


def find_contours(mask) -> list[Contour]:
    """All borders of a binary image (outer and hole), in raster-scan discovery order."""
    img = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8))
    if img.size == 0:
        return []
    rows, cols, offsets, is_hole, parent = kernels.follow_borders(img)
    out = []
    for k in range(is_hole.size):
        s, e = offsets[k], offsets[k + 1]
        pts = np.stack([cols[s:e], rows[s:e]], axis=1)
        out.append(Contour(pts, bool(is_hole[k]), int(parent[k])))
    return out


@dataclass
class RefinedMask:
    filled: np.ndarray
    exterior_contour: np.ndarray
    pixel_area: int
    x0: int = 0
    y0: int = 0


def refine_mask(mask, x0: int = 0, y0: int = 0) -> RefinedMask:
    """Keep the outer border enclosing the most pixels and fill everything inside it."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("cannot refine an empty mask")
    contours = find_contours(mask)
    labels, _ = ndimage.label(mask, structure=_EIGHT)
    best = None
    best_area = -1
    for c in contours:
        if c.is_hole:
            continue
        col, row = c.points[0]
        comp = labels == labels[row, col]
        area = int(ndimage.binary_fill_holes(comp).sum())
        if area > best_area:
            best, best_area = comp, area
    filled = ndimage.binary_fill_holes(best)
    exterior = find_contours(filled)[0].points
    return RefinedMask(filled, exterior, int(filled.sum()), x0, y0)


def pixel_area_to_m2(pixel_area: int, res: float, res_y: float | None = None) -> float:
    if res <= 0 or (res_y is not None and res_y <= 0):
        raise ValueError("resolution must be positive")
    return pixel_area * res * (res if res_y is None else res_y)


@dataclass(frozen=True)
class EllipseFit:
    center: tuple[float, float]  # (col, row)
    a: float
    b: float
    theta: float  # degrees CCW from +x (east), [0, 180)

    @property
    def eccentricity(self) -> float:
        return math.sqrt(max(0.0, 1.0 - (self.b / self.a) ** 2))


def fit_ellipse(refined: RefinedMask, scale_x: float = 1.0, scale_y: float = 1.0) -> EllipseFit:
    """Moment-equivalent ellipse of the filled mask.

    Axes come out in units of ``scale_x``/``scale_y`` per pixel (pixels by
    default). Moments are taken with y pointing up so the angle is counter-
    clockwise from east on a north-up raster.
    """
    if refined.pixel_area < MIN_FIT_AREA:
        raise DegenerateShape(f"{refined.pixel_area} px is below the {MIN_FIT_AREA} px fit floor")
    rr, cc = np.nonzero(refined.filled)
    cx, cy = cc.mean(), rr.mean()
    dx = (cc - cx) * scale_x
    dy = -(rr - cy) * scale_y
    mu20 = float(np.mean(dx * dx))
    mu02 = float(np.mean(dy * dy))
    mu11 = float(np.mean(dx * dy))
    half_tr = 0.5 * (mu20 + mu02)
    disc = math.sqrt(max(0.0, 0.25 * (mu20 - mu02) ** 2 + mu11 * mu11))
    lam1, lam2 = half_tr + disc, half_tr - disc
    if lam2 <= 1e-12 * max(lam1, 1e-300):
        raise DegenerateShape("pixels are collinear; minor axis is zero")
    theta = math.degrees(0.5 * math.atan2(2.0 * mu11, mu20 - mu02)) % 180.0
    return EllipseFit((float(cx + refined.x0), float(cy + refined.y0)),
                      2.0 * math.sqrt(lam1), 2.0 * math.sqrt(lam2), theta)


def major_axis_length(a: float) -> float:
    return 2.0 * a


@dataclass(frozen=True)
class RockTraits:
    id: int
    area_px: int
    area_m2: float
    major_axis_m: float
    minor_axis_m: float
    eccentricity: float
    orientation_deg: float
    azimuth_deg: float
    centroid_px: tuple[float, float]
    centroid_world: WorldPoint
    score: float = 1.0

    def as_row(self) -> dict:
        return {
            "id": self.id,
            "area_px": self.area_px,
            "area_m2": self.area_m2,
            "major_axis_m": self.major_axis_m,
            "minor_axis_m": self.minor_axis_m,
            "eccentricity": self.eccentricity,
            "orientation_deg": self.orientation_deg,
            "azimuth_deg": self.azimuth_deg,
            "centroid_x": float(self.centroid_world.x),
            "centroid_y": float(self.centroid_world.y),
            "score": self.score,
        }


def compute_traits(rock, gt: GeoTransform) -> tuple[RockTraits, RefinedMask]:
    """Refine a registered rock's mask and measure it in world units.

    ``azimuth_deg`` is the same undirected axis measured clockwise from north.
    """
    mask: SparseMask = rock.mask
    refined = refine_mask(mask.crop, mask.x0, mask.y0)
    fit = fit_ellipse(refined, gt.res_x, gt.res_y)
    cx, cy = fit.center
    world = pixel_to_world(gt, (cx + 0.5, cy + 0.5))
    traits = RockTraits(
        id=int(rock.id),
        area_px=refined.pixel_area,
        area_m2=pixel_area_to_m2(refined.pixel_area, gt.res_x, gt.res_y),
        major_axis_m=major_axis_length(fit.a),
        minor_axis_m=major_axis_length(fit.b),
        eccentricity=fit.eccentricity,
        orientation_deg=fit.theta,
        azimuth_deg=(90.0 - fit.theta) % 180.0,
        centroid_px=(cx, cy),
        centroid_world=WorldPoint(float(world.x), float(world.y)),
        score=float(rock.score),
    )
    return traits, refined
