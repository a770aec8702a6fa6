"""Trait histograms, the along/cross-strike grid, and CSV/GeoJSON exports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .georaster import GeoTransform, pixel_to_world

log = logging.getLogger(__name__)


@dataclass
class TraitHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    name: str = "value"

    @property
    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros(self.counts.shape, dtype=np.float64)
        return self.counts / total


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # [lo, hi) bins, last bin closed, out-of-range values clamped into the end bins
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, edges.size - 2)


def histogram(values, bins: int, range: tuple[float, float], name: str = "value") -> TraitHistogram:
    lo, hi = float(range[0]), float(range[1])
    if bins < 1 or not hi > lo:
        raise ValueError("need bins >= 1 and hi > lo")
    edges = np.linspace(lo, hi, bins + 1)
    v = np.asarray(values, dtype=np.float64).ravel()
    counts = np.bincount(_bin_index(v, edges), minlength=bins) if v.size else np.zeros(bins, np.int64)
    return TraitHistogram(edges, counts.astype(np.int64), name)


def orientation_histogram(orientations, bins: int = 36, name: str = "orientation_deg") -> TraitHistogram:
    """Axial (period 180 deg) histogram over [0, 180)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    v = np.mod(np.asarray(orientations, dtype=np.float64).ravel(), 180.0)
    edges = np.linspace(0.0, 180.0, bins + 1)
    idx = np.minimum((v / 180.0 * bins).astype(np.int64), bins - 1)
    return TraitHistogram(edges, np.bincount(idx, minlength=bins).astype(np.int64), name)


@dataclass
class CrossStrikeGrid:
    n_areas: int
    n_boxes: int
    n_bins: int
    bin_range: tuple[float, float]
    strike_edges: np.ndarray
    cross_edges: np.ndarray
    counts: np.ndarray  # (n_areas, n_boxes)
    hist: np.ndarray  # (n_areas, n_boxes, n_bins)
    mean: np.ndarray  # (n_areas, n_boxes), NaN for empty cells
    assignment: dict[int, tuple[int, int] | None] = field(default_factory=dict)
    out_of_grid: int = 0
    anchor: tuple[float, float] = (0.0, 0.0)
    strike: tuple[float, float] = (1.0, 0.0)
    cross_strike: tuple[float, float] = (0.0, 1.0)
    warnings: list[str] = field(default_factory=list)

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.bin_range[0], self.bin_range[1], self.n_bins + 1)

    def normalized(self) -> np.ndarray:
        out = np.zeros(self.hist.shape, dtype=np.float64)
        nz = self.counts > 0
        out[nz] = self.hist[nz] / self.counts[nz][:, None]
        return out

    def metadata(self) -> dict:
        return {
            "n_areas": self.n_areas,
            "n_boxes": self.n_boxes,
            "n_bins": self.n_bins,
            "bin_range_m": list(self.bin_range),
            "anchor_world": list(self.anchor),
            "strike": list(self.strike),
            "cross_strike": list(self.cross_strike),
            "strike_edges_m": self.strike_edges.tolist(),
            "cross_edges_m": self.cross_edges.tolist(),
            "extent_rule": "equal spans over the projected scarp-mask footprint",
            "rocks_in_grid": int(self.counts.sum()),
            "out_of_grid": self.out_of_grid,
            "warnings": list(self.warnings),
        }


def _scarp_extent(scarp, anchor, strike, cross):
    pts = scarp.contour.astype(np.float64)
    # pixel corners, so every point inside a scarp pixel projects inside the extent
    corners = np.concatenate([pts + [dx, dy] for dx in (0.0, 1.0) for dy in (0.0, 1.0)])
    x, y = pixel_to_world(scarp.transform, (corners[:, 0], corners[:, 1]))
    rel = np.stack([x, y], axis=1) - anchor
    s = rel @ strike
    c = rel @ cross
    return (float(s.min()), float(s.max())), (float(c.min()), float(c.max()))


def build_grid(traits, scarp, n_areas: int = 16, n_boxes: int = 9, n_bins: int = 20,
               bin_range: tuple[float, float] = (0.0, 3.6)) -> CrossStrikeGrid:
    """Bin rocks into ``n_areas`` spans along strike by ``n_boxes`` across it.

    Positions are measured from the fitted skeleton subsection's centroid; the
    spans divide the scarp footprint evenly. Each cell keeps a major-axis-length
    histogram, mean and count.
    """
    if scarp.strike is None:
        raise ValueError("scarp model has no strike direction")
    anchor = np.asarray(scarp.anchor, dtype=np.float64)
    strike = np.asarray(scarp.strike, dtype=np.float64)
    cross = np.asarray(scarp.cross_strike, dtype=np.float64)
    (smin, smax), (cmin, cmax) = _scarp_extent(scarp, anchor, strike, cross)
    warnings = []
    if not smax > smin:
        warnings.append("degenerate along-strike extent; using a single area")
        n_areas = 1
        smax = smin + 1.0
    if not cmax > cmin:
        warnings.append("degenerate cross-strike extent; using a single box")
        n_boxes = 1
        cmax = cmin + 1.0
    for w in warnings:
        log.warning(w)
    s_edges = np.linspace(smin, smax, n_areas + 1)
    c_edges = np.linspace(cmin, cmax, n_boxes + 1)
    l_edges = np.linspace(bin_range[0], bin_range[1], n_bins + 1)

    counts = np.zeros((n_areas, n_boxes), dtype=np.int64)
    hist = np.zeros((n_areas, n_boxes, n_bins), dtype=np.int64)
    values: dict[tuple[int, int], list[float]] = {}
    assignment = {}
    out = 0
    for t in traits:
        rel = np.array([t.centroid_world.x, t.centroid_world.y]) - anchor
        s, c = float(rel @ strike), float(rel @ cross)
        if not (smin <= s <= smax and cmin <= c <= cmax):
            assignment[t.id] = None
            out += 1
            continue
        i = int(_bin_index(np.array([s]), s_edges)[0])
        j = int(_bin_index(np.array([c]), c_edges)[0])
        k = int(_bin_index(np.array([t.major_axis_m]), l_edges)[0])
        counts[i, j] += 1
        hist[i, j, k] += 1
        values.setdefault((i, j), []).append(t.major_axis_m)
        assignment[t.id] = (i, j)
    mean = np.full((n_areas, n_boxes), np.nan)
    for (i, j), vals in values.items():
        mean[i, j] = math.fsum(vals) / len(vals)
    return CrossStrikeGrid(n_areas, n_boxes, n_bins, (float(bin_range[0]), float(bin_range[1])),
                           s_edges, c_edges, counts, hist, mean, assignment, out,
                           (float(anchor[0]), float(anchor[1])),
                           (float(strike[0]), float(strike[1])),
                           (float(cross[0]), float(cross[1])), warnings)


def _writer(path):
    f = open(path, "w", newline="")
    return f, csv.writer(f, lineterminator="\n")


def export_histogram_csv(hist: TraitHistogram, path) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["bin", f"{hist.name}_lo", f"{hist.name}_hi", "count", "fraction"])
        norm = hist.normalized
        for k in range(hist.counts.size):
            w.writerow([k, repr(float(hist.bin_edges[k])), repr(float(hist.bin_edges[k + 1])),
                        int(hist.counts[k]), repr(float(norm[k]))])


def export_grid_csv(grid: CrossStrikeGrid, path) -> None:
    f, w = _writer(path)
    norm = grid.normalized()
    edges = grid.bin_edges
    with f:
        w.writerow(["area", "box", "bin", "strike_lo_m", "strike_hi_m", "cross_lo_m", "cross_hi_m",
                    "major_axis_m_lo", "major_axis_m_hi", "count", "fraction",
                    "cell_count", "cell_mean_major_axis_m"])
        for i in range(grid.counts.shape[0]):
            for j in range(grid.counts.shape[1]):
                m = grid.mean[i, j]
                for k in range(grid.hist.shape[2]):
                    w.writerow([i, j, k,
                                repr(float(grid.strike_edges[i])), repr(float(grid.strike_edges[i + 1])),
                                repr(float(grid.cross_edges[j])), repr(float(grid.cross_edges[j + 1])),
                                repr(float(edges[k])), repr(float(edges[k + 1])),
                                int(grid.hist[i, j, k]), repr(float(norm[i, j, k])),
                                int(grid.counts[i, j]), "" if np.isnan(m) else repr(float(m))])


TRAIT_FIELDS = ["id", "area_px", "area_m2", "major_axis_m", "minor_axis_m", "eccentricity",
                "orientation_deg", "azimuth_deg", "centroid_x", "centroid_y", "score"]


def export_traits_csv(traits, path) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(TRAIT_FIELDS)
        for t in traits:
            row = t.as_row()
            w.writerow([row[k] if isinstance(row[k], int) else repr(float(row[k])) for k in TRAIT_FIELDS])


def contour_to_world(contour: np.ndarray, gt: GeoTransform) -> list[list[float]]:
    """Closed ring of pixel-centre coordinates in world units."""
    x, y = pixel_to_world(gt, (contour[:, 0] + 0.5, contour[:, 1] + 0.5))
    ring = [[float(a), float(b)] for a, b in zip(np.atleast_1d(x), np.atleast_1d(y))]
    if ring and ring[0] != ring[-1]:
        ring.append(ring[0])
    return ring


def rocks_geojson(items, gt: GeoTransform) -> dict:
    """``items`` is an iterable of ``(RockTraits, RefinedMask)`` pairs."""
    features = []
    for traits, refined in items:
        contour = refined.exterior_contour + [refined.x0, refined.y0]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [contour_to_world(contour, gt)]},
            "properties": {
                "id": traits.id,
                "area_m2": traits.area_m2,
                "major_axis_m": traits.major_axis_m,
                "minor_axis_m": traits.minor_axis_m,
                "eccentricity": traits.eccentricity,
                "orientation_deg": traits.orientation_deg,
                "azimuth_deg": traits.azimuth_deg,
                "score": traits.score,
            },
        })
    return {"type": "FeatureCollection", "features": features}


def export_geojson(items, gt: GeoTransform, path) -> None:
    Path(path).write_text(json.dumps(rocks_geojson(items, gt)) + "\n")


def load_traits_csv(path) -> list:
    from .shape import RockTraits
    from .georaster import WorldPoint

    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(TRAIT_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row in reader:
            out.append(RockTraits(
                id=int(row["id"]), area_px=int(row["area_px"]), area_m2=float(row["area_m2"]),
                major_axis_m=float(row["major_axis_m"]), minor_axis_m=float(row["minor_axis_m"]),
                eccentricity=float(row["eccentricity"]), orientation_deg=float(row["orientation_deg"]),
                azimuth_deg=float(row["azimuth_deg"]), centroid_px=(float("nan"), float("nan")),
                centroid_world=WorldPoint(float(row["centroid_x"]), float(row["centroid_y"])),
                score=float(row["score"])))
    return out
