"""DEM encodings for detector input: colormap elevation and relative elevation.

Colormap elevation maps each elevation through a linear scale into [0, 1] and
then through a piecewise-linear RGB colormap. Relative elevation is the mean of
the three colormap channels; because the colormap is not monotone in any single
channel, the result keeps local relief but discards absolute height.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .georaster import GeoRaster


@dataclass(frozen=True)
class ColormapSpec:
    breakpoints: tuple[tuple[float, tuple[float, float, float]], ...]

    def __post_init__(self):
        ts = [t for t, _ in self.breakpoints]
        if len(ts) < 2 or ts[0] != 0.0 or ts[-1] != 1.0:
            raise ValueError("colormap breakpoints must start at t=0 and end at t=1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("colormap breakpoints must be strictly increasing")
        for _, rgb in self.breakpoints:
            if len(rgb) != 3 or any(not 0.0 <= v <= 1.0 for v in rgb):
                raise ValueError(f"colour {rgb} is not an RGB triple in [0, 1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        knots = np.array([b[0] for b in self.breakpoints])
        colours = np.array([b[1] for b in self.breakpoints])
        return np.stack([np.interp(t, knots, colours[:, k]) for k in range(3)])

    @classmethod
    def load(cls, path) -> "ColormapSpec":
        """Load ``[[t, [r, g, b]], ...]`` from a JSON file."""
        doc = json.loads(Path(path).read_text())
        if isinstance(doc, dict):
            doc = doc["breakpoints"]
        return cls(tuple((float(t), tuple(float(v) for v in rgb)) for t, rgb in doc))


JET = ColormapSpec((
    (0.0, (0.0, 0.0, 0.5)),
    (0.125, (0.0, 0.0, 1.0)),
    (0.375, (0.0, 1.0, 1.0)),
    (0.625, (1.0, 1.0, 0.0)),
    (0.875, (1.0, 0.0, 0.0)),
    (1.0, (0.5, 0.0, 0.0)),
))


@dataclass(frozen=True)
class ElevationScale:
    h_min: float
    h_max: float

    def __post_init__(self):
        if not self.h_max > self.h_min:
            raise ValueError(f"h_max ({self.h_max}) must exceed h_min ({self.h_min})")

    @classmethod
    def from_dem(cls, dem: GeoRaster) -> "ElevationScale":
        vals = dem.band(0)[dem.valid(0)]
        if vals.size == 0:
            raise ValueError("DEM has no valid samples")
        lo, hi = float(vals.min()), float(vals.max())
        if hi <= lo:
            hi = lo + 1.0
        return cls(lo, hi)


def scale_elevation(h, scale: ElevationScale):
    """Clamp ``(h - h_min) / (h_max - h_min)`` into [0, 1]; NaN stays NaN."""
    h = np.asarray(h, dtype=np.float64)
    return np.clip((h - scale.h_min) / (scale.h_max - scale.h_min), 0.0, 1.0)


def colormap_elevation(dem: GeoRaster, scale: ElevationScale | None = None,
                       cmap: ColormapSpec = JET) -> GeoRaster:
    if dem.bands != 1:
        raise ValueError(f"expected a single-band DEM, got {dem.bands} bands")
    if scale is None:
        scale = ElevationScale.from_dem(dem)
    valid = dem.valid(0)
    s = scale_elevation(np.where(valid, dem.band(0), scale.h_min), scale)
    rgb = cmap(s)
    rgb[:, ~valid] = 0.0
    meta = dict(dem.metadata)
    meta.update({"encoding": "colormap", "h_min": repr(scale.h_min), "h_max": repr(scale.h_max),
                 "nodata_pixels": str(int((~valid).sum()))})
    return GeoRaster(rgb.astype(np.float64), dem.transform, None, meta)


def relative_elevation(d_rgb: GeoRaster) -> GeoRaster:
    if d_rgb.bands != 3:
        raise ValueError(f"relative elevation needs 3 bands, got {d_rgb.bands}")
    d = d_rgb.data.astype(np.float64)
    out = (d[0] + d[1] + d[2]) / 3.0
    meta = dict(d_rgb.metadata)
    meta["encoding"] = "relative"
    return GeoRaster(out[np.newaxis], d_rgb.transform, None, meta)


def to_uint8(raster: GeoRaster) -> GeoRaster:
    """Lossy 8-bit export of a [0, 1] encoding."""
    return raster.with_data(np.round(np.clip(raster.data, 0.0, 1.0) * 255.0).astype(np.uint8))
