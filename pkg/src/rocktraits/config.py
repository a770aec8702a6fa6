"""Flat ``section.key = value`` pipeline configuration.

Blank lines and ``#`` comments are ignored. Every key has a documented default;
unknown keys and out-of-range values are errors so a typo never silently falls
back to a default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _path(text: str) -> str | None:
    return text.strip() or None


# key -> (parser, default, check, description)
SCHEMA: dict[str, tuple] = {
    "paths.ortho": (_path, None, None, "orthomosaic GeoTIFF"),
    "paths.dem": (_path, None, None, "DEM GeoTIFF on the same grid as the ortho"),
    "paths.detections": (_path, None, None, "directory of per-tile detection JSON files"),
    "paths.output": (_path, None, None, "output directory"),
    "tiling.tile_size": (int, 400, lambda v: v > 0, "tile edge in pixels"),
    "tiling.overlap": (int, 10, lambda v: v >= 0, "shared band width in pixels"),
    "tiling.write_tiles": (_bool, False, None, "write per-tile GeoTIFFs during split"),
    "encoding.mode": (str, "none", lambda v: v in ("none", "colormap", "relative"), "DEM encoding"),
    "encoding.h_min": (_optional_float, None, None, "scale window low end (auto = data min)"),
    "encoding.h_max": (_optional_float, None, None, "scale window high end (auto = data max)"),
    "encoding.cmap": (str, "jet", None, "'jet' or a colormap JSON path"),
    "registration.threshold": (float, 0.5, lambda v: 0.0 < v <= 1.0, "merge overlap ratio"),
    "registration.score_floor": (float, 0.0, lambda v: 0.0 <= v <= 1.0, "drop instances below this score"),
    "scarp.sigma": (float, 5.0, lambda v: v > 0, "Gaussian sigma in pixels"),
    "scarp.slope_threshold": (float, 15.0, lambda v: 0.0 < v < 90.0, "degrees"),
    "scarp.morph_radius": (int, 5, lambda v: v >= 0, "opening/closing radius in pixels"),
    "scarp.subsection": (float, 0.5, lambda v: 0.0 < v <= 1.0, "central skeleton fraction for strike"),
    "grid.n_areas": (int, 16, lambda v: v >= 1, "spans along strike"),
    "grid.n_boxes": (int, 9, lambda v: v >= 1, "spans across strike"),
    "grid.n_bins": (int, 20, lambda v: v >= 1, "diameter bins per cell"),
    "grid.range_min": (float, 0.0, None, "diameter histogram low edge (m)"),
    "grid.range_max": (float, 3.6, None, "diameter histogram high edge (m)"),
    "stats.area_bins": (int, 50, lambda v: v >= 1, "area histogram bins over (0, max area)"),
    "stats.eccentricity_bins": (int, 20, lambda v: v >= 1, "eccentricity bins over (0, 1)"),
    "stats.length_bins": (int, 20, lambda v: v >= 1, "major-axis bins"),
    "stats.length_max": (float, 3.6, lambda v: v > 0, "major-axis histogram high edge (m)"),
    "stats.orientation_bins": (int, 36, lambda v: v >= 1, "orientation bins over [0, 180)"),
    "eval.iou_thresholds": (_floats, tuple(round(0.5 + 0.05 * k, 2) for k in range(10)),
                            lambda v: len(v) > 0 and all(0.0 < t <= 1.0 for t in v), "IoU sweep"),
    "eval.large_area": (float, float(96 ** 2), lambda v: v >= 0, "large-object mask area (px)"),
    "eval.max_dets": (int, 100, lambda v: v >= 1, "detections per image for AR"),
    "run.threads": (int, 1, lambda v: v >= 1, "worker cap"),
}


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class PipelineConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def defaults(cls) -> "PipelineConfig":
        return cls({k: spec[1] for k, spec in SCHEMA.items()})

    def update(self, overrides: dict) -> "PipelineConfig":
        out = dict(self.values)
        for key, raw in overrides.items():
            out[key] = _parse_value(key, raw, "<override>") if isinstance(raw, str) else raw
        cfg = PipelineConfig(out)
        cfg.check()
        return cfg

    def check(self) -> None:
        for key, value in self.values.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            check = SCHEMA[key][2]
            if value is not None and check is not None and not check(value):
                raise ConfigError(f"{key} = {_render(value)} is out of range ({SCHEMA[key][3]})")
        if self["tiling.tile_size"] <= 2 * self["tiling.overlap"]:
            raise ConfigError("tiling.tile_size must exceed twice tiling.overlap")
        if not self["grid.range_max"] > self["grid.range_min"]:
            raise ConfigError("grid.range_max must exceed grid.range_min")
        lo, hi = self["encoding.h_min"], self["encoding.h_max"]
        if (lo is None) != (hi is None):
            raise ConfigError("set both encoding.h_min and encoding.h_max, or neither")
        if lo is not None and not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ConfigError("encoding.h_max must exceed encoding.h_min")

    def require_paths(self, *keys: str) -> None:
        missing = [k for k in keys if not self[k]]
        if missing:
            raise ConfigError("missing required config: " + ", ".join(missing))

    def to_text(self) -> str:
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in SCHEMA)

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in
                ((k, self.values[k]) for k in SCHEMA)}

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        cfg = cls.defaults()
        vals = dict(cfg.values)
        for k, v in doc.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown config key {k!r}")
            vals[k] = tuple(v) if isinstance(v, list) else v
        cfg = cls(vals)
        cfg.check()
        return cfg


def _parse_value(key: str, raw: str, where: str):
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown config key {key!r}")
    try:
        return SCHEMA[key][0](raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    values = PipelineConfig.defaults().values
    seen = set()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        seen.add(key)
        values[key] = _parse_value(key, raw, f"{source}:{n}")
    cfg = PipelineConfig(values)
    cfg.check()
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, str(path))
    base = Path(path).resolve().parent
    for key in ("paths.ortho", "paths.dem", "paths.detections", "paths.output"):
        if cfg[key] and not Path(cfg[key]).is_absolute():
            cfg.values[key] = str(base / cfg[key])
    return cfg
