"""Synthetic scarp scenes with planted elliptical rocks and exact ground truth.

Random draws come from a small fixed generator (SplitMix64 seeding an
xorshift64* stream) so any implementation can reproduce a scene from its seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .detections import InstanceRecord, TileDetections
from .errors import ConfigError, DataError
from .georaster import GeoRaster, GeoTransform, WorldPoint, pixel_to_world
from .masks import SparseMask
from .tiling import Rect, TileGrid

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Rng:
    """xorshift64* seeded by the first non-zero SplitMix64 output of ``seed``."""

    def __init__(self, seed: int):
        s = int(seed) & MASK64
        x = 0
        while x == 0:
            s, x = splitmix64(s)
        self.state = x

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def normal(self) -> float:
        # Box-Muller, cosine branch only; 1 - u keeps the log argument in (0, 1]
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def lognormal(self, mu: float, sigma: float) -> float:
        return math.exp(mu + sigma * self.normal())


@dataclass
class ScarpSpec:
    orientation_deg: float = 0.0  # strike, CCW from east
    drop_m: float = 25.0
    flank_slope_deg: float = 30.0  # slope of the ramp band
    band_width_m: float | None = None  # derived from drop and slope when omitted
    noise_m: float = 0.05

    @property
    def width_m(self) -> float:
        derived = self.drop_m / math.tan(math.radians(self.flank_slope_deg))
        return derived if self.band_width_m is None else float(self.band_width_m)


@dataclass
class RockSpec:
    count: int = 200
    diameter: dict = field(default_factory=lambda: {"mu": 0.0, "sigma": 0.45, "min": 0.2, "max": 3.6})
    eccentricity: dict = field(default_factory=lambda: {"min": 0.6, "max": 0.95})
    orientation: dict = field(default_factory=lambda: {"min": 0.0, "max": 180.0})
    raise_m: dict = field(default_factory=lambda: {"min": 0.2, "max": 1.0})
    gap_px: int = 2
    max_attempts: int = 2000


@dataclass
class SceneSpec:
    width: int = 2500
    height: int = 2500
    res: float = 0.02
    origin: tuple[float, float] = (500000.0, 4100000.0)
    seed: int = 0
    scarp: ScarpSpec = field(default_factory=ScarpSpec)
    rocks: RockSpec = field(default_factory=RockSpec)

    def validate(self) -> None:
        problems = []
        if self.width < 1 or self.height < 1:
            problems.append("width and height must be positive")
        if not self.res > 0:
            problems.append("res must be positive")
        s = self.scarp
        if not 0.0 < s.flank_slope_deg < 90.0:
            problems.append("scarp.flank_slope_deg must lie in (0, 90)")
        if s.drop_m < 0 or s.noise_m < 0:
            problems.append("scarp.drop_m and scarp.noise_m must be non-negative")
        if s.band_width_m is not None:
            if not s.band_width_m > 0:
                problems.append("scarp.band_width_m must be positive")
            else:
                derived = s.drop_m / math.tan(math.radians(s.flank_slope_deg))
                if abs(derived - s.band_width_m) > 0.01 * s.band_width_m:
                    problems.append(f"scarp.band_width_m={s.band_width_m} disagrees with drop/tan(slope)={derived:.4g}")
        r = self.rocks
        if r.count < 0:
            problems.append("rocks.count must be >= 0")
        d = r.diameter
        if not (d["sigma"] >= 0 and 0 < d["min"] <= d["max"]):
            problems.append("rocks.diameter needs sigma >= 0 and 0 < min <= max")
        e = r.eccentricity
        if not 0.0 <= e["min"] <= e["max"] < 1.0:
            problems.append("rocks.eccentricity needs 0 <= min <= max < 1")
        if not r.orientation["min"] <= r.orientation["max"]:
            problems.append("rocks.orientation needs min <= max")
        if not 0 <= r.raise_m["min"] <= r.raise_m["max"]:
            problems.append("rocks.raise_m needs 0 <= min <= max")
        if problems:
            raise ConfigError("invalid scene spec: " + "; ".join(problems))

    @property
    def transform(self) -> GeoTransform:
        return GeoTransform(float(self.origin[0]), float(self.origin[1]), self.res, self.res)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["origin"] = list(self.origin)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SceneSpec":
        doc = dict(doc)
        try:
            scarp = ScarpSpec(**doc.pop("scarp", {}))
            rocks_doc = dict(doc.pop("rocks", {}))
            defaults = RockSpec()
            for key in ("diameter", "eccentricity", "orientation", "raise_m"):
                if key in rocks_doc:
                    merged = dict(getattr(defaults, key))
                    merged.update(rocks_doc[key])
                    rocks_doc[key] = merged
            rocks = RockSpec(**rocks_doc)
            if "origin" in doc:
                doc["origin"] = tuple(float(v) for v in doc["origin"])
            spec = cls(scarp=scarp, rocks=rocks, **doc)
        except TypeError as exc:
            raise ConfigError(f"invalid scene spec: {exc}") from exc
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "SceneSpec":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scene spec {path}: {exc}") from exc
        return cls.from_json(doc)


@dataclass
class TruthRock:
    id: int
    mask: SparseMask
    a_m: float  # semi-axes in meters
    b_m: float
    theta_deg: float  # major axis, CCW from east, [0, 180)
    center_px: tuple[float, float]  # (col, row) in pixel-index coordinates
    centroid_world: WorldPoint
    on_scarp: bool
    raise_m: float

    @property
    def major_axis_m(self) -> float:
        return 2.0 * self.a_m

    @property
    def minor_axis_m(self) -> float:
        return 2.0 * self.b_m

    @property
    def eccentricity(self) -> float:
        return math.sqrt(max(0.0, 1.0 - (self.b_m / self.a_m) ** 2))


@dataclass
class GroundTruth:
    width: int
    height: int
    transform: GeoTransform
    rocks: list[TruthRock]
    scarp_mask: np.ndarray
    strike_deg: float

    def to_json(self) -> dict:
        h, w = self.height, self.width
        sm = SparseMask.from_dense(self.scarp_mask)
        return {
            "raster_size": [h, w],
            "transform": self.transform.to_list(),
            "strike_deg": self.strike_deg,
            "scarp_rle": {"size": [h, w], "counts": sm.to_global_rle(h, w)},
            "rocks": [{
                "id": r.id,
                "a_m": r.a_m,
                "b_m": r.b_m,
                "theta_deg": r.theta_deg,
                "major_axis_m": r.major_axis_m,
                "eccentricity": r.eccentricity,
                "center_px": list(r.center_px),
                "centroid_world": list(r.centroid_world),
                "on_scarp": r.on_scarp,
                "raise_m": r.raise_m,
                "rle": {"size": [h, w], "counts": r.mask.to_global_rle(h, w)},
            } for r in self.rocks],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GroundTruth":
        h, w = doc["raster_size"]
        ox, oy, rx, ry = doc["transform"]
        scarp = SparseMask.from_global_rle(doc["scarp_rle"]["counts"], h, w)
        rocks = [TruthRock(int(r["id"]), SparseMask.from_global_rle(r["rle"]["counts"], h, w),
                           float(r["a_m"]), float(r["b_m"]), float(r["theta_deg"]),
                           tuple(r["center_px"]), WorldPoint(*r["centroid_world"]),
                           bool(r["on_scarp"]), float(r["raise_m"])) for r in doc["rocks"]]
        return cls(w, h, GeoTransform(ox, oy, rx, ry), rocks, scarp.window(Rect(0, 0, w, h)),
                   float(doc["strike_deg"]))


def save_truth(truth: GroundTruth, path) -> None:
    Path(path).write_text(json.dumps(truth.to_json(), separators=(",", ":")) + "\n")


def load_truth(path) -> GroundTruth:
    try:
        return GroundTruth.from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read ground truth {path}: {exc}") from exc


def rasterize_ellipse(cx: float, cy: float, a_px: float, b_px: float, theta_deg: float):
    """Pixels whose index lies inside the ellipse, as ``(mask, x0, y0, q)``.

    ``(cx, cy)`` is in pixel-index coordinates with rows pointing down; the angle
    is measured counter-clockwise from +x with y pointing up. ``q`` is the
    normalised radius squared at each pixel (<= 1 inside).
    """
    r = math.ceil(a_px) + 1
    x0, y0 = math.floor(cx) - r, math.floor(cy) - r
    cols = np.arange(x0, x0 + 2 * r + 2, dtype=np.float64)
    rows = np.arange(y0, y0 + 2 * r + 2, dtype=np.float64)
    dx = cols[None, :] - cx
    dy = -(rows[:, None] - cy)
    t = math.radians(theta_deg)
    ct, st = math.cos(t), math.sin(t)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    q = (u / a_px) ** 2 + (v / b_px) ** 2
    return q <= 1.0, x0, y0, q


def _ramp_distance(spec: SceneSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Signed cross-strike distance (m) from the band centre line through the scene centre."""
    gt = spec.transform
    cxw, cyw = pixel_to_world(gt, (spec.width / 2.0, spec.height / 2.0))
    t = math.radians(spec.scarp.orientation_deg)
    return -(x - cxw) * math.sin(t) + (y - cyw) * math.cos(t)


def generate_scene(spec: SceneSpec) -> tuple[GeoRaster, GeoRaster, GroundTruth]:
    """DEM, 3-band ortho and ground truth for ``spec``; identical seeds give identical scenes."""
    spec.validate()
    rng = Rng(spec.seed)
    h, w, res = spec.height, spec.width, spec.res
    gt = spec.transform
    sc = spec.scarp
    band_w = sc.width_m

    # smooth background relief: three plane waves
    waves = []
    for _ in range(3):
        wavelength = rng.uniform(4.0, 12.0)
        direction = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        waves.append((wavelength, direction, phase))

    cols = np.arange(w, dtype=np.float64) + 0.5
    rows = np.arange(h, dtype=np.float64) + 0.5
    x = gt.origin_x + cols[None, :] * gt.res_x
    y = gt.origin_y - rows[:, None] * gt.res_y
    d = _ramp_distance(spec, x, y)
    dem = sc.drop_m * np.clip((d + band_w / 2.0) / band_w, 0.0, 1.0)
    noise = np.zeros((h, w))
    for wavelength, direction, phase in waves:
        k = 2.0 * math.pi / wavelength
        noise = noise + (sc.noise_m / 3.0) * np.sin(k * (x * math.cos(direction) + y * math.sin(direction)) + phase)
    dem = dem + noise
    scarp_mask = np.abs(d) <= band_w / 2.0

    rs = spec.rocks
    occupied = np.zeros((h, w), dtype=bool)
    tint = np.zeros((h, w), dtype=np.float64)
    gap = max(int(rs.gap_px), 0)
    grow = np.ones((2 * gap + 1, 2 * gap + 1), dtype=bool) if gap else None
    rocks = []
    for rid in range(rs.count):
        dm = rs.diameter
        length = min(max(rng.lognormal(dm["mu"], dm["sigma"]), dm["min"]), dm["max"])
        ecc = rng.uniform(rs.eccentricity["min"], rs.eccentricity["max"])
        theta = rng.uniform(rs.orientation["min"], rs.orientation["max"]) % 180.0
        lift = rng.uniform(rs.raise_m["min"], rs.raise_m["max"])
        shade = rng.uniform(0.0, 1.0)
        a_m = length / 2.0
        b_m = a_m * math.sqrt(1.0 - ecc * ecc)
        a_px, b_px = a_m / res, b_m / res
        placed = None
        for _ in range(rs.max_attempts):
            cx = rng.uniform(0.0, w - 1.0)
            cy = rng.uniform(0.0, h - 1.0)
            inside, x0, y0, q = rasterize_ellipse(cx, cy, a_px, b_px, theta)
            if not inside.any():
                break
            m = SparseMask.from_dense(inside, x0, y0)
            if m.x0 < 1 or m.y0 < 1 or m.x0 + m.w > w - 1 or m.y0 + m.h > h - 1:
                continue
            rr = slice(m.y0 - gap, m.y0 + m.h + gap)
            cc = slice(m.x0 - gap, m.x0 + m.w + gap)
            halo = np.pad(m.crop, gap)
            if grow is not None:
                halo = ndimage.binary_dilation(halo, structure=grow)
            region = occupied[max(rr.start, 0):rr.stop, max(cc.start, 0):cc.stop]
            halo = halo[max(-rr.start, 0):, max(-cc.start, 0):][:region.shape[0], :region.shape[1]]
            if (region & halo).any():
                continue
            placed = (cx, cy, inside, x0, y0, q, m)
            break
        if placed is None:
            raise DataError(f"could not place rock {rid} after {rs.max_attempts} attempts; "
                            "lower rocks.count or enlarge the scene")
        cx, cy, inside, x0, y0, q, m = placed
        occupied[m.y0:m.y0 + m.h, m.x0:m.x0 + m.w] |= m.crop
        qy0, qx0 = m.y0 - y0, m.x0 - x0
        qq = q[qy0:qy0 + m.h, qx0:qx0 + m.w]
        dome = np.where(m.crop, lift * np.sqrt(np.clip(1.0 - qq, 0.0, 1.0)), 0.0)
        dem[m.y0:m.y0 + m.h, m.x0:m.x0 + m.w] += dome
        tint[m.y0:m.y0 + m.h, m.x0:m.x0 + m.w] += np.where(m.crop, 0.35 + 0.5 * shade, 0.0)
        wx, wy = pixel_to_world(gt, (cx + 0.5, cy + 0.5))
        dist = float(_ramp_distance(spec, np.float64(wx), np.float64(wy)))
        rocks.append(TruthRock(rid, m, a_m, b_m, theta, (cx, cy), WorldPoint(float(wx), float(wy)),
                               abs(dist) <= band_w / 2.0, lift))

    dem_r = GeoRaster(dem.astype(np.float32)[None], gt, -9999.0, {"product": "synthetic_dem"})
    base = 0.55 + 0.5 * noise / max(sc.noise_m, 1e-9) * 0.1
    rock_px = tint > 0
    ground = np.stack([base * 190.0, base * 170.0, base * 140.0])
    stone = np.stack([tint * 120.0, tint * 120.0, tint * 125.0])
    ortho = np.where(rock_px[None], stone, ground)
    ortho_r = GeoRaster(np.clip(np.rint(ortho), 0, 255).astype(np.uint8), gt, None,
                        {"product": "synthetic_ortho"})
    truth = GroundTruth(w, h, gt, rocks, scarp_mask, sc.orientation_deg % 180.0)
    return dem_r, ortho_r, truth


def _spans_hit(spans, lo: int, hi: int) -> list[int]:
    return [k for k, (a, b) in enumerate(spans) if a < hi and lo < b]


def oracle_detect(truth: GroundTruth, grid: TileGrid) -> list[TileDetections]:
    """Clip every ground-truth mask to each tile it touches (score 1.0), one entry per tile."""
    if (grid.raster_width, grid.raster_height) != (truth.width, truth.height):
        raise DataError("ground truth and tile grid describe different rasters")
    col_spans = [(grid.tile(c, 0).x0, grid.tile(c, 0).x0 + grid.tile(c, 0).w) for c in range(grid.cols)]
    row_spans = [(grid.tile(0, r).y0, grid.tile(0, r).y0 + grid.tile(0, r).h) for r in range(grid.rows)]
    per_tile: dict[tuple[int, int], list[InstanceRecord]] = {t.key: [] for t in grid.tiles()}
    for rock in truth.rocks:
        rect = rock.mask.rect
        for c in _spans_hit(col_spans, rect.x0, rect.x1):
            for r in _spans_hit(row_spans, rect.y0, rect.y1):
                tile = grid.tile(c, r)
                local = rock.mask.window(tile.rect)
                if local.any():
                    per_tile[tile.key].append(InstanceRecord.from_mask(local, 1.0))
    return [TileDetections(t, per_tile[t.key]) for t in grid.tiles()]


def perturb_detections(dets: list[TileDetections], jitter: int = 0, drop_rate: float = 0.0,
                       seed: int = 0) -> list[TileDetections]:
    """Drop instances i.i.d. and dilate/erode survivors by up to ``jitter`` pixels."""
    if jitter < 0 or not 0.0 <= drop_rate < 1.0:
        raise ValueError("need jitter >= 0 and 0 <= drop_rate < 1")
    rng = Rng(seed)
    # 4-connected steps: each iteration moves the boundary by one pixel along rows or columns
    cross = ndimage.generate_binary_structure(2, 1)
    out = []
    for d in dets:
        kept = []
        for inst in d.instances:
            if rng.uniform() < drop_rate:
                continue
            step = int(rng.uniform() * (2 * jitter + 1)) - jitter if jitter else 0
            mask = inst.mask
            if step > 0:
                mask = ndimage.binary_dilation(mask, structure=cross, iterations=step)
            elif step < 0:
                mask = ndimage.binary_erosion(mask, structure=cross, iterations=-step, border_value=1)
            if not mask.any():
                continue
            if step == 0:
                kept.append(InstanceRecord(inst.bbox, mask.copy(), inst.score))
            else:
                kept.append(InstanceRecord.from_mask(mask, inst.score))
        out.append(TileDetections(d.tile, kept))
    return out
