"""End-to-end run: split, encode, ingest, register, scarp, traits, stats.

Each stage is also callable on its own (the CLI subcommands use them). A run
writes ``run_manifest.json`` holding the full configuration and a SHA-256 of
every input, which is enough to replay it; a failed run leaves a ``PARTIAL``
marker naming the stage that broke.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .detections import detection_files, load_detection_dir
from .encode import JET, ColormapSpec, ElevationScale, colormap_elevation, relative_elevation
from .errors import ConfigError, DataError, DegenerateShape, RockTraitsError, StageError
from .georaster import GeoRaster, read_raster, write_raster
from .registration import RockRegistry, register_all, save_registry
from .scarp import ScarpModel, ScarpParams, filter_rocks, path_to_world, scarp_from_dem
from .shape import compute_traits
from .stats import (build_grid, contour_to_world, export_geojson, export_grid_csv, export_histogram_csv,
                    export_traits_csv, histogram, orientation_histogram)
from .tiling import TileGrid, extract_tile, plan_tiles, save_manifest, tile_filename

log = logging.getLogger(__name__)

MANIFEST = "run_manifest.json"
PARTIAL = "PARTIAL"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


@contextmanager
def stage(name: str, subject=None):
    try:
        yield
    except StageError:
        raise
    except RockTraitsError as exc:
        raise StageError(name, subject, exc) from exc
    except (ValueError, OSError) as exc:
        raise StageError(name, subject, DataError(str(exc))) from exc


def same_grid(a: GeoRaster, b: GeoRaster) -> bool:
    return (a.width, a.height) == (b.width, b.height) and a.transform == b.transform


# ---- individual stages -------------------------------------------------------

def split(raster: GeoRaster, out_dir, tile_size: int = 400, overlap: int = 10,
          write_tiles: bool = False, name: str = "ortho") -> TileGrid:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = plan_tiles(raster.width, raster.height, tile_size, overlap)
    save_manifest(grid, out_dir / "tiles.json", raster.transform)
    if write_tiles:
        tdir = out_dir / "tiles" / name
        tdir.mkdir(parents=True, exist_ok=True)
        for tile in grid.tiles():
            write_raster(extract_tile(raster, tile), tdir / tile_filename(tile, ".tif"), compress=True)
    return grid


def encode(dem: GeoRaster, mode: str, h_min=None, h_max=None, cmap: str = "jet") -> GeoRaster:
    try:
        cm = JET if cmap == "jet" else ColormapSpec.load(cmap)
        scale = None if h_min is None else ElevationScale(h_min, h_max)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad encoding settings: {exc}") from exc
    rgb = colormap_elevation(dem, scale, cm)
    if mode == "colormap":
        return rgb
    if mode == "relative":
        return relative_elevation(rgb)
    raise ConfigError(f"unknown encoding mode {mode!r}")


def compute_all_traits(registry: RockRegistry, dem: GeoRaster, threads: int = 1):
    """``(traits_and_masks, skipped_ids)``; rocks too small or thin for a fit are skipped."""
    rocks = list(registry)

    def one(rock):
        try:
            return compute_traits(rock, dem.transform)
        except DegenerateShape:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, rocks))
    else:
        results = [one(r) for r in rocks]
    done = [r for r in results if r is not None]
    skipped = [rock.id for rock, r in zip(rocks, results) if r is None]
    return done, skipped


def save_scarp(model: ScarpModel, out_dir) -> list[str]:
    out_dir = Path(out_dir)
    gt = model.transform
    write_raster(GeoRaster(model.mask.astype(np.uint8)[None], gt, None, {"product": "scarp_mask"}),
                 out_dir / "scarp_mask.tif", compress=True)
    line = path_to_world(model.path, gt).tolist()
    doc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"kind": "scarp_contour"},
         "geometry": {"type": "Polygon", "coordinates": [contour_to_world(model.contour, gt)]}},
        {"type": "Feature", "properties": {"kind": "skeleton_path"},
         "geometry": {"type": "LineString", "coordinates": line}},
    ]}
    (out_dir / "scarp.geojson").write_text(json.dumps(doc) + "\n")
    write_json({
        "strike": model.strike.tolist(),
        "cross_strike": model.cross_strike.tolist(),
        "strike_deg_ccw_from_east": model.strike_deg,
        "anchor_world": model.anchor.tolist(),
        "mask_pixels": int(model.mask.sum()),
        "skeleton_pixels": int(model.skeleton.sum()),
        "params": model.params,
    }, out_dir / "strike.json")
    return ["scarp_mask.tif", "scarp.geojson", "strike.json"]


def write_stats(traits, model: ScarpModel, cfg: PipelineConfig, out_dir) -> list[str]:
    out_dir = Path(out_dir)
    areas = [t.area_m2 for t in traits]
    area_hi = max(areas) if areas else 1.0
    hists = {
        "hist_area.csv": histogram(areas, cfg["stats.area_bins"], (0.0, area_hi), "area_m2"),
        "hist_eccentricity.csv": histogram([t.eccentricity for t in traits],
                                           cfg["stats.eccentricity_bins"], (0.0, 1.0), "eccentricity"),
        "hist_length.csv": histogram([t.major_axis_m for t in traits], cfg["stats.length_bins"],
                                     (0.0, cfg["stats.length_max"]), "major_axis_m"),
        "hist_orientation.csv": orientation_histogram([t.orientation_deg for t in traits],
                                                      cfg["stats.orientation_bins"]),
    }
    for name, h in hists.items():
        export_histogram_csv(h, out_dir / name)
    grid = build_grid(traits, model, cfg["grid.n_areas"], cfg["grid.n_boxes"], cfg["grid.n_bins"],
                      (cfg["grid.range_min"], cfg["grid.range_max"]))
    export_grid_csv(grid, out_dir / "grid.csv")
    meta = grid.metadata()
    meta["counts"] = grid.counts.tolist()
    meta["assignment"] = {str(k): (list(v) if v is not None else None)
                          for k, v in sorted(grid.assignment.items())}
    write_json(meta, out_dir / "grid.json")
    return sorted(hists) + ["grid.csv", "grid.json"]


# ---- full run ----------------------------------------------------------------

@dataclass
class RunResult:
    output: Path
    grid: TileGrid | None = None
    registry: RockRegistry | None = None
    filtered: RockRegistry | None = None
    scarp: ScarpModel | None = None
    traits: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    outputs: list = field(default_factory=list)


def input_checksums(cfg: PipelineConfig) -> dict:
    sums = {}
    for key in ("paths.ortho", "paths.dem"):
        if cfg[key]:
            sums[key] = sha256_file(cfg[key])
    if cfg["paths.detections"]:
        for p in detection_files(cfg["paths.detections"]):
            sums[f"paths.detections/{p.name}"] = sha256_file(p)
    return sums


def _manifest(cfg: PipelineConfig, sums: dict, result: RunResult, stages: list[str]) -> dict:
    config = cfg.to_json()
    config["paths.output"] = None
    return {
        "config": config,
        "inputs": sums,
        "stages": stages,
        "counts": {
            "instances": result.registry.instances if result.registry else None,
            "merge_events": result.registry.merge_events if result.registry else None,
            "registered_rocks": len(result.registry) if result.registry else None,
            "scarp_rocks": len(result.filtered) if result.filtered else 0,
            "measured_rocks": len(result.traits),
            "skipped_degenerate": result.skipped,
        },
        "outputs": {name: sha256_file(result.output / name) for name in sorted(result.outputs)},
    }


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    cfg.require_paths("paths.dem", "paths.detections", "paths.output")
    for key in ("paths.ortho", "paths.dem"):
        if cfg[key] and not Path(cfg[key]).is_file():
            raise StageError("split", cfg[key], DataError(f"{key} does not exist"))
    if not Path(cfg["paths.detections"]).is_dir():
        raise StageError("ingest", cfg["paths.detections"], DataError("detections directory does not exist"))
    out = Path(cfg["paths.output"])
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL
    marker.write_text("run in progress\n")
    result = RunResult(out)
    stages = []
    threads = cfg["run.threads"]
    current = "split"
    try:
        with stage("split", cfg["paths.dem"]):
            dem = read_raster(cfg["paths.dem"])
            base = dem
            if cfg["paths.ortho"]:
                ortho = read_raster(cfg["paths.ortho"])
                if not same_grid(ortho, dem):
                    raise DataError("DEM and ortho must share one pixel grid (size and geotransform)")
                base = ortho
            result.grid = split(base, out, cfg["tiling.tile_size"], cfg["tiling.overlap"],
                                cfg["tiling.write_tiles"])
            result.outputs.append("tiles.json")
        stages.append(current)

        current = "encode"
        if cfg["encoding.mode"] != "none":
            with stage(current, cfg["paths.dem"]):
                enc = encode(dem, cfg["encoding.mode"], cfg["encoding.h_min"], cfg["encoding.h_max"],
                             cfg["encoding.cmap"])
                name = f"dem_{cfg['encoding.mode']}.tif"
                write_raster(enc, out / name, compress=True)
                result.outputs.append(name)
            stages.append(current)

        current = "ingest"
        with stage(current, cfg["paths.detections"]):
            dets = load_detection_dir(cfg["paths.detections"], result.grid,
                                      cfg["registration.score_floor"], threads)
        stages.append(current)

        current = "register"
        with stage(current):
            result.registry = register_all(result.grid, dets, cfg["registration.threshold"])
            save_registry(result.registry, out / "registry.json")
            result.outputs.append("registry.json")
        stages.append(current)

        current = "scarp"
        with stage(current, cfg["paths.dem"]):
            params = ScarpParams(cfg["scarp.sigma"], cfg["scarp.slope_threshold"],
                                 cfg["scarp.morph_radius"], cfg["scarp.subsection"])
            result.scarp = scarp_from_dem(dem, params)
            result.outputs.extend(save_scarp(result.scarp, out))
            result.filtered = filter_rocks(result.registry, result.scarp)
        stages.append(current)

        current = "traits"
        with stage(current):
            pairs, result.skipped = compute_all_traits(result.filtered, dem, threads)
            result.traits = [t for t, _ in pairs]
            export_traits_csv(result.traits, out / "traits.csv")
            export_geojson(pairs, dem.transform, out / "rocks.geojson")
            result.outputs.extend(["traits.csv", "rocks.geojson"])
        stages.append(current)

        current = "stats"
        with stage(current):
            result.outputs.extend(write_stats(result.traits, result.scarp, cfg, out))
        stages.append(current)

        current = "manifest"
        with stage(current):
            write_json(_manifest(cfg, input_checksums(cfg), result, stages), out / MANIFEST)
    except Exception as exc:
        marker.write_text(f"stage: {current}\nerror: {exc}\ncompleted: {', '.join(stages)}\n")
        raise
    marker.unlink()
    return result


def replay(manifest_path, output_dir, overrides: dict | None = None) -> RunResult:
    """Re-run a recorded configuration after checking every input checksum."""
    doc = json.loads(Path(manifest_path).read_text())
    cfg = PipelineConfig.from_json(doc["config"])
    cfg.values["paths.output"] = str(output_dir)
    if overrides:
        cfg = cfg.update(overrides)
    now = input_checksums(cfg)
    if now != doc["inputs"]:
        changed = sorted(k for k in set(now) | set(doc["inputs"]) if now.get(k) != doc["inputs"].get(k))
        raise DataError("inputs differ from the manifest: " + ", ".join(changed))
    return run_pipeline(cfg)


def load_scarp(directory) -> ScarpModel:
    """Rebuild a scarp model from ``scarp_mask.tif`` and ``strike.json``."""
    from .shape import find_contours

    directory = Path(directory)
    raster = read_raster(directory / "scarp_mask.tif")
    info = json.loads((directory / "strike.json").read_text())
    mask = raster.band(0).astype(bool)
    if not mask.any():
        raise DataError(f"{directory / 'scarp_mask.tif'} is empty")
    return ScarpModel(mask, find_contours(mask)[0].points, raster.transform,
                      strike=np.array(info["strike"]), cross_strike=np.array(info["cross_strike"]),
                      anchor=np.array(info["anchor_world"]), params=info.get("params", {}))
