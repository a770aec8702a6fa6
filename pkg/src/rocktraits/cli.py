"""Command-line entry point: ``rocktraits <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, RockTraitsError, StageError

log = logging.getLogger("rocktraits")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


def _manifest_grid(path):
    from .tiling import load_manifest

    try:
        return load_manifest(path)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read tile manifest {path}: {exc}") from exc


def cmd_split(args) -> None:
    from .georaster import read_raster
    from .pipeline import split

    raster = read_raster(args.raster)
    grid = split(raster, args.out, args.tile_size, args.overlap, not args.manifest_only,
                 Path(args.raster).stem)
    print(f"{grid.cols}x{grid.rows} tiles (stride {grid.stride}) -> {Path(args.out) / 'tiles.json'}")


def cmd_encode(args) -> None:
    from .georaster import read_raster, write_raster
    from .pipeline import encode

    if (args.h_min is None) != (args.h_max is None):
        raise ConfigError("give both --h-min and --h-max, or neither")
    out = encode(read_raster(args.dem), args.mode, args.h_min, args.h_max, args.cmap)
    write_raster(out, args.out, compress=True)
    meta = out.metadata
    print(f"{args.mode} encoding, window [{meta['h_min']}, {meta['h_max']}] -> {args.out}")


def cmd_ingest(args) -> None:
    from .detections import load_detection_dir

    grid = _manifest_grid(args.manifest)
    dets = load_detection_dir(args.detections, grid, args.score_floor, args.threads)
    n = sum(len(d.instances) for d in dets)
    summary = {"tiles": len(dets), "instances": n,
               "per_tile": {f"{d.tile.grid_row}_{d.tile.grid_col}": len(d.instances) for d in dets}}
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"{len(dets)} tile files, {n} valid instances")


def cmd_register(args) -> None:
    from .detections import load_detection_dir
    from .registration import register_all, save_registry

    grid = _manifest_grid(args.manifest)
    dets = load_detection_dir(args.detections, grid, args.score_floor, args.threads)
    reg = register_all(grid, dets, args.threshold)
    save_registry(reg, args.out)
    print(f"{reg.instances} instances -> {len(reg)} rocks ({reg.merge_events} merges) -> {args.out}")


def cmd_scarp(args) -> None:
    from .georaster import read_raster
    from .pipeline import save_scarp
    from .scarp import ScarpParams, scarp_from_dem

    params = ScarpParams(args.sigma, args.slope_threshold, args.morph_radius, args.subsection)
    model = scarp_from_dem(read_raster(args.dem), params)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    save_scarp(model, args.out)
    print(f"scarp: {int(model.mask.sum())} px, strike {model.strike_deg:.2f} deg CCW from east")


def cmd_traits(args) -> None:
    from .georaster import read_raster
    from .pipeline import compute_all_traits, load_scarp
    from .registration import load_registry
    from .scarp import filter_rocks
    from .stats import export_geojson, export_traits_csv

    reg = load_registry(args.registry)
    gt = read_raster(args.dem)
    if args.scarp:
        reg = filter_rocks(reg, load_scarp(args.scarp))
    pairs, skipped = compute_all_traits(reg, gt, args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_traits_csv([t for t, _ in pairs], out / "traits.csv")
    export_geojson(pairs, gt.transform, out / "rocks.geojson")
    print(f"{len(pairs)} rocks measured, {len(skipped)} below the fit floor")


def cmd_stats(args) -> None:
    from .pipeline import load_scarp, write_stats
    from .stats import load_traits_csv

    cfg = PipelineConfig.defaults().update({
        "grid.n_areas": args.n_areas, "grid.n_boxes": args.n_boxes, "grid.n_bins": args.n_bins,
        "grid.range_min": args.range_min, "grid.range_max": args.range_max,
        "stats.area_bins": args.area_bins})
    traits = load_traits_csv(args.traits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = write_stats(traits, load_scarp(args.scarp), cfg, out)
    print(f"{len(traits)} rocks -> {', '.join(names)}")


def cmd_eval(args) -> None:
    from .detections import load_detection_dir
    from .metrics import detections_to_images, evaluate, report_csv_rows

    grid = _manifest_grid(args.manifest)
    preds = detections_to_images(load_detection_dir(args.preds, grid))
    gts = detections_to_images(load_detection_dir(args.gt, grid), use_scores=False)
    thresholds = tuple(float(v) for v in args.iou.split(",")) if args.iou else None
    kw = {"large_area": args.large_area, "max_dets": args.max_dets}
    if thresholds:
        kw["thresholds"] = thresholds
    report = evaluate(preds, gts, **kw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
    with open(out / "metrics.csv", "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(report_csv_rows(report))
    for kind, ms in (("bbox", report.bbox), ("mask", report.mask)):
        vals = " ".join(f"{k}={'n/a' if v is None else f'{v:.1f}'}" for k, v in vars(ms).items())
        print(f"{kind:5s} {vals}")


def cmd_synth(args) -> None:
    from .detections import write_detection_dir
    from .georaster import write_raster
    from .synth import SceneSpec, generate_scene, oracle_detect, perturb_detections, save_truth
    from .tiling import plan_tiles, save_manifest

    spec = SceneSpec.load(args.spec)
    dem, ortho, truth = generate_scene(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(dem, out / "dem.tif", compress=True)
    write_raster(ortho, out / "ortho.tif", compress=True)
    save_truth(truth, out / "truth.json")
    (out / "scene_spec.json").write_text(json.dumps(spec.to_json(), indent=1, sort_keys=True) + "\n")
    grid = plan_tiles(spec.width, spec.height, args.tile_size, args.overlap)
    save_manifest(grid, out / "tiles.json", spec.transform)
    dets = oracle_detect(truth, grid)
    write_detection_dir(dets, out / "gt_detections")
    if args.jitter or args.drop_rate:
        dets = perturb_detections(dets, args.jitter, args.drop_rate, args.perturb_seed)
    write_detection_dir(dets, out / "detections")
    (out / "run.cfg").write_text(
        "paths.ortho = ortho.tif\npaths.dem = dem.tif\npaths.detections = detections\n"
        f"paths.output = run\ntiling.tile_size = {args.tile_size}\ntiling.overlap = {args.overlap}\n")
    print(f"{len(truth.rocks)} rocks, {spec.width}x{spec.height} px, {grid.cols}x{grid.rows} tiles -> {out}")


def cmd_run(args) -> None:
    from .pipeline import replay, run_pipeline

    overrides = {}
    if args.threads is not None:
        overrides["run.threads"] = args.threads
    if args.replay:
        if not args.out:
            raise ConfigError("--replay needs --out")
        res = replay(args.replay, args.out, overrides)
    else:
        if not args.config:
            raise ConfigError("run needs --config or --replay")
        cfg = load_config(args.config)
        if args.out:
            overrides["paths.output"] = str(Path(args.out).resolve())
        if overrides:
            cfg = cfg.update(overrides)
        res = run_pipeline(cfg)
    print(f"{len(res.registry)} rocks registered, {len(res.filtered)} on the scarp, "
          f"{len(res.traits)} measured -> {res.output}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rocktraits", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("split", help="plan tiles and cut a raster into them")
    s.add_argument("--raster", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tile-size", type=int, default=400)
    s.add_argument("--overlap", type=int, default=10)
    s.add_argument("--manifest-only", action="store_true", help="write tiles.json but no tile files")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("encode-dem", help="colormap or relative elevation encoding")
    s.add_argument("--dem", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=("colormap", "relative"), default="colormap")
    s.add_argument("--h-min", type=float)
    s.add_argument("--h-max", type=float)
    s.add_argument("--cmap", default="jet", help="'jet' or a JSON breakpoint file")
    s.set_defaults(func=cmd_encode)

    for name, fn, helptext in (("ingest", cmd_ingest, "validate per-tile detection files"),
                               ("register", cmd_register, "merge tile detections into rocks")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--detections", required=True)
        s.add_argument("--manifest", required=True, help="tiles.json from split")
        s.add_argument("--score-floor", type=float, default=0.0)
        s.add_argument("--threads", type=int, default=1)
        if name == "register":
            s.add_argument("--threshold", type=float, default=0.5)
            s.add_argument("--out", required=True)
        else:
            s.add_argument("--out")
        s.set_defaults(func=fn)

    s = sub.add_parser("scarp", help="extract the scarp mask, skeleton and strike from a DEM")
    s.add_argument("--dem", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--sigma", type=float, default=5.0)
    s.add_argument("--slope-threshold", type=float, default=15.0)
    s.add_argument("--morph-radius", type=int, default=5)
    s.add_argument("--subsection", type=float, default=0.5)
    s.set_defaults(func=cmd_scarp)

    s = sub.add_parser("traits", help="refine masks and fit ellipses")
    s.add_argument("--registry", required=True)
    s.add_argument("--dem", required=True, help="raster supplying the geotransform")
    s.add_argument("--scarp", help="directory from `scarp`; keeps only rocks on the scarp")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_traits)

    s = sub.add_parser("stats", help="histograms and the along/cross-strike grid")
    s.add_argument("--traits", required=True, help="traits.csv")
    s.add_argument("--scarp", required=True, help="directory from `scarp`")
    s.add_argument("--out", required=True)
    s.add_argument("--n-areas", type=int, default=16)
    s.add_argument("--n-boxes", type=int, default=9)
    s.add_argument("--n-bins", type=int, default=20)
    s.add_argument("--range-min", type=float, default=0.0)
    s.add_argument("--range-max", type=float, default=3.6)
    s.add_argument("--area-bins", type=int, default=50)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("eval", help="AP/AR of predictions against ground truth")
    s.add_argument("--preds", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--iou", help="comma-separated IoU thresholds")
    s.add_argument("--large-area", type=float, default=96.0 ** 2)
    s.add_argument("--max-dets", type=int, default=100)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic scene with oracle detections")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tile-size", type=int, default=400)
    s.add_argument("--overlap", type=int, default=10)
    s.add_argument("--jitter", type=int, default=0)
    s.add_argument("--drop-rate", type=float, default=0.0)
    s.add_argument("--perturb-seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="full pipeline from a config file")
    s.add_argument("--config")
    s.add_argument("--replay", help="run_manifest.json of an earlier run")
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_run)
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except RockTraitsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
