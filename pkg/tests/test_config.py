import pytest

from rocktraits.config import SCHEMA, PipelineConfig, load_config, parse_config
from rocktraits.errors import ConfigError


def test_defaults_match_documented_values():
    cfg = PipelineConfig.defaults()
    cfg.check()
    assert cfg["tiling.tile_size"] == 400 and cfg["tiling.overlap"] == 10
    assert cfg["registration.threshold"] == 0.5 and cfg["registration.score_floor"] == 0.0
    assert (cfg["scarp.sigma"], cfg["scarp.slope_threshold"], cfg["scarp.morph_radius"]) == (5.0, 15.0, 5)
    assert cfg["scarp.subsection"] == 0.5
    assert (cfg["grid.n_areas"], cfg["grid.n_boxes"], cfg["grid.n_bins"]) == (16, 9, 20)
    assert (cfg["grid.range_min"], cfg["grid.range_max"]) == (0.0, 3.6)
    assert cfg["eval.large_area"] == 9216.0
    assert len(cfg["eval.iou_thresholds"]) == 10


def test_parse_and_comments():
    cfg = parse_config("# header\ntiling.tile_size = 256  # smaller\n\nencoding.mode = relative\n"
                       "eval.iou_thresholds = 0.5, 0.75\ntiling.write_tiles = yes\n")
    assert cfg["tiling.tile_size"] == 256 and cfg["encoding.mode"] == "relative"
    assert cfg["eval.iou_thresholds"] == (0.5, 0.75)
    assert cfg["tiling.write_tiles"] is True


@pytest.mark.parametrize("text", [
    "tiling.tilesize = 400",
    "tiling.tile_size = 400\ntiling.tile_size = 300",
    "tiling.tile_size = big",
    "tiling.tile_size = 20\ntiling.overlap = 10",
    "registration.threshold = 0",
    "scarp.slope_threshold = 90",
    "encoding.mode = rainbow",
    "encoding.h_min = 5",
    "encoding.h_min = 5\nencoding.h_max = 1",
    "grid.range_min = 4",
    "just some words",
])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_text_roundtrip():
    cfg = parse_config("encoding.h_min = 1200\nencoding.h_max = 1230.5\nrun.threads = 3\n")
    again = parse_config(cfg.to_text())
    assert again.values == cfg.values
    assert PipelineConfig.from_json(cfg.to_json()).values == cfg.values
    assert set(cfg.values) == set(SCHEMA)


def test_update_and_require():
    cfg = PipelineConfig.defaults().update({"run.threads": "4", "grid.n_areas": 8})
    assert cfg["run.threads"] == 4 and cfg["grid.n_areas"] == 8
    with pytest.raises(ConfigError):
        PipelineConfig.defaults().update({"nope": 1})
    with pytest.raises(ConfigError) as exc:
        cfg.require_paths("paths.dem", "paths.detections")
    assert "paths.dem" in str(exc.value)


def test_load_relative_paths(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "a.cfg").write_text("paths.dem = dem.tif\npaths.output = /abs/out\n")
    cfg = load_config(tmp_path / "sub" / "a.cfg")
    assert cfg["paths.dem"] == str((tmp_path / "sub" / "dem.tif").resolve())
    assert cfg["paths.output"] == "/abs/out"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
