
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rocktraits.detections import (InstanceRecord, TileDetections, load_detection_dir, load_tile_detections,
                                   parse_tile_detections, save_tile_detections, write_detection_dir)
from rocktraits.errors import DataError, DetectionValidationError
from rocktraits.masks import SparseMask, decode_rle, encode_rle
from rocktraits.tiling import Rect, plan_tiles


def test_rle_examples():
    m = decode_rle([3, 2, 5], 1, 10)
    assert np.flatnonzero(m[0]).tolist() == [3, 4]
    assert encode_rle(np.zeros((10, 10), bool)) == [100]
    assert encode_rle(np.ones((2, 2), bool)) == [0, 4]


def test_rle_sum_mismatch():
    with pytest.raises(ValueError):
        decode_rle([3, 2], 1, 10)
    with pytest.raises(ValueError):
        decode_rle([-1, 11], 1, 10)


@given(arrays(np.bool_, st.tuples(st.integers(1, 30), st.integers(1, 30))))
def test_rle_roundtrip(mask):
    counts = encode_rle(mask)
    assert all(c > 0 for c in counts[1:])
    np.testing.assert_array_equal(decode_rle(counts, *mask.shape), mask)
    assert encode_rle(decode_rle(counts, *mask.shape)) == counts


@given(arrays(np.bool_, st.tuples(st.integers(1, 20), st.integers(1, 20))),
       st.integers(0, 15), st.integers(0, 15))
def test_sparse_global_rle_matches_dense(mask, dx, dy):
    h, w = mask.shape[0] + dy + 3, mask.shape[1] + dx + 2
    canvas = np.zeros((h, w), bool)
    canvas[dy:dy + mask.shape[0], dx:dx + mask.shape[1]] = mask
    sm = SparseMask.from_dense(mask, dx, dy)
    assert sm.to_global_rle(h, w) == encode_rle(canvas)
    back = SparseMask.from_global_rle(encode_rle(canvas), h, w)
    np.testing.assert_array_equal(back.window(Rect(0, 0, w, h)), canvas)


def test_sparse_ops():
    a = SparseMask.from_dense(np.ones((20, 20), bool), 0, 0)
    b = a.translated(10, 0)
    assert a.intersection(b) == 200
    u = a.union(b)
    assert u.area == 600 and u.bbox == (0, 0, 30, 20)
    assert a.union(a).area == a.area
    assert a.centroid() == (9.5, 9.5)


def _doc(tile, instances):
    return {"tile": tile.to_json(), "instances": instances}


def _inst(mask, bbox=None, score=0.9):
    rec = InstanceRecord.from_mask(mask, score)
    d = rec.to_json()
    if bbox is not None:
        d["bbox"] = bbox
    return d


@pytest.fixture
def grid():
    return plan_tiles(790, 790)


def test_empty_instances(grid):
    d = parse_tile_detections(_doc(grid.tile(0, 0), []), grid)
    assert d.instances == []


def test_bbox_past_edge_names_instance(grid):
    m = np.zeros((400, 400), bool)
    m[10:20, 390:400] = True
    ok = _inst(m)
    bad = _inst(m, bbox=[390, 10, 15, 10])
    with pytest.raises(DetectionValidationError) as exc:
        parse_tile_detections(_doc(grid.tile(0, 0), [ok, bad]), grid, "f.json")
    assert "instance 1" in str(exc.value)
    assert exc.value.problems and all(p.startswith("instance 1") for p in exc.value.problems)


def test_validation_failures(grid):
    t = grid.tile(0, 0)
    m = np.zeros((400, 400), bool)
    m[5:9, 5:9] = True
    cases = [
        _inst(m, bbox=[5, 5, 2, 2]),  # foreground outside bbox
        _inst(m, score=1.5),
        {"bbox": [0, 0, 1, 1], "score": 1.0, "rle": {"size": [400, 400], "counts": [160000]}},
        {"bbox": [0, 0, 1, 1], "score": 1.0, "rle": {"size": [10, 10], "counts": [0, 1, 99]}},
        {"bbox": [0, 0, 1, 1], "score": 1.0, "rle": {"size": [400, 400], "counts": [5, 5]}},
        {"score": 1.0},
    ]
    for inst in cases:
        with pytest.raises(DetectionValidationError):
            parse_tile_detections(_doc(t, [inst]), grid)


def test_bbox_slack_of_one_pixel(grid):
    m = np.zeros((400, 400), bool)
    m[5:10, 5:10] = True
    parse_tile_detections(_doc(grid.tile(0, 0), [_inst(m, bbox=[6, 6, 3, 3])]), grid)


def test_unknown_tile(grid):
    doc = {"tile": {"col": 5, "row": 0, "x0": 0, "y0": 0, "w": 400, "h": 400}, "instances": []}
    with pytest.raises(DetectionValidationError):
        parse_tile_detections(doc, grid)
    doc = {"tile": {"col": 1, "row": 0, "x0": 300, "y0": 0, "w": 400, "h": 400}, "instances": []}
    with pytest.raises(DetectionValidationError):
        parse_tile_detections(doc, grid)


def test_score_floor(grid):
    m = np.zeros((400, 400), bool)
    m[5:9, 5:9] = True
    d = parse_tile_detections(_doc(grid.tile(0, 0), [_inst(m, score=0.2), _inst(m, score=0.8)]), grid,
                              score_floor=0.5)
    assert [i.score for i in d.instances] == [0.8]


def test_file_roundtrip_and_dir(tmp_path, grid):
    dets = []
    for t in grid.tiles():
        m = np.zeros((t.h, t.w), bool)
        m[50:60, 50:70] = True
        dets.append(TileDetections(t, [InstanceRecord.from_mask(m, 0.7)]))
    write_detection_dir(dets, tmp_path / "d")
    loaded = load_detection_dir(tmp_path / "d", grid, threads=3)
    assert [d.tile.key for d in loaded] == [t.key for t in grid.tiles()]
    for a, b in zip(dets, loaded):
        assert a.instances[0].bbox == b.instances[0].bbox
        np.testing.assert_array_equal(a.instances[0].mask, b.instances[0].mask)
    save_tile_detections(dets[0], tmp_path / "dup.json")
    (tmp_path / "d" / "dup.json").write_text((tmp_path / "dup.json").read_text())
    with pytest.raises(DataError):
        load_detection_dir(tmp_path / "d", grid)


def test_invalid_json(tmp_path, grid):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(DetectionValidationError):
        load_tile_detections(tmp_path / "x.json", grid)


def test_missing_dir(tmp_path, grid):
    with pytest.raises(DataError):
        load_detection_dir(tmp_path / "absent", grid)


def test_oracle_file_seven_rocks(tmp_path):
    from rocktraits.synth import SceneSpec, generate_scene, oracle_detect

    spec = SceneSpec.from_json({"width": 390, "height": 390, "res": 0.02, "seed": 5,
                                "rocks": {"count": 7, "diameter": {"mu": -1.0, "sigma": 0.2}}})
    _, _, truth = generate_scene(spec)
    grid = plan_tiles(390, 390)
    dets = oracle_detect(truth, grid)
    write_detection_dir(dets, tmp_path)
    loaded = load_tile_detections(tmp_path / "tile_0_0.json", grid)
    assert len(loaded.instances) == 7
