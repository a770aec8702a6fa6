import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rocktraits.detections import InstanceRecord, TileDetections
from rocktraits.errors import ConfigError, DataError
from rocktraits.georaster import WorldPoint
from rocktraits.masks import SparseMask
from rocktraits.synth import (GroundTruth, Rng, SceneSpec, TruthRock, generate_scene, load_truth, oracle_detect,
                              perturb_detections, rasterize_ellipse, save_truth, splitmix64)
from rocktraits.tiling import Rect, plan_tiles

from conftest import disk


def small(seed=42, count=20, size=500, **rocks):
    doc = {"width": size, "height": size, "res": 0.02, "seed": seed,
           "rocks": {"count": count, "diameter": {"mu": -0.5, "sigma": 0.3, "max": 1.5}, **rocks}}
    return SceneSpec.from_json(doc)


# ---- generator ----------------------------------------------------------

def test_splitmix_reference_vector():
    s, out = 1234567, []
    for _ in range(5):
        s, x = splitmix64(s)
        out.append(x)
    assert out == [6457827717110365317, 3203168211198807973, 9817491932198370423,
                   4593380528125082431, 16408922859458223821]
    assert splitmix64(0)[1] == 0xE220A8397B1DCDAF


def _xorshift_ref(x):
    m = (1 << 64) - 1
    x ^= x >> 12
    x ^= (x << 25) & m
    x ^= x >> 27
    return x, (x * 0x2545F4914F6CDD1D) & m


def test_rng_golden_values():
    r = Rng(42)
    assert [r.next_u64() for _ in range(3)] == [3580622183945639842, 10378725325292465923, 8967075514996744559]
    r = Rng(42)
    assert r.uniform() == 0.1941059175341826
    assert r.uniform() == 0.5626318272656207
    assert r.normal() == -0.1525702928943948
    assert r.lognormal(0, 0.45) == 0.49335733400246473
    assert Rng(0).state == 16294208416658607535


@given(st.integers(0, 2 ** 64 - 1))
def test_rng_matches_reference_stream(seed):
    r = Rng(seed)
    s, x = seed, 0
    while x == 0:
        s, x = splitmix64(s)
    for _ in range(4):
        x, out = _xorshift_ref(x)
        assert r.next_u64() == out
    u = Rng(seed).uniform()
    assert 0.0 <= u < 1.0


def test_determinism():
    a = generate_scene(small(42))
    b = generate_scene(small(42))
    assert a[0].data.tobytes() == b[0].data.tobytes()
    assert a[1].data.tobytes() == b[1].data.tobytes()
    assert a[2].to_json() == b[2].to_json()
    c = generate_scene(small(43))
    assert a[2].to_json() != c[2].to_json()


def test_empty_scene():
    dem, ortho, truth = generate_scene(small(count=0))
    assert truth.rocks == []
    assert dem.data.shape == (1, 500, 500) and ortho.data.shape == (3, 500, 500)
    assert dem.data.dtype == np.float32 and ortho.data.dtype == np.uint8


def test_fifty_disjoint_masks():
    _, _, truth = generate_scene(small(count=50, size=700))
    assert len(truth.rocks) == 50
    canvas = np.zeros((700, 700), np.int32)
    for r in truth.rocks:
        canvas += r.mask.window(Rect(0, 0, 700, 700))
        assert r.mask.x0 >= 1 and r.mask.y0 >= 1
        assert r.mask.x0 + r.mask.w <= 699 and r.mask.y0 + r.mask.h <= 699
    assert canvas.max() == 1


def test_diameter_clip_and_ranges():
    _, _, truth = generate_scene(small(count=60, size=900))
    for r in truth.rocks:
        assert 0.2 - 1e-12 <= r.major_axis_m <= 1.5 + 1e-12
        assert 0.6 <= r.eccentricity <= 0.95 + 1e-9
        assert 0 <= r.theta_deg < 180
        assert 0.2 <= r.raise_m <= 1.0


def test_rocks_raised_and_tinted():
    dem, ortho, truth = generate_scene(small(count=5))
    d = dem.band(0)
    for r in truth.rocks:
        crop = r.mask.window(Rect(0, 0, 500, 500))
        cx, cy = (int(round(v)) for v in r.center_px)
        ring = d[cy, max(cx - int(r.a_m / 0.02) - 4, 0)]
        assert d[cy, cx] > ring + 0.1
        assert (ortho.data[:, crop].astype(int).std(axis=0) < 10).all()


def test_scarp_band_geometry():
    spec = SceneSpec.from_json({"width": 600, "height": 400, "res": 0.2, "seed": 1,
                                "scarp": {"orientation_deg": 90.0, "drop_m": 20.0},
                                "rocks": {"count": 0}})
    dem, _, truth = generate_scene(spec)
    width_px = 20.0 / math.tan(math.radians(30)) / 0.2
    cols = np.flatnonzero(truth.scarp_mask[200])
    assert abs(cols.size - width_px) <= 1
    assert abs((cols[0] + cols[-1]) / 2 - 299.5) <= 1
    assert truth.strike_deg == 90.0
    d = dem.band(0)
    assert abs((d[:, -1].mean() - d[:, 0].mean())) == pytest.approx(20.0, abs=0.1)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SceneSpec.from_json({"scarp": {"band_width_m": 10.0}})
    ok = SceneSpec.from_json({"scarp": {"drop_m": 20.0, "band_width_m": 20.0 / math.tan(math.radians(30))}})
    assert ok.scarp.width_m == pytest.approx(34.641, abs=1e-3)
    with pytest.raises(ConfigError):
        SceneSpec.from_json({"bogus": 1})
    with pytest.raises(ConfigError):
        SceneSpec.from_json({"rocks": {"eccentricity": {"max": 1.0}}})
    with pytest.raises(ConfigError):
        SceneSpec.from_json({"res": 0})
    spec = small()
    assert SceneSpec.from_json(spec.to_json()) == spec


def test_infeasible_packing():
    spec = SceneSpec.from_json({"width": 60, "height": 60, "res": 0.02, "seed": 3,
                                "rocks": {"count": 40, "diameter": {"mu": 0.0, "sigma": 0.0, "min": 0.8},
                                          "max_attempts": 50}})
    with pytest.raises(DataError):
        generate_scene(spec)


def test_truth_roundtrip(tmp_path):
    _, _, truth = generate_scene(small(count=8))
    save_truth(truth, tmp_path / "t.json")
    back = load_truth(tmp_path / "t.json")
    assert back.to_json() == truth.to_json()
    with pytest.raises(DataError):
        load_truth(tmp_path / "none.json")


@settings(max_examples=30)
@given(st.floats(10.3, 40.7), st.floats(10.2, 40.9), st.floats(3, 9), st.floats(0.3, 1.0), st.floats(0, 180))
def test_rasterize_ellipse_contains_centre(cx, cy, a, ratio, theta):
    m, x0, y0, q = rasterize_ellipse(cx, cy, a, a * ratio, theta)
    assert m.shape == q.shape
    assert m[int(round(cy)) - y0, int(round(cx)) - x0] or a * ratio < 0.75
    assert abs(m.sum() - math.pi * a * a * ratio) <= 2 * math.pi * a + 4


# ---- oracle detections --------------------------------------------------

def _truth_with(centres, r=20, size=790):
    rocks = []
    for i, (cx, cy) in enumerate(centres):
        m, x0, y0, _ = rasterize_ellipse(cx, cy, r, r, 0)
        rocks.append(TruthRock(i, SparseMask.from_dense(m, x0, y0), r * 0.02, r * 0.02, 0.0, (cx, cy),
                               WorldPoint(0.0, 0.0), False, 0.5))
    plan = plan_tiles(size, size)
    from rocktraits.georaster import GeoTransform
    return GroundTruth(size, size, GeoTransform(0, 0, 0.02, 0.02), rocks, np.zeros((size, size), bool), 0.0), plan


@pytest.mark.parametrize("centre,n", [((200.0, 200.0), 1), ((395.0, 200.0), 2), ((395.0, 395.0), 4)])
def test_oracle_record_counts(centre, n):
    truth, grid = _truth_with([centre])
    dets = oracle_detect(truth, grid)
    assert len(dets) == grid.cols * grid.rows
    records = [(d.tile, i) for d in dets for i in d.instances]
    assert len(records) == n
    assert all(i.score == 1.0 for _, i in records)
    union = np.zeros((790, 790), bool)
    for tile, inst in records:
        union[tile.y0:tile.y0 + tile.h, tile.x0:tile.x0 + tile.w] |= inst.mask
    np.testing.assert_array_equal(union, truth.rocks[0].mask.window(Rect(0, 0, 790, 790)))


def test_oracle_grid_mismatch():
    truth, _ = _truth_with([(100.0, 100.0)])
    with pytest.raises(DataError):
        oracle_detect(truth, plan_tiles(800, 790))


# ---- perturbation -------------------------------------------------------

def _many(n):
    grid = plan_tiles(400, 400)
    m = disk(400, 400, 200, 200, 50)
    return [TileDetections(grid.tile(0, 0), [InstanceRecord.from_mask(m) for _ in range(n)])], m


def test_perturb_identity():
    dets, _ = _many(3)
    out = perturb_detections(dets, 0, 0.0, 7)
    for a, b in zip(dets[0].instances, out[0].instances):
        assert a.bbox == b.bbox and (a.mask == b.mask).all()


def test_perturb_drop_binomial():
    dets, _ = _many(1000)
    kept = len(perturb_detections(dets, 0, 0.5, 11)[0].instances)
    dropped = 1000 - kept
    half_width = 2.576 * math.sqrt(1000 * 0.25)
    assert abs(dropped - 500) <= half_width
    again = perturb_detections(dets, 0, 0.5, 11)
    assert len(again[0].instances) == kept


def test_perturb_jitter_bound():
    dets, m = _many(40)
    perimeter = 2 * math.pi * 50
    seen = set()
    for inst in perturb_detections(dets, 2, 0.0, 5)[0].instances:
        seen.add(int(inst.mask.sum()) - int(m.sum()))
        assert abs(int(inst.mask.sum()) - int(m.sum())) <= perimeter * 2
    assert len(seen) >= 3


def test_perturb_arguments():
    dets, _ = _many(1)
    with pytest.raises(ValueError):
        perturb_detections(dets, -1)
    with pytest.raises(ValueError):
        perturb_detections(dets, 0, 1.0)
