import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rocktraits.errors import DataError, EmptyScarp
from rocktraits.georaster import GeoRaster, GeoTransform
from rocktraits.masks import SparseMask
from rocktraits.registration import RegisteredRock, RockRegistry
from rocktraits.scarp import (ScarpParams, extract_scarp, filter_rocks, gaussian_kernel, gaussian_smooth, horn_slope,
                              scarp_from_dem, skeleton_path, skeletonize, strike_line)
from rocktraits.tiling import plan_tiles

GT = GeoTransform(1000.0, 2000.0, 1.0, 1.0)


def raster(z, res=1.0):
    return GeoRaster(np.asarray(z, dtype=np.float64)[None], GeoTransform(1000.0, 2000.0, res, res))


def plane(h, w, gx, gy, res=1.0):
    rr, cc = np.mgrid[:h, :w].astype(np.float64)
    # world y decreases with row in a north-up raster
    return gx * cc * res - gy * rr * res


def ramp_band(h=200, w=200, x0=80, x1=120, drop=23.094):
    """Flat, 30 degree ramp between columns x0 and x1, flat; 1 m cells."""
    cc = np.arange(w, dtype=np.float64)
    z = np.clip((cc - x0) / (x1 - x0), 0, 1) * drop
    return np.broadcast_to(z, (h, w)).copy()


def test_slope_constant():
    s = horn_slope(raster(np.full((20, 20), 5.0)))
    assert np.all(s.band(0) == 0)


@pytest.mark.parametrize("gx,gy,expect", [(0.5, 0, math.degrees(math.atan(0.5))),
                                          (1.0, 1.0, math.degrees(math.atan(math.sqrt(2))))])
def test_slope_planes(gx, gy, expect):
    s = horn_slope(raster(plane(30, 30, gx, gy))).band(0)
    assert np.abs(s[1:-1, 1:-1] - expect).max() < 0.01
    assert abs(expect - (26.565 if gy == 0 else 54.736)) < 1e-3


@given(st.floats(0, 360), st.floats(0.05, 3.0))
def test_slope_rotation_consistent(angle, mag):
    a = math.radians(angle)
    z = plane(12, 12, mag * math.cos(a), mag * math.sin(a), res=0.5)
    s = horn_slope(raster(z, 0.5)).band(0)[1:-1, 1:-1]
    assert np.abs(s - math.degrees(math.atan(mag))).max() < 0.05


def test_slope_cell_and_nodata():
    z = plane(10, 10, 0.5, 0)
    s = horn_slope(raster(z), cell=2.0).band(0)
    assert abs(s[5, 5] - math.degrees(math.atan(0.25))) < 1e-9
    with pytest.raises(ValueError):
        horn_slope(raster(z), cell=0.0)
    zz = z.astype(np.float32)
    zz[5, 5] = -1.0
    r = GeoRaster(zz[None], GT, nodata=-1.0)
    s = horn_slope(r).band(0)
    assert np.isnan(s[5, 5])
    assert np.nanmax(s) < 90


def test_gaussian_properties():
    k = gaussian_kernel(2.0)
    assert k.size == 13 and abs(k.sum() - 1) < 1e-12
    const = gaussian_smooth(np.full((30, 30), 3.5), 2.0)
    assert np.abs(const - 3.5).max() < 1e-6
    imp = np.zeros((41, 41))
    imp[20, 20] = 1
    out = gaussian_smooth(imp, 2.0)
    assert abs(out.sum() - 1) < 1e-6
    np.testing.assert_allclose(out[20, 14:27], k * k[6], atol=1e-12)
    ramp = np.add.outer(np.arange(50.0), 0.3 * np.arange(60.0))
    sm = gaussian_smooth(ramp, 3.0)
    assert np.abs(sm[10:-10, 10:-10] - ramp[10:-10, 10:-10]).max() < 1e-4
    with pytest.raises(ValueError):
        gaussian_kernel(0)


def test_flat_site_is_empty():
    with pytest.raises(EmptyScarp):
        scarp_from_dem(raster(np.full((60, 60), 10.0)))


def test_ramp_band_mask():
    s = horn_slope(raster(ramp_band()))
    m = extract_scarp(s, 15.0, 5)
    band = np.zeros((200, 200), bool)
    band[:, 80:121] = True
    assert (m.mask ^ band).sum() <= 2 * 5 * 200
    assert m.mask[:, 85:115].all() and not m.mask[:, :70].any() and not m.mask[:, 131:].any()


def test_noise_blobs_removed():
    z = ramp_band()
    for r, c in ((20, 20), (50, 170), (100, 30), (150, 160), (180, 40)):
        z[r:r + 3, c:c + 3] += 4.0
    m = extract_scarp(horn_slope(raster(z)), 15.0, 5)
    assert not m.mask[:, :70].any() and not m.mask[:, 131:].any()


def test_threshold_monotone():
    rng = np.random.default_rng(3)
    z = ramp_band() + gaussian_smooth(rng.normal(0, 0.8, (200, 200)), 2.0)
    s = gaussian_smooth(horn_slope(raster(z)), 2.0)
    prev = None
    for t in (10.0, 15.0, 20.0, 25.0):
        try:
            m = extract_scarp(s, t, 3).mask
        except EmptyScarp:
            m = np.zeros_like(prev)
        if prev is not None:
            assert not (m & ~prev).any()
        prev = m


def test_skeleton_examples():
    one = np.zeros((5, 5), bool)
    one[2, 2] = True
    assert (skeletonize(one) == one).all()
    bar = np.zeros((9, 60), bool)
    bar[3:6, 5:55] = True
    sk = skeletonize(bar)
    assert (sk <= bar).all() and sk.sum() <= bar.sum()
    assert sk[4, 7:53].all() and sk.sum() - sk[4].sum() <= 4
    with pytest.raises(DataError):
        skeletonize(np.zeros((4, 4), bool))


@settings(max_examples=25)
@given(st.integers(0, 2 ** 31))
def test_skeleton_subset_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    m = gaussian_smooth(rng.random((40, 40)), 2.5) > 0.5
    if not m.any():
        return
    sk = skeletonize(m)
    assert not (sk & ~m).any()
    np.testing.assert_array_equal(skeletonize(sk), sk)


def test_strike_examples():
    t = np.linspace(-5, 5, 21)
    s, c, _ = strike_line(np.stack([t, 2 * t], axis=1))
    np.testing.assert_allclose(s, np.array([1, 2]) / math.sqrt(5), atol=1e-12)
    np.testing.assert_allclose(c, np.array([-2, 1]) / math.sqrt(5), atol=1e-12)
    s, c, _ = strike_line(np.stack([t, np.zeros_like(t)], axis=1))
    np.testing.assert_allclose(np.abs(c), [0, 1], atol=1e-12)
    s, _, _ = strike_line(np.array([[0.0, 0.0], [3.0, 4.0]]))
    np.testing.assert_allclose(s, [0.6, 0.8], atol=1e-12)
    with pytest.raises(DataError):
        strike_line(np.array([[1.0, 1.0], [1.0, 1.0]]))


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30))
def test_strike_orthonormal(points):
    pts = np.array(points)
    if np.ptp(pts, axis=0).max() < 1e-6:
        return
    s, c, _ = strike_line(pts)
    assert abs(np.linalg.norm(s) - 1) < 1e-9 and abs(np.linalg.norm(c) - 1) < 1e-9
    assert abs(s @ c) < 1e-9


def test_skeleton_path_ordered():
    bar = np.zeros((5, 30), bool)
    bar[2, 3:27] = True
    p = skeleton_path(bar)
    assert p.shape == (24, 2)
    assert sorted(p[:, 0].tolist()) == list(range(3, 27)) and (p[:, 1] == 2).all()


def test_full_model_on_ramp():
    m = scarp_from_dem(raster(ramp_band(300, 200)), ScarpParams(sigma=2.0))
    assert (m.skeleton <= m.mask).all()
    assert abs(m.strike_deg - 90.0) < 0.5
    assert abs(m.strike @ m.cross_strike) < 1e-12


def _reg_with(masks):
    grid = plan_tiles(200, 200)
    reg = RockRegistry(grid)
    for m in masks:
        reg.register(RegisteredRock(-1, SparseMask.from_dense(m), 1.0, {(0, 0)}))
    return reg


def test_filter_rocks():
    scarp_mask = np.zeros((200, 200), bool)
    scarp_mask[:, 80:121] = True
    scarp = extract_scarp(horn_slope(raster(ramp_band())), 15.0, 0)
    scarp.mask = scarp_mask
    inside = np.zeros((200, 200), bool)
    inside[50:60, 95:105] = True
    outside = np.zeros((200, 200), bool)
    outside[50:60, 10:20] = True
    straddle = np.zeros((200, 200), bool)
    straddle[100:110, 70:100] = True
    reg = _reg_with([inside, outside, straddle])
    kept = filter_rocks(reg, scarp)
    assert sorted(kept.rocks) == [0, 2]
    assert sorted(filter_rocks(kept, scarp).rocks) == [0, 2]
