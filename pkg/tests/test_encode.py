import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rocktraits.encode import (JET, ColormapSpec, ElevationScale, colormap_elevation, relative_elevation,
                               scale_elevation, to_uint8)
from rocktraits.georaster import GeoRaster, GeoTransform

GT = GeoTransform(0.0, 0.0, 0.02, 0.02)


def dem(values, nodata=None, dtype=np.float32):
    return GeoRaster(np.asarray(values, dtype=dtype)[None], GT, nodata)


def test_scale_examples():
    s = ElevationScale(1200.0, 1230.0)
    assert scale_elevation(1200.0, s) == 0.0
    assert scale_elevation(1230.0, s) == 1.0
    assert scale_elevation(1215.0, s) == 0.5
    assert scale_elevation(1100.0, s) == 0.0 and scale_elevation(1300.0, s) == 1.0


def test_scale_window_invalid():
    with pytest.raises(ValueError):
        ElevationScale(5.0, 5.0)


@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=50))
def test_scale_monotone(values):
    s = ElevationScale(-100.0, 250.0)
    v = np.sort(np.array(values))
    out = scale_elevation(v, s)
    assert (np.diff(out) >= 0).all()
    assert ((out >= 0) & (out <= 1)).all()


def test_jet_endpoints_exact():
    s = ElevationScale(10.0, 20.0)
    lo = colormap_elevation(dem(np.full((3, 3), 10.0)), s)
    hi = colormap_elevation(dem(np.full((3, 3), 20.0)), s)
    assert (lo.data[:, 0, 0] == [0.0, 0.0, 0.5]).all()
    assert (hi.data[:, 0, 0] == [0.5, 0.0, 0.0]).all()


def test_jet_breakpoints():
    for t, rgb in JET.breakpoints:
        assert JET(t).tolist() == list(rgb)


def test_relative_non_injective():
    s = ElevationScale(0.0, 1.0)
    a = relative_elevation(colormap_elevation(dem([[0.0]]), s)).data[0, 0, 0]
    b = relative_elevation(colormap_elevation(dem([[1.0]]), s)).data[0, 0, 0]
    assert a == pytest.approx(1 / 6, abs=1e-6)
    assert a == b


def test_relative_is_channel_mean(rng):
    d = dem(rng.normal(1200, 10, (30, 30)))
    rgb = colormap_elevation(d)
    rel = relative_elevation(rgb)
    assert (rel.data[0] == (rgb.data[0] + rgb.data[1] + rgb.data[2]) / 3.0).all()


def test_relative_band_permutation(rng):
    rgb = GeoRaster(rng.random((3, 8, 8)), GT)
    a = relative_elevation(rgb).data
    b = relative_elevation(rgb.with_data(rgb.data[[2, 0, 1]])).data
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_relative_band_count():
    with pytest.raises(ValueError):
        relative_elevation(GeoRaster(np.zeros((2, 3, 3)), GT))


@given(st.floats(-5000, 5000))
def test_translation_invariance(offset):
    base = np.linspace(1200, 1230, 120).reshape(10, 12)
    # float64 so the shift itself is exact enough
    a = colormap_elevation(dem(base, dtype=np.float64))
    b = colormap_elevation(dem(base + offset, dtype=np.float64))
    assert np.abs(a.data - b.data).max() < 1e-6
    assert np.abs(relative_elevation(a).data - relative_elevation(b).data).max() < 1e-6


def test_nodata_black_and_flagged():
    d = dem([[1.0, -9999.0], [3.0, 4.0]], nodata=-9999.0)
    out = colormap_elevation(d)
    assert out.data[:, 0, 1].tolist() == [0.0, 0.0, 0.0]
    assert out.metadata["nodata_pixels"] == "1"
    assert float(out.metadata["h_min"]) == 1.0 and float(out.metadata["h_max"]) == 4.0


def test_channels_in_unit_interval(rng):
    out = colormap_elevation(dem(rng.normal(0, 100, (20, 20))), ElevationScale(-50, 50))
    assert out.data.min() >= 0 and out.data.max() <= 1


def test_multiband_rejected():
    with pytest.raises(ValueError):
        colormap_elevation(GeoRaster(np.zeros((2, 3, 3)), GT))


def test_colormap_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        ColormapSpec(((0.0, (0, 0, 0)), (0.5, (1, 1, 1))))
    with pytest.raises(ValueError):
        ColormapSpec(((0.0, (0, 0, 0)), (0.0, (1, 1, 1)), (1.0, (1, 1, 1))))
    p = tmp_path / "grey.json"
    p.write_text(json.dumps([[0, [0, 0, 0]], [1, [1, 1, 1]]]))
    grey = ColormapSpec.load(p)
    assert grey(0.25).tolist() == [0.25, 0.25, 0.25]


def test_to_uint8():
    r = GeoRaster(np.array([[[0.0, 0.5, 1.0]]]), GT)
    assert to_uint8(r).data.tolist() == [[[0, 128, 255]]]
