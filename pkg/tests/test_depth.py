import struct

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from foglane import IngestionError, ParameterError
from foglane.depth import (DepthMap, DepthSource, GroundPlaneModel, load_depth, normalize_depth,
                           read_pfm, save_depth_png, synth_ground_plane_depth, write_pfm)
from foglane.fog import transmittance


def _png16(path, arr):
    assert cv2.imwrite(str(path), np.asarray(arr, dtype=np.uint16))


def test_png16_full_and_zero(tmp_path):
    _png16(tmp_path / "a.png", np.full((4, 5), 65535))
    d = load_depth(tmp_path / "a.png")
    assert d.normalized and np.all(d.values == 1.0)
    _png16(tmp_path / "b.png", np.zeros((4, 5)))
    assert np.all(load_depth(tmp_path / "b.png").values == 0.0)


def test_pfm_big_endian_hand_written(tmp_path):
    # 2x1 map written by hand: bottom scanline first, positive scale = big-endian
    path = tmp_path / "d.pfm"
    path.write_bytes(b"Pf\n1 2\n1.0\n" + struct.pack(">ff", 3.0, 1.0))
    d = load_depth(path)
    assert not d.normalized
    assert d.values.tolist() == [[1.0], [3.0]]


def test_pfm_round_trip(tmp_path):
    vals = np.arange(12, dtype=np.float64).reshape(3, 4) / 2
    write_pfm(tmp_path / "x.pfm", vals)
    assert np.array_equal(read_pfm(tmp_path / "x.pfm"), vals)


def test_load_depth_errors(tmp_path):
    (tmp_path / "d.exr").write_bytes(b"xx")
    with pytest.raises(IngestionError):
        load_depth(tmp_path / "d.exr")
    cv2.imwrite(str(tmp_path / "d8.png"), np.zeros((3, 3), np.uint8))
    with pytest.raises(IngestionError):
        load_depth(tmp_path / "d8.png")
    _png16(tmp_path / "d.png", np.zeros((3, 3)))
    with pytest.raises(IngestionError):
        load_depth(tmp_path / "d.png", expected_shape=(3, 4))


def test_png_save_load_precision(tmp_path):
    vals = np.random.default_rng(0).random((7, 9))
    save_depth_png(tmp_path / "d.png", DepthMap(vals))
    assert np.abs(load_depth(tmp_path / "d.png").values - vals).max() <= 0.5 / 65535 + 1e-12


def test_normalize_examples():
    out = normalize_depth(DepthMap(np.array([[1.0, 3.0]])))
    assert out.normalized
    assert np.allclose(out.values, [[1 / 3, 1.0]])
    assert np.all(normalize_depth(DepthMap(np.zeros((2, 2)))).values == 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(0, 1e3)), st.floats(1e-3, 1e3))
def test_normalize_idempotent_and_scale_invariant(vals, c):
    once = normalize_depth(DepthMap(vals)).values
    assert np.allclose(normalize_depth(DepthMap(once)).values, once, rtol=1e-12, atol=0)
    assert np.allclose(normalize_depth(DepthMap(vals * c)).values, once, rtol=1e-9, atol=1e-12)


def test_depthmap_rejects_negative():
    with pytest.raises(ParameterError):
        DepthMap(np.array([[-1.0]]))


def test_ground_plane_example():
    d = synth_ground_plane_depth(10, 400, GroundPlaneModel(200, scale=100, d_min=0.1, d_max=10))
    assert d.values[300, 0] == pytest.approx(0.1)
    assert np.all(d.values[:201] == 1.0)
    assert np.all(d.values == d.values[:, :1])
    assert d.values[-1, 0] == pytest.approx(100 / 199 / 10)


def test_ground_plane_reaches_near_clamp():
    d = synth_ground_plane_depth(3, 2000, GroundPlaneModel(10, scale=100, d_min=0.1, d_max=10))
    assert d.values[-1, 0] == pytest.approx(0.1 / 10)


@pytest.mark.parametrize("horizon", [-1, 50, 80])
def test_ground_plane_horizon_outside(horizon):
    with pytest.raises(ParameterError):
        synth_ground_plane_depth(10, 50, GroundPlaneModel(horizon))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.floats(0, 0.99), st.floats(1, 500), st.floats(0.1, 8))
def test_ground_plane_monotone(height, frac, k, beta):
    model = GroundPlaneModel(frac * (height - 1), scale=k, d_min=0.1, d_max=10)
    d = synth_ground_plane_depth(4, height, model).values[:, 0]
    assert np.all(np.diff(d) <= 0)
    assert d.min() >= 0.01 - 1e-12 and d.max() <= 1.0
    t = transmittance(d, beta)
    assert np.all(np.diff(t) >= 0)


def test_depth_source_resolution(tmp_path):
    (tmp_path / "sub").mkdir()
    _png16(tmp_path / "sub" / "a.png", np.full((4, 6), 65535))
    src = DepthSource(depth_dir=tmp_path)
    assert np.all(src.depth_for("sub/a.jpg", 4, 6).values == 1.0)
    with pytest.raises(IngestionError):
        src.depth_for("sub/b.jpg", 4, 6)
    fallback = DepthSource(depth_dir=tmp_path, synthetic=True)
    d = fallback.depth_for("sub/b.jpg", 10, 6)
    assert d.values[:5].min() == 1.0  # horizon at 0.4 * 10
    write_pfm(tmp_path / "c.pfm", np.array([[2.0, 4.0]]))
    assert src.depth_for("c.png", 1, 2).values.tolist() == [[0.5, 1.0]]
