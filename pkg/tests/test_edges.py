import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from foglane import ParameterError, ShapeError
from foglane.annotations import Lane, LaneSet
from foglane.edges import (CannyParams, canny, downsample_label, edge_label, gaussian_kernel,
                           gradients, hysteresis, merge_edge_label, render_lane_strokes)

from conftest import road_scene


def step_image():
    img = np.zeros((100, 100, 3))
    img[:, 50:] = 1.0
    return img


def test_uniform_image_has_no_edges():
    for v in (0.0, 0.3, 1.0):
        assert not canny(np.full((40, 50, 3), v)).any()


def test_vertical_step():
    e = canny(step_image())
    assert set(np.flatnonzero(e.any(axis=0))) <= {49, 50, 51}
    assert np.all(e[5:-5].sum(axis=1) == 1)


def test_rotated_step_is_transposed():
    img = step_image()
    assert np.array_equal(canny(img.transpose(1, 0, 2)), canny(img).T)


def test_gaussian_kernel():
    k = gaussian_kernel(1.4)
    assert len(k) == 2 * 5 + 1
    assert k.sum() == pytest.approx(1.0)
    assert np.allclose(k, k[::-1])


def test_gradients_match_reference_convolution():
    # separable smoothing then Sobel equals the full 2-D correlation with replicated borders
    gray = np.random.default_rng(0).random((30, 40)) * 255
    k = gaussian_kernel(1.0)
    smooth = ndimage.correlate(gray, np.outer(k, k), mode="nearest")
    sobel_x = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
    gx, gy = gradients(gray, 1.0)
    assert np.allclose(gx, ndimage.correlate(smooth, sobel_x, mode="nearest"))
    assert np.allclose(gy, ndimage.correlate(smooth, sobel_x.T, mode="nearest"))


def test_hysteresis_connectivity():
    cand = np.zeros((6, 6), bool)
    cand[0, 0] = cand[1, 1] = cand[2, 2] = True  # diagonal chain
    cand[5, 5] = True  # isolated weak
    strong = np.zeros_like(cand)
    strong[0, 0] = True
    out = hysteresis(cand, strong)
    assert out[2, 2] and not out[5, 5]


def test_params_validation():
    with pytest.raises(ParameterError):
        CannyParams(gaussian_sigma=0)
    with pytest.raises(ParameterError):
        CannyParams(low_threshold=150, high_threshold=50)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 140), st.floats(0, 140))
def test_raising_low_threshold_never_adds_edges(seed, lo1, lo2):
    lo1, lo2 = sorted((lo1, lo2))
    img = road_scene(96, 64, seed=seed % 1000)
    a = canny(img, CannyParams(1.4, lo1, 150))
    b = canny(img, CannyParams(1.4, lo2, 150))
    assert not np.any(b & ~a)


# lane strokes and label assembly

def test_render_examples():
    assert not render_lane_strokes(LaneSet(100, 100, [])).any()
    m = render_lane_strokes(LaneSet(100, 100, [Lane([[50, 10], [50, 90]])]), 3)
    assert np.flatnonzero(m.any(axis=0)).tolist() == [49, 50, 51]
    assert np.all(m[10:91, 49:52])
    outside = LaneSet(100, 100, [Lane([[-90, 10], [-60, 90]])])
    assert not render_lane_strokes(outside).any()


masks = st.integers(1, 12).flatmap(lambda h: st.integers(1, 12).flatmap(
    lambda w: st.tuples(*[arrays(bool, (h, w))] * 3)))


@settings(max_examples=60, deadline=None)
@given(masks)
def test_merge_algebra(abc):
    a, b, c = abc
    assert np.array_equal(merge_edge_label(a, b), merge_edge_label(b, a))
    assert np.array_equal(merge_edge_label(merge_edge_label(a, b), c),
                          merge_edge_label(a, merge_edge_label(b, c)))
    assert np.array_equal(merge_edge_label(a, a), a)
    assert np.array_equal(merge_edge_label(a, np.zeros_like(a)), a)
    disjoint = b & ~a
    assert merge_edge_label(a, disjoint).sum() == a.sum() + disjoint.sum()


def test_merge_shape_mismatch():
    with pytest.raises(ShapeError):
        merge_edge_label(np.zeros((3, 3)), np.zeros((3, 4)))


def test_downsample_examples():
    m = np.zeros((4, 4), bool)
    m[3, 2] = True
    out = downsample_label(m, 2)
    assert out.shape == (2, 2) and out.sum() == 1 and out[1, 1]
    assert np.array_equal(downsample_label(m, 1), m)
    assert downsample_label(np.ones((16, 12), bool), 4).all()
    assert downsample_label(np.ones((17, 13), bool), 4).shape == (4, 3)
    with pytest.raises(ParameterError):
        downsample_label(m, 0)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 20), st.integers(1, 20))), st.integers(1, 5))
def test_downsample_is_block_max(m, f):
    out = downsample_label(m, f)
    h, w = m.shape[0] // f, m.shape[1] // f
    assert out.shape == (h, w)
    for i in range(h):
        for j in range(w):
            assert out[i, j] == m[i * f:(i + 1) * f, j * f:(j + 1) * f].any()


def test_edge_label_pipeline():
    img = road_scene(120, 80, seed=2)
    lanes = LaneSet(120, 80, [Lane([[60, 30], [20, 79]])])
    label = edge_label(img, lanes)
    assert label.shape == (80, 120) and label.dtype == bool
    assert np.all(label >= render_lane_strokes(lanes, 3))
    assert np.all(label >= canny(img))
    assert edge_label(img, lanes, factor=4).shape == (20, 30)
