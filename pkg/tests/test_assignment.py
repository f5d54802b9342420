import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from foglane.assignment import solve

from conftest import brute_assignment


def test_two_by_two_example():
    assert solve([[0.9, 0.6], [0.7, 0.8]], np.ones((2, 2), bool)) == [(0, 0), (1, 1)]


def test_count_beats_total():
    # one strong pair would block two weaker ones
    scores = [[0.99, 0.6], [0.6, 0.0]]
    valid = [[True, True], [True, False]]
    assert solve(scores, valid) == [(0, 1), (1, 0)]


def test_equal_totals_take_smallest_pairs():
    scores = [[0.5, 0.5], [0.5, 0.5]]
    assert solve(scores, np.ones((2, 2), bool)) == [(0, 0), (1, 1)]


def test_exact_sum_ties():
    # 0.1 + 0.2 and 0.3 differ in binary; exact sums keep them apart
    scores = [[0.1, 0.3], [0.2, 0.0]]
    valid = [[True, True], [True, False]]
    assert solve(scores, valid) == brute_assignment(scores, valid)


def test_empty_and_invalid():
    assert solve(np.zeros((0, 3)), np.zeros((0, 3), bool)) == []
    assert solve(np.ones((2, 2)), np.zeros((2, 2), bool)) == []
    with pytest.raises(ValueError):
        solve(np.ones((2, 2)), np.ones((2, 3), bool))


def test_wide_matrix_transposed():
    rng = np.random.default_rng(0)
    scores = rng.random((3, 20))
    valid = scores > 0.5
    pairs = solve(scores, valid)
    cols = [c for _, c in pairs]
    assert len(set(cols)) == len(cols) == 3
    assert all(valid[r, c] for r, c in pairs)


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.data())
def test_matches_exhaustive_enumeration(n, m, data):
    grid = st.sampled_from([0.0, 0.25, 0.5, 0.5, 0.75, 1.0]) | st.floats(0, 1, allow_nan=False)
    scores = data.draw(arrays(np.float64, (n, m), elements=grid))
    valid = data.draw(arrays(bool, (n, m)))
    assert solve(scores, valid) == brute_assignment(scores, valid)
