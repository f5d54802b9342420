"""Exact one-to-one matching for the small matrices met in lane evaluation.

Objective, in order: most pairs, then the largest total score, then the
lexicographically smallest list of ``(row, col)`` pairs. Only entries marked
valid may be paired. Scores are summed as exact rationals so that ties are
real ties, independent of floating-point summation order.
"""
from fractions import Fraction
from functools import lru_cache

import numpy as np

# 2**MAX_COLS subsets per row are enumerated
MAX_COLS = 16


def solve(scores, valid):
    """Return the optimal pair list for a score matrix and validity mask.

    >>> solve([[0.9, 0.6], [0.7, 0.8]], [[True, True], [True, True]])
    [(0, 0), (1, 1)]
    """
    scores = np.asarray(scores, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if scores.ndim != 2 or scores.shape != valid.shape:
        raise ValueError("scores and valid must be matching 2-D arrays")
    n_rows, n_cols = scores.shape
    if n_rows == 0 or n_cols == 0 or not valid.any():
        return []
    if n_cols > MAX_COLS:
        if n_rows <= MAX_COLS:
            return sorted((r, c) for c, r in solve(scores.T, valid.T))
        raise ValueError(f"matrices larger than {MAX_COLS}x{MAX_COLS} are not supported")

    exact = [[Fraction(float(v)) for v in row] for row in scores]
    options = [[c for c in range(n_cols) if valid[r, c]] for r in range(n_rows)]

    @lru_cache(maxsize=None)
    def best(row, used):
        # -> (count, total, pairs) for rows ``row..`` with columns in ``used`` taken
        if row == n_rows:
            return 0, Fraction(0), ()
        count, total, pairs = best(row + 1, used)
        for col in options[row]:
            if used >> col & 1:
                continue
            sub_count, sub_total, sub_pairs = best(row + 1, used | (1 << col))
            cand = (sub_count + 1, sub_total + exact[row][col], ((row, col),) + sub_pairs)
            if (cand[0], cand[1]) > (count, total) or (
                    (cand[0], cand[1]) == (count, total) and cand[2] < pairs):
                count, total, pairs = cand
        return count, total, pairs

    return list(best(0, 0)[2])
