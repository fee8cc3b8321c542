"""Kernel backends against brute-force oracles and against each other."""

import importlib
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radeval import _kernels
from radeval._kernels import pure


def native_or_skip():
    try:
        return importlib.import_module("radeval._kernels._native")
    except ImportError:
        pytest.skip("compiled backend not built")


def brute_kendall_counts(x, y):
    """O(n^2) pair enumeration; the oracle the fast kernels must match."""
    n = len(x)
    concordant = discordant = tied_x = tied_y = tied_both = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = int(x[i] > x[j]) - int(x[i] < x[j])
            dy = int(y[i] > y[j]) - int(y[i] < y[j])
            if dx == 0 or dy == 0:
                if dx == 0:
                    tied_x += 1
                if dy == 0:
                    tied_y += 1
                if dx == 0 and dy == 0:
                    tied_both += 1
            elif dx == dy:
                concordant += 1
            else:
                discordant += 1
    return concordant, discordant, tied_x, tied_y, tied_both


def brute_lcs(a, b):
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return rec(0, 0)


KENDALL_EDGE_CASES = [
    ([1, 2], [1, 2]),
    ([1, 2], [2, 1]),
    ([1, 1], [1, 2]),
    ([1, 1, 1], [1, 1, 1]),
    ([1, 1, 2], [1, 2, 2]),
    ([3, 1, 4, 1, 5], [2, 7, 1, 8, 2]),
]


@pytest.mark.parametrize("x,y", KENDALL_EDGE_CASES)
def test_kendall_counts_edge_cases(x, y):
    assert pure.kendall_counts(x, y) == brute_kendall_counts(x, y)


def test_kendall_counts_random_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(2, 40))
        x = rng.integers(0, 8, size=n).astype(float)
        y = rng.integers(0, 8, size=n).astype(float)
        assert pure.kendall_counts(x, y) == brute_kendall_counts(x, y)


def test_kendall_counts_total_partition():
    # the five counts must partition all n(n-1)/2 pairs
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        x = rng.integers(0, 4, size=n).astype(float)
        y = rng.integers(0, 4, size=n).astype(float)
        c, d, tx, ty, tb = pure.kendall_counts(x, y)
        assert c + d + tx + ty - tb == n * (n - 1) // 2


@given(st.lists(st.integers(0, 5), min_size=2, max_size=25),
       st.lists(st.integers(0, 5), min_size=2, max_size=25))
def test_kendall_counts_hypothesis(xs, ys):
    n = min(len(xs), len(ys))
    x, y = xs[:n], ys[:n]
    assert pure.kendall_counts(x, y) == brute_kendall_counts(x, y)


def test_kendall_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        pure.kendall_counts([1, 2], [1, 2, 3])


def test_lcs_known_values():
    assert pure.lcs_len([], []) == 0
    assert pure.lcs_len([1], []) == 0
    assert pure.lcs_len([1, 2, 3], [1, 2, 3]) == 3
    assert pure.lcs_len([1, 2, 3], [3, 2, 1]) == 1
    assert pure.lcs_len([1, 2, 3, 4], [2, 4]) == 2


def test_lcs_random_matches_recursive_oracle():
    rng = np.random.default_rng(17)
    for _ in range(200):
        la, lb = int(rng.integers(0, 30)), int(rng.integers(0, 30))
        a = rng.integers(0, 5, size=la).tolist()
        b = rng.integers(0, 5, size=lb).tolist()
        assert pure.lcs_len(a, b) == brute_lcs(a, b)


def test_lcs_long_sequences_cross_word_boundary():
    # > 64 symbols exercises the multi-word big-int path
    rng = np.random.default_rng(23)
    a = rng.integers(0, 3, size=150).tolist()
    b = rng.integers(0, 3, size=140).tolist()
    assert pure.lcs_len(a, b) == brute_lcs(a, b)


@given(st.lists(st.integers(0, 3), max_size=20),
       st.lists(st.integers(0, 3), max_size=20))
def test_lcs_hypothesis(a, b):
    got = pure.lcs_len(a, b)
    assert got == brute_lcs(a, b)
    assert got == pure.lcs_len(b, a)
    assert got <= min(len(a), len(b))


def test_backends_agree_on_random_inputs():
    native = native_or_skip()
    rng = np.random.default_rng(29)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
        assert tuple(native.kendall_counts(x, y)) == pure.kendall_counts(x, y)
        a = rng.integers(0, 5, size=int(rng.integers(0, 80))).tolist()
        b = rng.integers(0, 5, size=int(rng.integers(0, 80))).tolist()
        assert native.lcs_len(a, b) == pure.lcs_len(a, b)


def test_dispatch_exports_one_backend():
    assert _kernels.BACKEND in ("pure", "native")
    assert callable(_kernels.kendall_counts)
    assert callable(_kernels.lcs_len)
