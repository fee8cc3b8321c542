"""Pure-Python/numpy implementations of the hot inner loops.

Same contract as the compiled backend in ``_native.pyx``; selected by
``radeval._kernels`` when the extension is unavailable or when
``RADEVAL_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def _tie_pair_count(sorted_values: np.ndarray) -> int:
    """Sum t*(t-1)/2 over runs of equal consecutive values (input sorted)."""
    n = sorted_values.size
    if n < 2:
        return 0
    boundaries = np.flatnonzero(sorted_values[1:] != sorted_values[:-1])
    run_lengths = np.diff(np.concatenate(([-1], boundaries, [n - 1])))
    return int((run_lengths * (run_lengths - 1) // 2).sum())


def _count_inversions(values: np.ndarray) -> int:
    """Count strict inversions (i < j with values[i] > values[j]).

    Bottom-up merge passes; cross-run counts come from searchsorted, so the
    Python loop only runs over run boundaries.
    """
    buf = np.array(values, dtype=np.float64, copy=True)
    n = buf.size
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n - width, 2 * width):
            mid = lo + width
            hi = min(lo + 2 * width, n)
            left = buf[lo:mid]
            right = buf[mid:hi]
            inversions += int(
                (left.size - np.searchsorted(left, right, side="right")).sum()
            )
            buf[lo:hi] = np.sort(buf[lo:hi], kind="stable")
        width *= 2
    return inversions


def kendall_counts(x, y) -> tuple[int, int, int, int, int]:
    """Pair counts for tie-corrected rank correlation.

    Returns (concordant, discordant, tied_x, tied_y, tied_both) over all
    n*(n-1)/2 index pairs. tied_x / tied_y include jointly tied pairs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n != y.size:
        raise ValueError("x and y must have equal length")
    if n < 2:
        return 0, 0, 0, 0, 0

    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]

    tied_x = _tie_pair_count(xs)
    tied_y = _tie_pair_count(np.sort(y, kind="quicksort"))
    same_pair = (xs[1:] == xs[:-1]) & (ys[1:] == ys[:-1])
    boundaries = np.flatnonzero(~same_pair)
    run_lengths = np.diff(np.concatenate(([-1], boundaries, [n - 1])))
    tied_both = int((run_lengths * (run_lengths - 1) // 2).sum())

    # Within equal-x runs ys is ascending, so inversions only cross runs:
    # they are exactly the pairs with x_i < x_j and y_i > y_j.
    discordant = _count_inversions(ys)
    total = n * (n - 1) // 2
    concordant = total - tied_x - tied_y + tied_both - discordant
    return concordant, discordant, tied_x, tied_y, tied_both


def lcs_len(a, b) -> int:
    """Length of the longest common subsequence of two id sequences.

    Bit-parallel column update; ~w positions per machine word via Python
    big ints.
    """
    a = list(a)
    b = list(b)
    n = len(a)
    if n == 0 or not b:
        return 0
    match_masks: dict[int, int] = {}
    for i, sym in enumerate(a):
        match_masks[sym] = match_masks.get(sym, 0) | (1 << i)
    full = (1 << n) - 1
    v = full
    for sym in b:
        m = match_masks.get(sym, 0)
        u = v & m
        v = ((v + u) | (v - u)) & full
    return n - bin(v).count("1")
