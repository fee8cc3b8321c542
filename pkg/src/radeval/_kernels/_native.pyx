# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops: pair counting for rank correlation and LCS length."""

from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

import numpy as np

BACKEND = "native"


cdef long long _merge_count(double* buf, double* tmp, Py_ssize_t n) noexcept:
    """Iterative merge sort of buf counting strict inversions."""
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    cdef long long inversions = 0
    while width < n:
        lo = 0
        while lo < n - width:
            mid = lo + width
            hi = lo + 2 * width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if buf[j] < buf[i]:
                    inversions += mid - i
                    tmp[k] = buf[j]
                    j += 1
                else:
                    tmp[k] = buf[i]
                    i += 1
                k += 1
            while i < mid:
                tmp[k] = buf[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = buf[j]
                j += 1
                k += 1
            memcpy(buf + lo, tmp + lo, (hi - lo) * sizeof(double))
            lo += 2 * width
        width *= 2
    return inversions


cdef long long _tie_pairs(double[::1] sorted_values) noexcept:
    cdef Py_ssize_t n = sorted_values.shape[0], i
    cdef long long total = 0, run = 1
    for i in range(1, n):
        if sorted_values[i] == sorted_values[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


def kendall_counts(x, y):
    """Pair counts for tie-corrected rank correlation.

    Returns (concordant, discordant, tied_x, tied_y, tied_both) over all
    n*(n-1)/2 index pairs. tied_x / tied_y include jointly tied pairs.
    """
    cdef double[::1] xs, ys, ys_sorted
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y must have equal length")
    if n < 2:
        return 0, 0, 0, 0, 0

    order = np.lexsort((y, x))
    xs = np.ascontiguousarray(x[order])
    ys = np.ascontiguousarray(y[order])
    ys_sorted = np.sort(y)

    cdef long long tied_x = _tie_pairs(xs)
    cdef long long tied_y = _tie_pairs(ys_sorted)

    cdef long long tied_both = 0, run = 1
    cdef Py_ssize_t i
    for i in range(1, n):
        if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
            run += 1
        else:
            tied_both += run * (run - 1) // 2
            run = 1
    tied_both += run * (run - 1) // 2

    # Within equal-x runs ys is ascending, so inversions only cross runs:
    # they are exactly the pairs with x_i < x_j and y_i > y_j.
    cdef double* buf = <double*> malloc(n * sizeof(double))
    cdef double* tmp = <double*> malloc(n * sizeof(double))
    if buf == NULL or tmp == NULL:
        free(buf)
        free(tmp)
        raise MemoryError()
    memcpy(buf, &ys[0], n * sizeof(double))
    cdef long long discordant = _merge_count(buf, tmp, n)
    free(buf)
    free(tmp)

    cdef long long total = <long long> n * (n - 1) // 2
    cdef long long concordant = total - tied_x - tied_y + tied_both - discordant
    return concordant, discordant, tied_x, tied_y, tied_both


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def lcs_len(a, b):
    """Length of the longest common subsequence of two id sequences.

    Bit-parallel column update over 64-bit words; u = v & mask[sym],
    v' = ((v + u) | (v - u)) truncated to n bits, answer n - popcount(v).
    """
    cdef const int[::1] av = np.ascontiguousarray(a, dtype=np.int32)
    cdef const int[::1] bv = np.ascontiguousarray(b, dtype=np.int32)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0]
    if n == 0 or m == 0:
        return 0

    cdef Py_ssize_t words = (n + 63) >> 6
    dense = {}
    cdef Py_ssize_t i
    for i in range(n):
        if av[i] not in dense:
            dense[av[i]] = len(dense)
    cdef Py_ssize_t n_sym = len(dense)

    cdef unsigned long long* masks = <unsigned long long*> malloc(
        n_sym * words * sizeof(unsigned long long))
    cdef unsigned long long* v = <unsigned long long*> malloc(
        words * sizeof(unsigned long long))
    cdef long long* b_ids = <long long*> malloc(m * sizeof(long long))
    if masks == NULL or v == NULL or b_ids == NULL:
        free(masks)
        free(v)
        free(b_ids)
        raise MemoryError()

    cdef Py_ssize_t w, j, base
    for w in range(n_sym * words):
        masks[w] = 0
    for i in range(n):
        masks[<Py_ssize_t> dense[av[i]] * words + (i >> 6)] |= 1ULL << (i & 63)
    for j in range(m):
        b_ids[j] = dense.get(bv[j], -1)

    cdef unsigned long long top_mask = ~0ULL
    if n & 63:
        top_mask = (1ULL << (n & 63)) - 1
    for w in range(words):
        v[w] = ~0ULL
    v[words - 1] = top_mask

    cdef unsigned long long vv, u_w, s1, s2, d1, carry, borrow, c_next, b_next
    with nogil:
        for j in range(m):
            if b_ids[j] < 0:
                continue
            base = <Py_ssize_t> b_ids[j] * words
            carry = 0
            borrow = 0
            for w in range(words):
                vv = v[w]
                u_w = vv & masks[base + w]
                s1 = vv + u_w
                c_next = 1 if s1 < vv else 0
                s2 = s1 + carry
                if s2 < s1:
                    c_next = 1
                # vv - u_w never underflows (u_w is a submask of vv)
                d1 = vv - u_w
                b_next = 1 if d1 < borrow else 0
                v[w] = s2 | (d1 - borrow)
                carry = c_next
                borrow = b_next
            v[words - 1] &= top_mask

    cdef long long survivors = 0
    for w in range(words):
        survivors += __builtin_popcountll(v[w])
    free(masks)
    free(v)
    free(b_ids)
    return <long long> n - survivors
