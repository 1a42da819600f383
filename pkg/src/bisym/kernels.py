"""Floating-point hot loops.

Two kernels with identical outputs, one compiled with numba and one in plain
numpy.  The numba path is used when numba imports and ``BISYM_NUMBA`` is not
set to ``0``.  Results of these kernels are only ever used as conservative
prefilters; every accepted value is re-checked exactly by the caller.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False


def numba_enabled() -> bool:
    flag = os.environ.get("BISYM_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "no", "off")


# --------------------------------------------------------------------------
# pruned tuple expansion
# --------------------------------------------------------------------------

def _expand_tuples_py(vals, lens, alphas, bound):
    n = vals.shape[0]
    if n == 0 or np.any(lens == 0):
        return np.empty((0, n), dtype=np.int64)
    min_rest = np.zeros(n + 1)
    for k in range(n - 1, -1, -1):
        min_rest[k] = min_rest[k + 1] + alphas[k] * vals[k, 0]
    sums = np.zeros(1)
    idx = np.empty((1, 0), dtype=np.int64)
    for k in range(n):
        col = alphas[k] * vals[k, : lens[k]]
        cand = sums[:, None] + col[None, :]
        keep = cand + min_rest[k + 1] <= bound
        rows, cols = np.nonzero(keep)
        sums = cand[rows, cols]
        idx = np.concatenate([idx[rows], cols[:, None].astype(np.int64)], axis=1)
        if sums.size == 0:
            return np.empty((0, n), dtype=np.int64)
    return idx


def _expand_tuples_nb_impl(vals, lens, alphas, bound):
    n = vals.shape[0]
    if n == 0:
        return np.empty((0, n), dtype=np.int64)
    for k in range(n):
        if lens[k] == 0:
            return np.empty((0, n), dtype=np.int64)
    min_rest = np.zeros(n + 1)
    for k in range(n - 1, -1, -1):
        min_rest[k] = min_rest[k + 1] + alphas[k] * vals[k, 0]
    cap = 1024
    out = np.empty((cap, n), dtype=np.int64)
    count = 0
    idx = np.zeros(n, dtype=np.int64)
    ps = np.zeros(n + 1)
    k = 0
    last = n - 1
    while True:
        if k == last:
            # the last axis is scanned in one pass; each fitting index is a tuple
            j = idx[k]
            while j < lens[k] and ps[k] + alphas[k] * vals[k, j] + min_rest[n] <= bound:
                j += 1
            m = j - idx[k]
            if count + m > cap:
                while count + m > cap:
                    cap *= 2
                grown = np.empty((cap, n), dtype=np.int64)
                grown[:count] = out[:count]
                out = grown
            for t in range(m):
                for q in range(last):
                    out[count + t, q] = idx[q]
                out[count + t, last] = idx[k] + t
            count += m
            if k == 0:
                break
            k -= 1
            idx[k] += 1
            continue
        placed = False
        if idx[k] < lens[k]:
            s = ps[k] + alphas[k] * vals[k, idx[k]]
            if s + min_rest[k + 1] <= bound:
                placed = True
                ps[k + 1] = s
                k += 1
                idx[k] = 0
        if not placed:
            # values along each axis ascend, so nothing further on this axis fits
            if k == 0:
                break
            k -= 1
            idx[k] += 1
    return out[:count].copy()


if HAVE_NUMBA:
    _expand_tuples_nb = njit(cache=True, nogil=True)(_expand_tuples_nb_impl)
else:  # pragma: no cover
    _expand_tuples_nb = _expand_tuples_nb_impl


def expand_tuples(columns, alphas, bound, use_numba=None):
    """All index tuples ``(i_1..i_n)`` with ``sum(alphas[k]*columns[k][i_k]) <= bound``.

    ``columns`` are ascending float arrays of positive values.  Tuples come
    out in lexicographic order on both backends.
    """
    if use_numba is None:
        use_numba = numba_enabled()
    n = len(columns)
    lens = np.array([len(c) for c in columns], dtype=np.int64)
    width = int(lens.max()) if n else 0
    vals = np.full((n, max(width, 1)), np.inf)
    for k, c in enumerate(columns):
        vals[k, : len(c)] = c
    alphas = np.asarray(alphas, dtype=np.float64)
    if use_numba:
        return _expand_tuples_nb(vals, lens, alphas, float(bound))
    return _expand_tuples_py(vals, lens, alphas, float(bound))


# --------------------------------------------------------------------------
# staircase evaluation
# --------------------------------------------------------------------------

def _staircase_py(points, radius, s):
    n = points.shape[0]
    lo = np.searchsorted(points + radius, s, side="right")
    hi = np.searchsorted(points - radius, s, side="left")
    partial = np.zeros_like(s)
    # at most one ramp is active at any s because radius <= half the spacing
    active = hi > lo
    j = lo[active]
    partial[active] = (s[active] - (points[j] - radius)) / (2.0 * radius)
    return (lo + partial) / n


def _staircase_nb_impl(points, radius, s):
    n = points.shape[0]
    out = np.empty(s.shape[0])
    j = 0
    for i in range(s.shape[0]):
        x = s[i]
        while j < n and points[j] + radius <= x:
            j += 1
        val = float(j)
        if j < n and points[j] - radius < x:
            val += (x - (points[j] - radius)) / (2.0 * radius)
        out[i] = val / n
    return out


if HAVE_NUMBA:
    _staircase_nb = njit(cache=True, nogil=True)(_staircase_nb_impl)
else:  # pragma: no cover
    _staircase_nb = _staircase_nb_impl


def staircase_values(points, radius, s, use_numba=None):
    """Rank-CDF staircase with linear ramps of half-width ``radius``.

    ``points`` ascending in (0, 1), ``s`` ascending sample abscissae.
    """
    if use_numba is None:
        use_numba = numba_enabled()
    points = np.ascontiguousarray(points, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    if use_numba:
        return _staircase_nb(points, float(radius), s)
    return _staircase_py(points, float(radius), s)
