"""Hot numeric kernels: segmental DP, boundary matching, threshold grid search.

Kernels are JIT-compiled with numba by default.  Set ATTNSEG_NO_NUMBA=1 to
force the pure NumPy fallbacks (also used automatically when numba is not
importable).  Both backends produce bit-identical results; see
benchmarks/bench_kernels.py for the speed comparison.

The segmental DP works on a suffix-value table and accumulates path
objectives strictly right-to-left, so a path's objective is the same float
no matter which backend (or the brute-force oracle) computed it.
Reconstruction walks forward picking the smallest feasible segment end that
attains the table value, which yields the lexicographically smallest
boundary sequence among optimal paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "ATTNSEG_NO_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes"}


try:
    from numba import njit

    _NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    _NUMBA_AVAILABLE = False

USE_NUMBA = _NUMBA_AVAILABLE and not _env_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


def column_prefix_sums(weights: np.ndarray) -> np.ndarray:
    """(T+1) x K cumulative column sums with a leading zero row.

    ``prefix[t, k] - prefix[s - 1, k]`` is the mass of column k over the
    1-based inclusive span [s, t].  Every consumer of the segmental
    objective must draw span masses from this one matrix so that float
    results agree exactly across code paths.
    """
    t_len, n_cols = weights.shape
    prefix = np.zeros((t_len + 1, n_cols), dtype=np.float64)
    np.cumsum(weights, axis=0, out=prefix[1:])
    return prefix


# ---------------------------------------------------------------------------
# segmental DP
# ---------------------------------------------------------------------------

def _segmental_dp_loops(prefix, max_len):
    """Scalar-loop segmental DP; numba-compilable.

    prefix: (T+1) x K column prefix sums.
    max_len: largest allowed segment length, already clipped to T.

    Returns (ends, objective): the 1-based end positions of the K segments
    and the total covered mass.  Infeasible inputs yield an empty ends
    array and -inf.
    """
    t_len = prefix.shape[0] - 1
    n_cols = prefix.shape[1]
    neg = -np.inf
    # suffix[k, t]: best mass of segments k+1..K covering input t+1..T
    suffix = np.full((n_cols + 1, t_len + 1), neg)
    suffix[n_cols, t_len] = 0.0
    for k in range(n_cols - 1, -1, -1):
        for t in range(t_len + 1):
            hi = t + max_len
            if hi > t_len:
                hi = t_len
            best = neg
            for t2 in range(t + 1, hi + 1):
                v = (prefix[t2, k] - prefix[t, k]) + suffix[k + 1, t2]
                if v > best:
                    best = v
            suffix[k, t] = best
    objective = suffix[0, 0]
    ends = np.empty(n_cols, dtype=np.int64)
    if objective == neg:
        return ends[:0], neg
    t = 0
    for k in range(n_cols):
        target = suffix[k, t]
        hi = t + max_len
        if hi > t_len:
            hi = t_len
        nxt = -1
        for t2 in range(t + 1, hi + 1):
            v = (prefix[t2, k] - prefix[t, k]) + suffix[k + 1, t2]
            if v == target:
                nxt = t2
                break
        ends[k] = nxt
        t = nxt
    return ends, objective


def _segmental_dp_numpy(prefix, max_len):
    """Vectorized-inner-loop variant of _segmental_dp_loops."""
    t_len = prefix.shape[0] - 1
    n_cols = prefix.shape[1]
    neg = -np.inf
    suffix = np.full((n_cols + 1, t_len + 1), neg)
    suffix[n_cols, t_len] = 0.0
    for k in range(n_cols - 1, -1, -1):
        col = prefix[:, k]
        nxt_row = suffix[k + 1]
        for t in range(t_len + 1):
            hi = min(t + max_len, t_len)
            if hi <= t:
                continue
            cand = (col[t + 1 : hi + 1] - col[t]) + nxt_row[t + 1 : hi + 1]
            suffix[k, t] = cand.max()
    objective = suffix[0, 0]
    if objective == neg:
        return np.empty(0, dtype=np.int64), neg
    ends = np.empty(n_cols, dtype=np.int64)
    t = 0
    for k in range(n_cols):
        hi = min(t + max_len, t_len)
        col = prefix[:, k]
        cand = (col[t + 1 : hi + 1] - col[t]) + suffix[k + 1, t + 1 : hi + 1]
        hits = np.nonzero(cand == suffix[k, t])[0]
        # first candidate attaining the table value = leftmost boundary
        t = t + 1 + int(hits[0])
        ends[k] = t
    return ends, objective


# ---------------------------------------------------------------------------
# boundary matching
# ---------------------------------------------------------------------------

def _match_count_loops(hyp, ref, window):
    """Size of the maximum one-to-one matching within +/- window.

    Both position arrays must be strictly increasing.  Greedily assigning
    each reference (left to right) the leftmost unused hypothesis in range
    is optimal for this interval adjacency, so the count is symmetric in
    the two arguments and non-decreasing in the window.
    """
    n_hyp = hyp.shape[0]
    matched = 0
    i = 0
    for j in range(ref.shape[0]):
        r = ref[j]
        while i < n_hyp and hyp[i] < r - window:
            i += 1
        if i < n_hyp and hyp[i] <= r + window:
            matched += 1
            i += 1
    return matched


# ---------------------------------------------------------------------------
# threshold grid search
# ---------------------------------------------------------------------------
#
# Span rule per output column: outside a span, a weight > tau_onset opens
# one at t; inside, a weight < tau_offset closes it at t - 1 (the same step
# may immediately reopen); a span still open at T closes at T.  A span
# (onset, offset) contributes the boundary positions onset - 1 and offset,
# clipped to [1, T - 1].  Note both the opening step and the closing step
# mark position t - 1, which the kernels exploit.

def _threshold_grid_counts_loops(weights, ref, grid, window):
    """Matched/hypothesized boundary counts for every (onset, offset) pair.

    weights: T x K map; ref: strictly increasing reference positions;
    grid: candidate threshold values.  Returns int64 [G, G, 2] where
    out[i, j] = (matched, n_hyp) for tau_onset = grid[i],
    tau_offset = grid[j].  The matching loop is inlined so the whole kernel
    compiles as one nopython unit.
    """
    t_len, n_cols = weights.shape
    g = grid.shape[0]
    out = np.zeros((g, g, 2), dtype=np.int64)
    mask = np.zeros(t_len + 1, dtype=np.bool_)
    buf = np.empty(t_len + 1, dtype=np.int64)
    n_ref = ref.shape[0]
    for i in range(g):
        tau_on = grid[i]
        for j in range(g):
            tau_off = grid[j]
            for p in range(t_len + 1):
                mask[p] = False
            for k in range(n_cols):
                inside = False
                start = 0
                for t in range(1, t_len + 1):
                    w = weights[t - 1, k]
                    if inside and w < tau_off:
                        if start > 1:
                            mask[start - 1] = True
                        mask[t - 1] = True
                        inside = False
                    if not inside and w > tau_on:
                        inside = True
                        start = t
                if inside and start > 1:
                    mask[start - 1] = True
                    # the offset of a span open at T is the edge: excluded
            cnt = 0
            for p in range(1, t_len):
                if mask[p]:
                    buf[cnt] = p
                    cnt += 1
            matched = 0
            h = 0
            for r_i in range(n_ref):
                r = ref[r_i]
                while h < cnt and buf[h] < r - window:
                    h += 1
                if h < cnt and buf[h] <= r + window:
                    matched += 1
                    h += 1
            out[i, j, 0] = matched
            out[i, j, 1] = cnt
    return out


def _span_boundary_mask_numpy(col, tau_on, tau_off):
    """Boundary-position mask for one column, vectorized over time.

    The scan state (inside a span after step t) satisfies
    s_t = a_t or (s_{t-1} and b_t) with a = (w > tau_on) and
    b = a or (w >= tau_off); equivalently s is true from the first open
    within each maximal run of b.  Both open and close events at step t
    mark boundary position t - 1, so the mask index equals the position.
    """
    t_len = col.shape[0]
    a = col > tau_on
    b = a | (col >= tau_off)
    idx = np.arange(t_len)
    last_not_b = np.maximum.accumulate(np.where(~b, idx, -1))
    cum_a = np.cumsum(a)
    base = np.where(last_not_b >= 0, cum_a[np.maximum(last_not_b, 0)], 0)
    s = (cum_a - base) > 0
    s_prev = np.empty(t_len, dtype=np.bool_)
    s_prev[0] = False
    s_prev[1:] = s[:-1]
    close = s_prev & (col < tau_off)
    onset = a & (close | ~s_prev)
    mark = onset | close
    mark[0] = False  # position 0 is the utterance edge
    return mark      # mark[p] == boundary at position p, p in 1..T-1


def _threshold_grid_counts_numpy(weights, ref, grid, window):
    """NumPy fallback of _threshold_grid_counts_loops (identical output)."""
    t_len, n_cols = weights.shape
    g = grid.shape[0]
    out = np.zeros((g, g, 2), dtype=np.int64)
    for i in range(g):
        tau_on = grid[i]
        for j in range(g):
            tau_off = grid[j]
            mark = np.zeros(t_len, dtype=np.bool_)
            for k in range(n_cols):
                mark |= _span_boundary_mask_numpy(weights[:, k], tau_on, tau_off)
            hyp = np.nonzero(mark)[0].astype(np.int64)
            out[i, j, 0] = _match_count_loops(hyp, ref, window)
            out[i, j, 1] = hyp.shape[0]
    return out


if USE_NUMBA:
    segmental_dp = njit(cache=True)(_segmental_dp_loops)
    match_count = njit(cache=True)(_match_count_loops)
    threshold_grid_counts = njit(cache=True)(_threshold_grid_counts_loops)
else:
    segmental_dp = _segmental_dp_numpy
    match_count = _match_count_loops
    threshold_grid_counts = _threshold_grid_counts_numpy
