"""Attention-to-segmentation postprocessing.

Three strategies turn a validated attention map into hypothesized word
boundaries:

* hard assignment: align each output step to its argmax input step and put a
  boundary wherever consecutive outputs align to different input words
  (requires words on the input side);
* thresholding: per word column, open an input span when the weight rises
  above tau_onset and close it when the weight falls below tau_offset
  (requires words on the output side); spans convert to boundary positions;
* segmental assignment: the connected, monotone K-segmentation of the input
  maximizing the total attention mass each segment covers in its own output
  column, found by dynamic programming over column prefix sums in
  O(T * K * max_segment_len) time.

``brute_force_segmental`` enumerates every feasible segmentation and serves
as the independent oracle for the DP.  Both resolve ties identically
(lexicographically smallest boundary sequence) and accumulate a path's
objective right-to-left from the same prefix-sum matrix, so their results
are comparable with exact float equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .core import (
    AttentionMap,
    BoundarySet,
    Segment,
    Segmentation,
    Unit,
    boundary_unit_for,
)
from .errors import EmptyDevSet, Infeasible, TooLarge, WrongDirection
from .evaluate import MatchConfig, prf

#: Size guards for the exhaustive segmental solver.
BRUTE_FORCE_MAX_INPUT = 14
BRUTE_FORCE_MAX_OUTPUT = 6

#: Default segment-length cap for frame-unit inputs (4 s at 10 ms shift).
DEFAULT_MAX_SEGMENT_FRAMES = 400


@dataclass(frozen=True)
class ThresholdConfig:
    """Onset/offset thresholds plus the search grid resolution."""

    tau_onset: float
    tau_offset: float
    grid_step: float = 0.01

    def __post_init__(self) -> None:
        for name in ("tau_onset", "tau_offset"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 < self.grid_step <= 1.0:
            raise ValueError(f"grid_step must be in (0, 1], got {self.grid_step}")


@dataclass(frozen=True)
class SegmentalConfig:
    """Length cap for segmental assignment; None means unbounded."""

    max_segment_len: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_segment_len is not None and self.max_segment_len < 1:
            raise ValueError(
                f"max_segment_len must be >= 1, got {self.max_segment_len}"
            )

    @staticmethod
    def default_for(unit: Unit) -> "SegmentalConfig":
        """400 frames for frame-unit inputs, unbounded for symbolic ones."""
        if unit.is_frame:
            return SegmentalConfig(DEFAULT_MAX_SEGMENT_FRAMES)
        return SegmentalConfig(None)


@dataclass(frozen=True)
class ThresholdSpans:
    """Per-output-column (onset, offset) input intervals, 1-based inclusive.

    ``spans[k]`` holds the ordered, disjoint spans of output column k + 1.
    The input-axis horizon and unit ride along so the boundary conversion
    is self-contained.
    """

    utterance_id: str
    spans: tuple
    horizon: int
    input_unit: Unit = Unit.PHONE
    frame_shift_ms: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "spans", tuple(tuple(col) for col in self.spans)
        )
        for col in self.spans:
            prev_end = 0
            for onset, offset in col:
                if onset > offset:
                    raise ValueError(f"span ({onset}, {offset}) is inverted")
                if onset <= prev_end:
                    raise ValueError("spans within a column must be disjoint")
                prev_end = offset


def hard_assign(amap: AttentionMap) -> BoundarySet:
    """Boundaries where the argmax input word of consecutive outputs changes.

    Only meaningful when the transcribed words are on the input side;
    otherwise some outputs would have no word to align to.  Ties in a
    column take the smallest input step.  The result lives on the output
    axis.

    Raises:
        WrongDirection: input unit is not word.
    """
    if amap.input_unit is not Unit.WORD:
        raise WrongDirection(
            f"hard assignment needs words on the input side, got "
            f"{amap.input_unit.value}"
        )
    owners = np.argmax(amap.weights, axis=0)  # first max wins ties
    positions = tuple(
        k + 1 for k in range(amap.n_output - 1) if owners[k + 1] != owners[k]
    )
    return BoundarySet(
        utterance_id=amap.utterance_id,
        positions=positions,
        unit=boundary_unit_for(amap.output_unit),
        frame_shift_ms=amap.frame_shift_ms,
    )


def threshold_segment(
    amap: AttentionMap, cfg: ThresholdConfig
) -> ThresholdSpans:
    """Extract per-word input spans by onset/offset thresholding.

    Scanning each output column over t = 1..T: outside a span, a weight
    strictly above tau_onset opens one at t; inside, a weight strictly
    below tau_offset closes it at t - 1 (the same step may immediately
    reopen); a span still open at T closes at T.  Expects words on the
    output side; multiple spans per column are allowed.
    """
    t_len = amap.n_input
    w = amap.weights
    all_spans = []
    for k in range(amap.n_output):
        col_spans = []
        inside = False
        start = 0
        for t in range(1, t_len + 1):
            v = w[t - 1, k]
            if inside and v < cfg.tau_offset:
                col_spans.append((start, t - 1))
                inside = False
            if not inside and v > cfg.tau_onset:
                inside = True
                start = t
        if inside:
            col_spans.append((start, t_len))
        all_spans.append(tuple(col_spans))
    return ThresholdSpans(
        utterance_id=amap.utterance_id,
        spans=tuple(all_spans),
        horizon=t_len,
        input_unit=amap.input_unit,
        frame_shift_ms=amap.frame_shift_ms,
    )


def spans_to_boundaries(spans: ThresholdSpans) -> BoundarySet:
    """Boundary positions induced by threshold spans.

    Each span (onset, offset) contributes onset - 1 and offset; the union
    is deduplicated, sorted, and clipped to [1, horizon - 1].
    """
    horizon = spans.horizon
    positions = set()
    for col in spans.spans:
        for onset, offset in col:
            positions.add(onset - 1)
            positions.add(offset)
    kept = sorted(p for p in positions if 1 <= p <= horizon - 1)
    return BoundarySet(
        utterance_id=spans.utterance_id,
        positions=tuple(kept),
        unit=boundary_unit_for(spans.input_unit),
        frame_shift_ms=spans.frame_shift_ms,
    )


def threshold_grid(grid_step: float) -> np.ndarray:
    """The search grid {0, step, 2 step, ..., 1} (endpoint always included)."""
    values = []
    i = 0
    while True:
        v = i * grid_step
        if v >= 1.0 - 1e-12:
            break
        values.append(v)
        i += 1
    values.append(1.0)
    return np.asarray(values, dtype=np.float64)


def search_thresholds(
    dev: Sequence[Tuple[AttentionMap, BoundarySet]],
    grid_step: float = 0.01,
    match_cfg: Optional[MatchConfig] = None,
) -> ThresholdConfig:
    """Exhaustive grid search for the F-maximizing threshold pair.

    Evaluates every (tau_onset, tau_offset) pair on the grid against the
    development references using micro-averaged boundary F-score; ties go
    to the smallest tau_onset, then the smallest tau_offset.

    Raises:
        EmptyDevSet: no development pairs given.
    """
    if not dev:
        raise EmptyDevSet("threshold search needs at least one dev utterance")
    if match_cfg is None:
        match_cfg = MatchConfig()
    window = match_cfg.window_frames()
    grid = threshold_grid(grid_step)
    g = len(grid)
    totals = np.zeros((g, g, 2), dtype=np.int64)
    n_ref = 0
    for amap, ref in dev:
        ref_pos = np.asarray(ref.positions, dtype=np.int64)
        totals += _kernels.threshold_grid_counts(
            amap.weights, ref_pos, grid, window
        )
        n_ref += len(ref.positions)
    best_f = -1.0
    best = (0, 0)
    for i in range(g):
        for j in range(g):
            _, _, f = prf_from_counts(
                int(totals[i, j, 0]), int(totals[i, j, 1]), n_ref
            )
            if f > best_f:
                best_f = f
                best = (i, j)
    return ThresholdConfig(
        tau_onset=float(grid[best[0]]),
        tau_offset=float(grid[best[1]]),
        grid_step=grid_step,
    )


def prf_from_counts(matched: int, n_hyp: int, n_ref: int):
    """Precision/recall/F from raw counts (shared with the evaluate module)."""
    from .evaluate import EvalCounts

    return prf(EvalCounts(matched=matched, n_hyp=n_hyp, n_ref=n_ref))


def _resolve_cap(amap: AttentionMap, cfg: Optional[SegmentalConfig]) -> int:
    if cfg is None:
        cfg = SegmentalConfig.default_for(amap.input_unit)
    cap = cfg.max_segment_len
    t_len = amap.n_input
    return t_len if cap is None else min(cap, t_len)


def _check_feasible(amap: AttentionMap, max_len: int) -> None:
    t_len, n_out = amap.n_input, amap.n_output
    if n_out > t_len:
        raise Infeasible(
            f"utterance {amap.utterance_id!r}: {n_out} output steps cannot "
            f"partition {t_len} input steps"
        )
    if n_out * max_len < t_len:
        raise Infeasible(
            f"utterance {amap.utterance_id!r}: {n_out} segments of at most "
            f"{max_len} cannot cover {t_len} input steps"
        )


def _segmentation_from_ends(amap: AttentionMap, ends: np.ndarray) -> Segmentation:
    segments = []
    start = 1
    for k, end in enumerate(ends):
        segments.append(Segment(start=start, end=int(end), label=k + 1))
        start = int(end) + 1
    return Segmentation(
        utterance_id=amap.utterance_id,
        segments=tuple(segments),
        horizon=amap.n_input,
    )


def segmental_assign(
    amap: AttentionMap, cfg: Optional[SegmentalConfig] = None
) -> Segmentation:
    """Monotone K-segmentation of the input maximizing covered attention.

    Returns exactly one segment per output step, connected and in order,
    maximizing the summed weight each segment covers in its own column,
    with segment lengths capped by ``cfg.max_segment_len``.  Among optimal
    segmentations the one with the lexicographically smallest boundary
    sequence is returned.

    Raises:
        Infeasible: more outputs than inputs, or the length cap rules out
            every segmentation.
    """
    max_len = _resolve_cap(amap, cfg)
    _check_feasible(amap, max_len)
    prefix = _kernels.column_prefix_sums(amap.weights)
    ends, objective = _kernels.segmental_dp(prefix, max_len)
    if ends.shape[0] == 0:
        raise Infeasible(
            f"utterance {amap.utterance_id!r}: no feasible path"
        )
    return _segmentation_from_ends(amap, ends)


def brute_force_segmental(
    amap: AttentionMap, cfg: Optional[SegmentalConfig] = None
) -> Segmentation:
    """Exhaustive reference implementation of segmental assignment.

    Enumerates all C(T-1, K-1) monotone segmentations (filtered by the
    length cap) and keeps the objective-maximal one, breaking ties toward
    the lexicographically smallest boundary sequence.  Guarded to small
    inputs; used as the independent oracle for the DP.

    Raises:
        TooLarge: T > 14 or K > 6.
        Infeasible: as for segmental_assign.
    """
    t_len, n_out = amap.n_input, amap.n_output
    if t_len > BRUTE_FORCE_MAX_INPUT or n_out > BRUTE_FORCE_MAX_OUTPUT:
        raise TooLarge(
            f"brute force limited to T <= {BRUTE_FORCE_MAX_INPUT}, "
            f"K <= {BRUTE_FORCE_MAX_OUTPUT}; got T={t_len}, K={n_out}"
        )
    max_len = _resolve_cap(amap, cfg)
    _check_feasible(amap, max_len)
    prefix = _kernels.column_prefix_sums(amap.weights)
    best_obj = -np.inf
    best_ends = None
    for cut in combinations(range(1, t_len), n_out - 1):
        ends = cut + (t_len,)
        start = 1
        ok = True
        for end in ends:
            if end - start + 1 > max_len:
                ok = False
                break
            start = end + 1
        if not ok:
            continue
        # right-to-left accumulation: the exact float semantics of the DP
        obj = 0.0
        start = 1
        starts = []
        for end in ends:
            starts.append(start)
            start = end + 1
        for k in range(n_out - 1, -1, -1):
            obj = (prefix[ends[k], k] - prefix[starts[k] - 1, k]) + obj
        if obj > best_obj:
            best_obj = obj
            best_ends = ends
    if best_ends is None:
        raise Infeasible(
            f"utterance {amap.utterance_id!r}: no feasible segmentation"
        )
    return _segmentation_from_ends(amap, np.asarray(best_ends, dtype=np.int64))


def segmentation_objective(amap: AttentionMap, seg: Segmentation) -> float:
    """Total attention mass a segmentation covers, one column per segment.

    Accumulated right-to-left from the shared prefix-sum matrix: the same
    float the DP and the brute-force solver report for this path.
    """
    prefix = _kernels.column_prefix_sums(amap.weights)
    obj = 0.0
    segs = seg.segments
    for k in range(len(segs) - 1, -1, -1):
        s = segs[k]
        obj = (prefix[s.end, k] - prefix[s.start - 1, k]) + obj
    return obj
