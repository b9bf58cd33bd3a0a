"""Shared data model: attention maps, segments, boundaries, corpus items.

Conventions used throughout the package:

* Attention weights form a T x K matrix: rows are input steps, columns are
  output steps, and every output column is a probability distribution over
  the input steps (sums to 1).
* Segment bounds are 1-based and inclusive, so a segmentation of horizon T
  tiles [1, T] without gaps or overlaps.
* A boundary at position p separates unit p from unit p + 1; valid positions
  are 1 .. horizon - 1.  Utterance-initial and -final edges are never
  stored: they are trivially correct and would inflate boundary scores.
* Weights are carried at 64-bit precision internally regardless of on-disk
  precision.

All types are immutable after construction and the operations are pure, so
everything here is safe to use concurrently across utterances.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    ColumnMass,
    EmptyAxis,
    InvariantViolation,
    MissingFrameShift,
    NegativeWeight,
)

#: Tolerance on output-column mass; deviations within it are silently
#: renormalized (32-bit serialization introduces errors of this order),
#: larger ones are hard errors.
COLUMN_MASS_TOL = 1e-4

#: Renormalization below this deviation would only churn last bits, so
#: validate_map leaves such columns untouched (this makes it idempotent).
_RENORM_EPS = 1e-12

DEFAULT_FRAME_SHIFT_MS = 10.0


class Unit(str, Enum):
    """Granularity of a sequence axis."""

    ACOUSTIC_FRAME = "acoustic-frame"
    PHONE_FRAME = "phone-frame"
    PHONE = "phone"
    WORD = "word"

    @property
    def is_frame(self) -> bool:
        return self in (Unit.ACOUSTIC_FRAME, Unit.PHONE_FRAME)


class BoundaryUnit(str, Enum):
    """Unit in which boundary positions are expressed."""

    SYMBOLIC = "symbolic"
    TEMPORAL_FRAME = "temporal-frame"


def boundary_unit_for(unit: Unit) -> BoundaryUnit:
    """Boundary unit induced by a sequence-axis unit."""
    return BoundaryUnit.TEMPORAL_FRAME if unit.is_frame else BoundaryUnit.SYMBOLIC


@dataclass(frozen=True, eq=False)
class AttentionMap:
    """A T x K non-negative weight matrix linking output steps to input steps.

    ``weights[t, k]`` is the attention put on input step t + 1 by output
    step k + 1.  ``frame_shift_ms`` is kept only when at least one axis is
    in frame units (defaulting to 10 ms); it is dropped otherwise.
    """

    utterance_id: str
    weights: np.ndarray
    input_unit: Unit
    output_unit: Unit
    frame_shift_ms: Optional[float] = None

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.input_unit.is_frame or self.output_unit.is_frame:
            shift = self.frame_shift_ms
            if shift is None:
                shift = DEFAULT_FRAME_SHIFT_MS
            if shift <= 0:
                raise ValueError(f"frame_shift_ms must be positive, got {shift}")
            object.__setattr__(self, "frame_shift_ms", float(shift))
        else:
            object.__setattr__(self, "frame_shift_ms", None)

    @property
    def n_input(self) -> int:
        return self.weights.shape[0]

    @property
    def n_output(self) -> int:
        return self.weights.shape[1]


def validate_map(amap: AttentionMap) -> None:
    """Check AttentionMap invariants, renormalizing near-unit columns.

    Columns whose mass deviates from 1 by at most ``COLUMN_MASS_TOL`` are
    renormalized in place; larger deviations raise.  Idempotent: a second
    call finds all columns already within ``_RENORM_EPS`` and changes
    nothing.

    Raises:
        EmptyAxis: T = 0 or K = 0.
        NegativeWeight: any weight < 0.
        ColumnMass: some column mass deviates from 1 by more than the
            tolerance.
    """
    w = amap.weights
    if w.shape[0] == 0 or w.shape[1] == 0:
        raise EmptyAxis(
            f"utterance {amap.utterance_id!r}: map has shape {w.shape}"
        )
    if (w < 0.0).any():
        t, k = np.argwhere(w < 0.0)[0]
        raise NegativeWeight(
            f"utterance {amap.utterance_id!r}: weight[{t}, {k}] = {w[t, k]}"
        )
    sums = w.sum(axis=0)
    dev = np.abs(sums - 1.0)
    if (dev > COLUMN_MASS_TOL).any():
        k = int(np.argmax(dev))
        raise ColumnMass(
            f"utterance {amap.utterance_id!r}: column {k} sums to {sums[k]:.8f}"
        )
    fix = dev > _RENORM_EPS
    if fix.any():
        arr = np.asarray(w)
        arr.setflags(write=True)
        arr[:, fix] /= sums[fix]
        arr.setflags(write=False)


def transpose(amap: AttentionMap) -> AttentionMap:
    """Swap the axis roles of a map, renormalizing the new output columns.

    The result has shape K x T with input/output units exchanged; each new
    output column (an input row of the original) is rescaled to unit mass so
    the result satisfies the column-stochastic contract.  Validation errors
    on the result propagate (e.g. an all-zero row of the original becomes an
    all-zero column and fails the mass check).
    """
    new_w = amap.weights.T.copy()
    sums = new_w.sum(axis=0)
    nz = sums > 0.0
    new_w[:, nz] /= sums[nz]
    out = AttentionMap(
        utterance_id=amap.utterance_id,
        weights=new_w,
        input_unit=amap.output_unit,
        output_unit=amap.input_unit,
        frame_shift_ms=amap.frame_shift_ms,
    )
    validate_map(out)
    return out


@dataclass(frozen=True)
class Segment:
    """One labeled span, 1-based inclusive bounds."""

    start: int
    end: int
    label: Union[str, int]

    def __post_init__(self) -> None:
        if self.start < 1:
            raise InvariantViolation(f"segment start {self.start} < 1")
        if self.start > self.end:
            raise InvariantViolation(
                f"segment start {self.start} > end {self.end}"
            )

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Segmentation:
    """A connected, ordered tiling of [1, horizon] by labeled segments."""

    utterance_id: str
    segments: tuple
    horizon: int

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        uid = self.utterance_id
        if not segs:
            raise InvariantViolation(f"utterance {uid!r}: no segments")
        if segs[0].start != 1:
            raise InvariantViolation(
                f"utterance {uid!r}: first segment starts at {segs[0].start}, not 1"
            )
        if segs[-1].end != self.horizon:
            raise InvariantViolation(
                f"utterance {uid!r}: last segment ends at {segs[-1].end}, "
                f"horizon is {self.horizon}"
            )
        for a, b in zip(segs, segs[1:]):
            if b.start != a.end + 1:
                raise InvariantViolation(
                    f"utterance {uid!r}: segment starting at {b.start} does not "
                    f"connect to previous end {a.end}"
                )

    @property
    def n_segments(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class BoundarySet:
    """Sorted internal boundary positions of one utterance.

    A position p marks the boundary between unit p and unit p + 1, so the
    utterance edges (0 and horizon) never appear.
    """

    utterance_id: str
    positions: tuple
    unit: BoundaryUnit = BoundaryUnit.SYMBOLIC
    frame_shift_ms: Optional[float] = None

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        for a, b in zip(pos, pos[1:]):
            if b <= a:
                raise InvariantViolation(
                    f"utterance {self.utterance_id!r}: positions not strictly "
                    f"increasing at {a}, {b}"
                )
        if pos and pos[0] < 1:
            raise InvariantViolation(
                f"utterance {self.utterance_id!r}: position {pos[0]} < 1"
            )
        if self.unit is BoundaryUnit.TEMPORAL_FRAME:
            shift = self.frame_shift_ms
            if shift is None:
                shift = DEFAULT_FRAME_SHIFT_MS
            if shift <= 0:
                raise ValueError(f"frame_shift_ms must be positive, got {shift}")
            object.__setattr__(self, "frame_shift_ms", float(shift))
        else:
            object.__setattr__(self, "frame_shift_ms", None)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class CorpusItem:
    """One utterance: paired input/output sequences plus optional reference."""

    utterance_id: str
    input_seq: tuple
    output_seq: tuple
    reference: Optional[Segmentation] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_seq", tuple(self.input_seq))
        object.__setattr__(self, "output_seq", tuple(self.output_seq))
        ref = self.reference
        if ref is not None and ref.horizon != len(self.input_seq):
            raise InvariantViolation(
                f"utterance {self.utterance_id!r}: reference horizon "
                f"{ref.horizon} != input length {len(self.input_seq)}"
            )


def boundaries_from_segmentation(
    seg: Segmentation,
    unit: BoundaryUnit = BoundaryUnit.SYMBOLIC,
    frame_shift_ms: Optional[float] = None,
) -> BoundarySet:
    """Internal boundaries of a segmentation: every segment end but the last."""
    positions = tuple(s.end for s in seg.segments[:-1])
    return BoundarySet(
        utterance_id=seg.utterance_id,
        positions=positions,
        unit=unit,
        frame_shift_ms=frame_shift_ms,
    )


def frames_to_time(boundaries: BoundarySet) -> list:
    """Convert frame-unit boundary positions to times in seconds.

    Position p maps to the end time of frame p: p * frame_shift_ms / 1000.

    Raises:
        MissingFrameShift: unit is not temporal-frame (symbolic positions
            have no time axis) or no frame shift is attached.
    """
    if boundaries.unit is not BoundaryUnit.TEMPORAL_FRAME:
        raise MissingFrameShift(
            f"utterance {boundaries.utterance_id!r}: boundaries are in "
            f"{boundaries.unit.value} units"
        )
    shift = boundaries.frame_shift_ms
    if shift is None:
        raise MissingFrameShift(
            f"utterance {boundaries.utterance_id!r}: no frame shift attached"
        )
    return [p * shift / 1000.0 for p in boundaries.positions]
