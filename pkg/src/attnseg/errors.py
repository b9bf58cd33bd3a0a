"""Exception types shared across the toolkit."""


class AttnsegError(Exception):
    """Base class for all toolkit errors."""


# --- attention-map validation ---

class EmptyAxis(AttnsegError):
    """An attention map has zero input or output steps."""


class NegativeWeight(AttnsegError):
    """An attention map contains a negative weight."""


class ColumnMass(AttnsegError):
    """An output column's mass deviates from 1 beyond tolerance."""


class MissingFrameShift(AttnsegError):
    """A temporal conversion was requested without a frame shift."""


# --- postprocessing ---

class WrongDirection(AttnsegError):
    """A method was applied to a map whose axis units do not support it."""


class Infeasible(AttnsegError):
    """No segmentation satisfies the count/length constraints."""


class TooLarge(AttnsegError):
    """Input exceeds the size guard of the exhaustive solver."""


class EmptyDevSet(AttnsegError):
    """Threshold search was given no development data."""


# --- evaluation ---

class UnitMismatch(AttnsegError):
    """Hypothesis and reference boundaries use incompatible units."""


class ZeroReference(AttnsegError):
    """Over-segmentation is undefined without reference boundaries."""


# --- synthesis ---

class ConfigInfeasible(AttnsegError):
    """A corpus configuration cannot be satisfied (e.g. lexicon too large)."""


# --- file formats ---

class BadMagic(AttnsegError):
    """A binary attention file does not start with the expected magic."""


class TruncatedPayload(AttnsegError):
    """A binary attention file ends before its declared payload."""


class DimensionMismatch(AttnsegError):
    """A binary attention header declares inconsistent dimensions."""


class ParseError(AttnsegError):
    """A text file could not be parsed; message carries the line number."""


class InvariantViolation(AttnsegError):
    """Parsed or constructed data violates a structural invariant."""
