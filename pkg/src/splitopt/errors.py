"""Exception types shared across the toolkit."""


class DimensionMismatch(ValueError):
    """Operand shapes are inconsistent."""


class NonFiniteEntries(ValueError):
    """An array contains NaN or Inf."""


class NotSquare(ValueError):
    """A square matrix was required."""


class NotSymmetric(ValueError):
    """A symmetric matrix was required."""


class NotPositiveSemidefiniteQuadraticForm(ValueError):
    """A quadratic form came out negative beyond tolerance."""


class NegativeThreshold(ValueError):
    """Shrinkage thresholds must be nonnegative."""


class InvalidPartition(ValueError):
    """Index blocks must be disjoint and cover every coordinate."""


class UnsupportedTheta1(ValueError):
    """Custom smooth term used without a registered oracle."""


class UnsupportedTheta2(ValueError):
    """Custom nonsmooth term used without a registered oracle."""


class NonpositiveScale(ValueError):
    """Proximal scale must be positive."""


class AlphaOutOfRange(ValueError):
    """Relaxation factor alpha must lie in [0, 1)."""


class KOutOfRange(ValueError):
    """Step-size schedules are defined for iteration counters k >= 1."""


class NonpositiveEta(ValueError):
    """Step sizes must be positive."""


class SubproblemUnsolvable(RuntimeError):
    """A solver subproblem has no registered or closed-form solution."""


class EmptyDataset(ValueError):
    """Sampling requires at least one data point."""


class WrongRegime(ValueError):
    """Operation not defined for this gamma regime."""


class EmptyDeltaInterval(ValueError):
    """The admissible interval for the free parameter delta is empty."""


class ConfigMismatch(ValueError):
    """A run and a certificate were built from different parameters."""


class BadDimensions(ValueError):
    """Generator dimensions are inconsistent."""


class ParseError(ValueError):
    """Malformed text input.

    Attributes carry the 1-based line and column of the offending token.
    """

    def __init__(self, line, column, reason):
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"line {line}, column {column}: {reason}")


class NonIncreasingIndices(ParseError):
    """Feature indices within a line must be strictly increasing."""


class EmptyFile(ValueError):
    """The input file contains no data lines."""


class InsufficientData(ValueError):
    """Not enough trace records for a fit."""


class NonpositiveGap(ValueError):
    """Too many nonpositive gap values for a meaningful log-log fit."""
