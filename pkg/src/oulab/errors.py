"""Exception types shared across the package.

Everything derives from OULabError so the CLI can map failures to exit
codes without enumerating modules.
"""


class OULabError(Exception):
    """Base class for all package errors."""


class DimensionError(OULabError):
    """Array shapes do not match the model dimension."""


class NotSPDError(OULabError):
    """Matrix is not symmetric positive definite."""


class NotStableError(OULabError):
    """Drift matrix has an eigenvalue with nonnegative real part."""


class NonPositiveTimeError(OULabError):
    """A time parameter that must be positive is not."""


class StepUnderflowError(OULabError):
    """Finite-difference step would underflow at the requested time."""


class NumericalOverflowError(OULabError):
    """exp() of a computed log-value overflows float64; use the log form."""


class EmptyPathError(OULabError):
    """A sampled path needs at least one point."""


class BadOrderError(OULabError):
    """Variation order must satisfy rho >= 1."""


class TooLongError(OULabError):
    """Exhaustive enumeration refused: path too long."""


class BadSplitError(OULabError):
    """Split index outside the path interior."""


class CoincidentPointsError(OULabError):
    """Operation requires x != u."""


class EtaZeroError(OULabError):
    """Cutoff eta(x, u) vanishes where it must not."""


class ZeroPointError(OULabError):
    """Operation requires a nonzero point."""


class BracketFailError(OULabError):
    """Root bracketing for the polar parameter failed."""


class AlphaTooSmallError(OULabError):
    """Annulus level alpha must exceed 2."""


class TailNotConvergedError(OULabError):
    """Truncated integral tail estimate exceeds tolerance."""


class ModelFileError(OULabError):
    """Model file is missing, unreadable, or malformed."""


class RateTooLargeError(OULabError):
    """Candidate Gaussian rate exceeds the model's admissible rate."""


class BudgetExceededError(OULabError):
    """Probe exceeded its wall-clock budget; no report was written."""
