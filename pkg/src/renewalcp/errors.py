"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit 1,
scientifically meaningful non-answers (bracket failures, undecidable
height caps) exit 2, resource guards exit 3.
"""


class ValidationError(ValueError):
    """An input violates a documented precondition or type invariant."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed a configured resource cap."""


class BracketError(RuntimeError):
    """A bisection bracket does not straddle the requested threshold.

    Carries the endpoint estimates so callers can report them instead of
    silently retrying.
    """

    def __init__(self, message, lo_estimate=None, hi_estimate=None):
        super().__init__(message)
        self.lo_estimate = lo_estimate
        self.hi_estimate = hi_estimate


class UndecidableAtHeightError(RuntimeError):
    """The origin cluster touches the top row, so finiteness cannot be
    decided at this wedge height."""


class SeriesDivergenceError(ValidationError):
    """The contour-weight series diverges at the requested weight."""
