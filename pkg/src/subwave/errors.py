"""Exception and warning types shared across the package."""


class SubwaveError(Exception):
    """Base class for all package errors."""


class DomainError(SubwaveError):
    """Input outside the admissible parameter domain (e.g. frequency not in (0,1))."""


class SupercriticalError(SubwaveError):
    """Bottom slope reaches or exceeds the characteristic slope c(lambda).

    Carries ``max_slope`` and ``c`` so callers can report how far out of
    range the topography is.
    """

    def __init__(self, max_slope: float, c: float):
        self.max_slope = max_slope
        self.c = c
        super().__init__(
            f"supercritical topography: max|G'| = {max_slope:.6g} >= c = {c:.6g}"
        )


class ConvergenceError(SubwaveError):
    """A root solve failed to reach its tolerance."""


class IterationLimitError(SubwaveError):
    """An iteration count exceeded its configured cap."""


class IllConditionedError(SubwaveError):
    """Finite-section system too ill-conditioned to invert reliably."""


class SupportError(SubwaveError):
    """Boundary data extends beyond the interval budgeted by the bounce count."""


class ContinuityError(SubwaveError):
    """Tile-by-tile construction produced a jump above tolerance."""


class WindowError(SubwaveError):
    """Requested evaluation leaves the tabulated window, or snapshot density too low."""


class StencilError(SubwaveError):
    """Not enough grid points near the boundary for the derivative stencil."""


class SingularSystemError(SubwaveError):
    """Sparse factorization failed or returned non-finite values."""


class StabilityError(SubwaveError):
    """Time-stepper norm growth exceeded the forcing-driven bound."""


class AliasWarning(UserWarning):
    """Sample truncation discarded a non-negligible share of energy."""


class QuadratureWarning(UserWarning):
    """Refinement check changed a quadrature result above tolerance."""


class RefinementWarning(UserWarning):
    """Grid refinement changed a solution above tolerance."""


class NearCriticalWarning(UserWarning):
    """Subcritical margin is small; finite sections degrade."""
