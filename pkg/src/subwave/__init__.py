"""Internal-wave scattering in a 2D channel with subcritical bottom topography.

Submodules
----------
geometry     channel, chess-billiard maps, fundamental intervals
circle       mean-zero data on the circle, projectors, pullback matrices
scattering   block operator T and the scattering matrix S(lambda)
stationary   outgoing resolvent R(lambda)f via boundary transport
elliptic     complex-frequency direct solver (limiting-absorption oracle)
evolution    leapfrog time solver and standing-wave extraction
cli          configuration, orchestration, file formats
"""

__version__ = "0.1.0"

from .errors import (
    AliasWarning,
    ContinuityError,
    ConvergenceError,
    DomainError,
    IllConditionedError,
    IterationLimitError,
    NearCriticalWarning,
    QuadratureWarning,
    RefinementWarning,
    SingularSystemError,
    StabilityError,
    StencilError,
    SubwaveError,
    SupercriticalError,
    SupportError,
    WindowError,
)
from .geometry import (
    ChannelParams,
    FundamentalIntervals,
    Topography,
    billiard,
    billiard_derivative,
    billiard_inverse,
    characteristic_slope,
    check_subcritical,
    circle_map,
    circle_map_inverse,
    find_fundamental_intervals,
    gamma_minus,
    gamma_plus,
)
