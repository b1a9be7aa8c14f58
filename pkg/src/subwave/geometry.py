"""Channel geometry and chess-billiard dynamics.

The channel is Omega = {G(x1) < x2 < 0} with a smooth bottom profile G < 0
that equals -pi exactly outside a compact set |x1| <= R0.  For a forcing
frequency lam in (0, 1) the stationary operator factors along characteristic
lines of slope +-c with

    c(lam) = sqrt(1 - lam^2) / lam.

The bottom is *subcritical* for lam when max|G'| < c, in which case every
characteristic crosses the bottom transversally and the two boundary
reflections

    gamma_plus:  s + G(s)/c = x1      (down-going characteristic)
    gamma_minus: s - G(s)/c = x1      (up-going characteristic)

are single-valued.  Their composition is the single-bounce billiard map on
the upper boundary,

    b(x1) = x1 - 2 G(s)/c,   s = gamma_plus(x1),

with derivative b'(x1) = (c - G'(s)) / (c + G'(s)) > 0.  Over the flat ends
b is exactly the shift x1 -> x1 + 2 pi / c.

Everything downstream works in theta-units, theta = c * x1 on the upper
boundary, where the shift becomes exactly 2 pi.  A left fundamental interval
J_L = [theta0, theta0 + 2 pi) is fixed with theta0 = -c*M - 2*pi, and the
multi-bounce map carries it to J_R = [theta_R0, theta_R0 + 2 pi) after N
bounces.  Identifying both intervals with the circle yields the monotone
degree-one circle map

    beta(phi) = b^N(theta0 + phi) - theta_R0,   beta(0) = 0,

whose derivative is the chain-rule product of b' along the orbit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize_scalar

from .errors import (
    ConvergenceError,
    DomainError,
    IterationLimitError,
    SupercriticalError,
)

FLAT_DEPTH = np.pi

# gaussian tails below this are invisible next to pi in float64
_TAIL = 1e-18


# ---------------------------------------------------------------------------
# topography
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Topography:
    """Bottom profile G(x1): smooth, negative, exactly -pi for |x1| >= R0.

    Use the constructors :meth:`flat`, :meth:`gaussian_bump`, :meth:`spline`.
    ``depth``/``slope``/``curvature`` evaluate G, G', G'' vectorized.
    """

    kind: str
    support_radius: float
    params: dict = field(default_factory=dict)
    _depth: Callable = None
    _slope: Callable = None
    _curvature: Callable = None

    @staticmethod
    def flat(support_radius: float = 1.0) -> "Topography":
        z = lambda x: np.broadcast_to(0.0, np.shape(x)).copy()
        return Topography(
            kind="flat",
            support_radius=float(support_radius),
            params={},
            _depth=lambda x: np.full_like(np.asarray(x, dtype=float), -FLAT_DEPTH),
            _slope=z,
            _curvature=z,
        )

    @staticmethod
    def gaussian_bump(amplitude: float, width: float = 1.0,
                      center: float = 0.0) -> "Topography":
        """G = -pi + A exp(-((x-xc)/w)^2), truncated where the tail drops
        below float64 resolution of pi so the flat ends are bit-exact."""
        a, w, xc = float(amplitude), float(width), float(center)
        if not 0 < abs(a) < FLAT_DEPTH:
            raise DomainError(f"gaussian amplitude must be in (0, pi), got {a}")
        if a < 0:
            raise DomainError("downward bumps would deepen the channel; "
                              "only 0 < A < pi is supported")
        if w <= 0:
            raise DomainError("width must be positive")
        r_cut = np.sqrt(np.log(a / _TAIL))
        r0 = abs(xc) + w * r_cut

        def _u(x):
            x = np.asarray(x, dtype=float)
            t = (x - xc) / w
            out = np.zeros_like(t)
            m = np.abs(t) < r_cut
            out[m] = np.exp(-t[m] ** 2)
            return out, t, m

        def depth(x):
            u, _, _ = _u(x)
            return -FLAT_DEPTH + a * u

        def slope(x):
            u, t, _ = _u(x)
            return a * (-2.0 * t / w) * u

        def curvature(x):
            u, t, _ = _u(x)
            return a * (4.0 * t ** 2 - 2.0) / w ** 2 * u

        return Topography(
            kind="gaussian_bump", support_radius=r0,
            params={"amplitude": a, "width": w, "center": xc},
            _depth=depth, _slope=slope, _curvature=curvature,
        )

    @staticmethod
    def spline(knots, values) -> "Topography":
        """Quintic spline through (knots, values) with value -pi and zero
        first/second derivative clamped at the end knots, -pi outside.
        C^2 at the junction; C^infinity is not required downstream."""
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 4:
            raise DomainError("spline needs matching 1d arrays, >= 4 knots")
        if np.any(np.diff(knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if abs(values[0] + FLAT_DEPTH) > 1e-14 or abs(values[-1] + FLAT_DEPTH) > 1e-14:
            raise DomainError("end values must equal -pi to join the flat ends")
        if np.any(values >= 0):
            raise DomainError("bottom profile must stay below the surface")
        bc = ([(1, 0.0), (2, 0.0)], [(1, 0.0), (2, 0.0)])
        spl = make_interp_spline(knots, values, k=5, bc_type=bc)
        d1, d2 = spl.derivative(1), spl.derivative(2)
        lo, hi = knots[0], knots[-1]
        r0 = max(abs(lo), abs(hi))

        def _piecewise(x, inner, flat_val):
            x = np.asarray(x, dtype=float)
            out = np.full_like(x, flat_val)
            m = (x > lo) & (x < hi)
            out[m] = inner(x[m])
            return out

        return Topography(
            kind="spline", support_radius=r0,
            params={"knots": knots, "values": values},
            _depth=lambda x: _piecewise(x, spl, -FLAT_DEPTH),
            _slope=lambda x: _piecewise(x, d1, 0.0),
            _curvature=lambda x: _piecewise(x, d2, 0.0),
        )

    def depth(self, x1):
        return self._depth(np.asarray(x1, dtype=float))

    def slope(self, x1):
        return self._slope(np.asarray(x1, dtype=float))

    def curvature(self, x1):
        return self._curvature(np.asarray(x1, dtype=float))

    def depth_range(self) -> tuple[float, float]:
        """(min G, max G) over a dense sample of the non-flat part."""
        x = np.linspace(-self.support_radius, self.support_radius, 4097)
        g = self.depth(x)
        return min(float(g.min()), -FLAT_DEPTH), max(float(g.max()), -FLAT_DEPTH)

    def max_slope(self) -> float:
        """Global max of |G'|: dense grid plus bounded local refinement."""
        if self.kind == "flat":
            return 0.0
        r = self.support_radius
        x = np.linspace(-r, r, 8193)
        a = np.abs(self.slope(x))
        best = float(a.max())
        i = int(a.argmax())
        lo, hi = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
        res = minimize_scalar(lambda t: -abs(float(self.slope(t))),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        return max(best, -float(res.fun))

    def label(self) -> str:
        """Canonical one-line description (hashed into file headers)."""
        if self.kind == "flat":
            return f"flat r0={self.support_radius!r}"
        if self.kind == "gaussian_bump":
            p = self.params
            return (f"gaussian_bump a={p['amplitude']!r} w={p['width']!r} "
                    f"c={p['center']!r}")
        p = self.params
        kv = ",".join(f"{k!r}:{v!r}" for k, v in zip(p["knots"], p["values"]))
        return f"spline {kv}"


# ---------------------------------------------------------------------------
# channel parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelParams:
    """Frequency-dependent channel data for a subcritical pair (G, lambda)."""

    lam: float
    c: float
    M: float
    max_slope: float
    subcritical_margin: float


def characteristic_slope(lam: float) -> float:
    if not 0.0 < lam < 1.0:
        raise DomainError(f"frequency must lie in (0,1), got {lam}")
    return np.sqrt(1.0 - lam * lam) / lam


def check_subcritical(topo: Topography, lam: float) -> ChannelParams:
    """Validate subcriticality and fix the flat-region threshold M.

    Raises SupercriticalError when max|G'| >= c(lam).  M = R0 + 3 pi/c + 1/2
    satisfies the required M > R0 + 3 pi / c with a fixed deterministic slack.
    """
    c = characteristic_slope(lam)
    smax = topo.max_slope()
    if smax >= c:
        raise SupercriticalError(smax, c)
    margin = 1.0 - smax / c
    M = topo.support_radius + 3.0 * np.pi / c + 0.5
    return ChannelParams(lam=float(lam), c=c, M=M, max_slope=smax,
                         subcritical_margin=margin)


# ---------------------------------------------------------------------------
# reflection involutions and the billiard map
# ---------------------------------------------------------------------------

def _solve_increasing(f, df, lo, hi, tol=1e-13, max_iter=200):
    """Vectorized safeguarded Newton for an increasing function.

    Brackets [lo, hi] must satisfy f(lo) <= 0 <= f(hi).  Newton steps are
    accepted only inside the current bracket; otherwise bisection.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        neg = fx < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        if np.all(np.abs(fx) <= tol):
            return x
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / d
        ok = (d > 0) & np.isfinite(xn) & (xn > lo) & (xn < hi)
        x = np.where(ok, xn, 0.5 * (lo + hi))
    fx = f(x)
    if np.any(np.abs(fx) > tol * 100):
        raise ConvergenceError(
            f"root solve stalled: max residual {np.max(np.abs(fx)):.3e}"
        )
    return x


def _as_array(x1):
    a = np.asarray(x1, dtype=float)
    return a, a.ndim == 0


def gamma_plus(params: ChannelParams, topo: Topography, x1):
    """Bottom abscissa s with s + G(s)/c = x1 (unique under subcriticality)."""
    c = params.c
    gmin, gmax = topo.depth_range()
    a, scalar = _as_array(x1)
    lo = a - gmax / c - 1e-9
    hi = a - gmin / c + 1e-9
    s = _solve_increasing(lambda s: s + topo.depth(s) / c - a,
                          lambda s: 1.0 + topo.slope(s) / c, lo, hi)
    return float(s) if scalar else s


def gamma_minus(params: ChannelParams, topo: Topography, x1):
    """Bottom abscissa s with s - G(s)/c = x1."""
    c = params.c
    gmin, gmax = topo.depth_range()
    a, scalar = _as_array(x1)
    lo = a + gmin / c - 1e-9
    hi = a + gmax / c + 1e-9
    s = _solve_increasing(lambda s: s - topo.depth(s) / c - a,
                          lambda s: 1.0 - topo.slope(s) / c, lo, hi)
    return float(s) if scalar else s


def billiard(params: ChannelParams, topo: Topography, x1):
    """Single-bounce map b(x1) = x1 - 2 G(s)/c with s = gamma_plus(x1)."""
    a, scalar = _as_array(x1)
    s = gamma_plus(params, topo, a)
    out = a - 2.0 * topo.depth(s) / params.c
    return float(out) if scalar else out


def billiard_derivative(params: ChannelParams, topo: Topography, x1):
    """b'(x1) = (c - G'(s)) / (c + G'(s)), positive under subcriticality."""
    a, scalar = _as_array(x1)
    s = gamma_plus(params, topo, a)
    gp = topo.slope(s)
    out = (params.c - gp) / (params.c + gp)
    return float(out) if scalar else out


def billiard_inverse(params: ChannelParams, topo: Topography, y):
    """Inverse bounce: x1 with b(x1) = y, via the gamma_minus relation."""
    a, scalar = _as_array(y)
    s = gamma_minus(params, topo, a)
    out = a + 2.0 * topo.depth(s) / params.c
    return float(out) if scalar else out


# --- theta-units ------------------------------------------------------------

def billiard_theta(params, topo, theta):
    """b in theta-units (theta = c x1): theta -> c * b(theta / c)."""
    return params.c * billiard(params, topo, np.asarray(theta) / params.c)


def billiard_theta_inverse(params, topo, theta):
    return params.c * billiard_inverse(params, topo, np.asarray(theta) / params.c)


def billiard_theta_derivative(params, topo, theta):
    return billiard_derivative(params, topo, np.asarray(theta) / params.c)


# ---------------------------------------------------------------------------
# fundamental intervals and the circle map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalIntervals:
    """J_L = [theta0, theta0+2pi), J_R = b^N(J_L), all in theta-units."""

    theta0: float
    theta_R0: float
    N: int


def find_fundamental_intervals(params: ChannelParams, topo: Topography,
                               max_bounces: int = 10 ** 6,
                               ) -> FundamentalIntervals:
    """Fix theta0 = -c M - 2 pi and push J_L rightward until it clears c M.

    N is the first bounce count with b^N(theta0) > c M.  The periodic
    compatibility b^N(theta0 + 2 pi) = b^N(theta0) + 2 pi is verified to
    1e-10 (b commutes with the 2 pi shift on the flat ends).
    """
    cM = params.c * params.M
    theta0 = -cM - 2.0 * np.pi
    th = theta0
    n = 0
    while th <= cM:
        th = float(billiard_theta(params, topo, th))
        n += 1
        if n > max_bounces:
            raise IterationLimitError(f"bounce count exceeded {max_bounces}")
    th2 = theta0 + 2.0 * np.pi
    for _ in range(n):
        th2 = float(billiard_theta(params, topo, th2))
    if abs(th2 - th - 2.0 * np.pi) > 1e-10:
        raise ConvergenceError(
            f"periodic compatibility violated: {abs(th2 - th - 2 * np.pi):.3e}"
        )
    return FundamentalIntervals(theta0=theta0, theta_R0=th, N=n)


def circle_map(fi: FundamentalIntervals, params: ChannelParams,
               topo: Topography, phi):
    """Degree-one circle map beta and its derivative.

    beta(phi) = b^N(theta0 + phi) - theta_R0 for phi in [0, 2 pi), with
    beta(0) = 0; the derivative is the product of b' along the orbit.
    """
    a, scalar = _as_array(phi)
    th = fi.theta0 + a
    dprod = np.ones_like(th)
    for _ in range(fi.N):
        dprod = dprod * billiard_theta_derivative(params, topo, th)
        th = billiard_theta(params, topo, th)
    beta = th - fi.theta_R0
    if scalar:
        return float(beta), float(dprod)
    return beta, dprod


def circle_map_inverse(fi: FundamentalIntervals, params: ChannelParams,
                       topo: Topography, psi):
    """beta^{-1} via the exact inverse orbit b^{-N} (no extra root layers)."""
    a, scalar = _as_array(psi)
    th = fi.theta_R0 + a
    for _ in range(fi.N):
        th = billiard_theta_inverse(params, topo, th)
    out = th - fi.theta0
    return float(out) if scalar else out
