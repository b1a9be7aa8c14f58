"""Compactly supported forcing profiles.

Sources are plain evaluators f(x1, x2) together with a declared support
box; the smooth building block is the exactly-supported bump
psi(t) = exp(-1/(1-t^2)) on |t| < 1.  ``sigma_bump`` sources are expressed
in the boundary-fitted vertical coordinate sigma = x2/G(x1), so they stay
inside the channel over curved topography.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import Topography


def bump(t):
    """C-infinity bump, exactly zero for |t| >= 1, peak value 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class SourceTerm:
    """Forcing profile with support box bookkeeping.

    ``char_box`` optionally overrides the characteristic-coordinate ranges
    derived from the physical box (used for sources defined directly in
    characteristic coordinates).
    """

    fn: callable
    x1_half_width: float
    x2_range: tuple = (-np.pi, 0.0)
    char_box: tuple | None = None
    smoothness: str = "smooth"
    label: str = "source"
    params: dict = field(default_factory=dict)

    def evaluate(self, x1, x2):
        return self.fn(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))

    def check_support(self, topo: Topography | None = None,
                      n: int = 61, tol: float = 1e-14) -> float:
        """Spot-check that f vanishes outside the declared box (and below
        the bottom when a topography is given).  Returns the worst value."""
        r = self.x1_half_width
        lo, hi = self.x2_range
        xs = np.linspace(-3 * r - 1, 3 * r + 1, n)
        ys = np.linspace(lo - 1.0, hi + 0.5, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        outside = (np.abs(X) > r) | (Y < lo) | (Y > hi)
        worst = float(np.max(np.abs(self.evaluate(X, Y) * outside)))
        if topo is not None:
            below = Y < topo.depth(X)[..., None] if X.ndim == 1 else Y < topo.depth(X)
            worst = max(worst, float(np.max(np.abs(self.evaluate(X, Y) * below))))
        if worst > tol:
            raise DomainError(f"source leaks outside its support box: {worst:.2e}")
        return worst


def mode_bump(k: int = 1, center: float = 0.0, half_width: float = 1.0,
              amplitude: float = 1.0) -> SourceTerm:
    """f = A sin(k x2) psi((x1-c)/w): single vertical mode, flat channels."""

    def fn(x1, x2):
        return amplitude * np.sin(k * x2) * bump((x1 - center) / half_width)

    return SourceTerm(fn=fn, x1_half_width=abs(center) + half_width,
                      label=f"mode_bump k={k} c={center} w={half_width} a={amplitude}",
                      params={"k": k, "center": center,
                              "half_width": half_width, "amplitude": amplitude})


def sigma_bump(topo: Topography, center: float = 0.0, half_width: float = 1.0,
               amplitude: float = 1.0, sigma_center: float = 0.5,
               sigma_width: float = 0.4) -> SourceTerm:
    """f = A psi((x1-c)/w) psi((sigma-sc)/sw): supported strictly inside
    the channel for any topography."""
    if not (0 < sigma_center - sigma_width and sigma_center + sigma_width < 1):
        raise DomainError("sigma bump must stay strictly inside (0, 1)")

    def fn(x1, x2):
        g = topo.depth(x1)
        sig = x2 / g
        inside = (x2 <= 0) & (x2 >= g)
        return (amplitude * bump((x1 - center) / half_width)
                * bump((sig - sigma_center) / sigma_width) * inside)

    return SourceTerm(fn=fn, x1_half_width=abs(center) + half_width,
                      label=(f"sigma_bump c={center} w={half_width} a={amplitude} "
                             f"sc={sigma_center} sw={sigma_width}"),
                      params={"center": center, "half_width": half_width,
                              "amplitude": amplitude,
                              "sigma_center": sigma_center,
                              "sigma_width": sigma_width})


def random_source(topo: Topography, rng, half_width_cap: float) -> SourceTerm:
    """Seeded random superposition of 2-3 sigma bumps inside |x1| <= cap."""
    n = int(rng.integers(2, 4))
    parts = []
    for _ in range(n):
        w = float(rng.uniform(0.3, 0.7)) * half_width_cap / 2
        c = float(rng.uniform(-1, 1)) * (half_width_cap - w - 1e-3) * 0.8
        sc = float(rng.uniform(0.35, 0.65))
        sw = float(rng.uniform(0.2, min(sc, 1 - sc) - 0.02))
        a = float(rng.uniform(0.5, 1.5)) * (1 if rng.uniform() < 0.5 else -1)
        parts.append(sigma_bump(topo, c, w, a, sc, sw))

    def fn(x1, x2):
        return sum(p.evaluate(x1, x2) for p in parts)

    return SourceTerm(fn=fn,
                      x1_half_width=max(p.x1_half_width for p in parts),
                      label="random " + "; ".join(p.label for p in parts))
