"""Boundary-fitted grids, wave fields, and H1 comparison machinery.

The channel strip {G(x1) < x2 < 0, |x1| <= L} is mapped to the rectangle
[x1_min, x1_max] x [0, 1] by sigma = x2 / G(x1) (sigma = 0 is the surface,
sigma = 1 the bottom).  Fields are stored on tensor grids of n1 x n2 cells
(n1+1 by n2+1 nodes, so refining by 2 nests the nodes).

Cartesian derivatives of U(x1, sigma) come from the chain rule

    u_x2 = U_sigma / G,
    u_x1 = U_x1 - (sigma G'/G) U_sigma,

and integrals carry the Jacobian |G(x1)| dsigma dx1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import Topography


def smooth_cutoff(x, radius: float, width: float = 1.0):
    """C-infinity plateau: 1 for |x| <= radius, 0 for |x| >= radius + width."""
    x = np.asarray(x, dtype=float)
    t = (np.abs(x) - radius) / width
    out = np.zeros_like(t)
    out[t <= 0] = 1.0
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    h1 = np.exp(-1.0 / (1.0 - tm))
    h0 = np.exp(-1.0 / tm)
    out[mid] = h1 / (h0 + h1)
    return out


@dataclass(frozen=True)
class ChannelGrid:
    """Tensor grid on the boundary-fitted rectangle."""

    topo: Topography
    x1: np.ndarray      # n1+1 nodes
    sigma: np.ndarray   # n2+1 nodes
    depth: np.ndarray = field(default=None)       # G at x1 nodes
    dslope: np.ndarray = field(default=None)      # G' at x1 nodes
    dcurv: np.ndarray = field(default=None)       # G'' at x1 nodes

    @staticmethod
    def make(topo: Topography, L: float, n1: int, n2: int,
             x1_min: float | None = None, x1_max: float | None = None,
             ) -> "ChannelGrid":
        if x1_min is None:
            x1_min, x1_max = -float(L), float(L)
        x1 = np.linspace(x1_min, x1_max, n1 + 1)
        sigma = np.linspace(0.0, 1.0, n2 + 1)
        return ChannelGrid(topo=topo, x1=x1, sigma=sigma,
                           depth=topo.depth(x1), dslope=topo.slope(x1),
                           dcurv=topo.curvature(x1))

    @property
    def n1(self) -> int:
        return self.x1.size - 1

    @property
    def n2(self) -> int:
        return self.sigma.size - 1

    @property
    def h1(self) -> float:
        return float(self.x1[1] - self.x1[0])

    @property
    def hsigma(self) -> float:
        return float(self.sigma[1] - self.sigma[0])

    def x2_mesh(self) -> np.ndarray:
        return np.outer(self.depth, self.sigma)  # (n1+1, n2+1)

    def column_slice(self, x1_lo: float, x1_hi: float) -> slice:
        i0 = int(np.searchsorted(self.x1, x1_lo - 1e-12))
        i1 = int(np.searchsorted(self.x1, x1_hi + 1e-12))
        return slice(i0, i1)

    def subgrid(self, cols: slice) -> "ChannelGrid":
        return ChannelGrid(topo=self.topo, x1=self.x1[cols],
                           sigma=self.sigma, depth=self.depth[cols],
                           dslope=self.dslope[cols], dcurv=self.dcurv[cols])


@dataclass
class WaveField:
    """Field values on a ChannelGrid; metadata for file headers."""

    grid: ChannelGrid
    values: np.ndarray      # (n1+1, n2+1)
    lam: float
    kind: str = "complex"

    def __post_init__(self):
        expect = (self.grid.x1.size, self.grid.sigma.size)
        if self.values.shape != expect:
            raise DomainError(f"field shape {self.values.shape} != {expect}")

    def topo_hash(self) -> str:
        return hashlib.sha256(self.grid.topo.label().encode()).hexdigest()[:16]

    def boundary_defect(self) -> float:
        v = self.values
        return float(max(np.max(np.abs(v[:, 0])), np.max(np.abs(v[:, -1]))))

    def copy_with(self, values: np.ndarray) -> "WaveField":
        return WaveField(grid=self.grid, values=values, lam=self.lam,
                         kind=self.kind)


def _d_dx1(values: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    out[0] = (values[1] - values[0]) / h
    out[-1] = (values[-1] - values[-2]) / h
    return out


def _d_dsigma(values: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(values)
    out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2 * h)
    out[:, 0] = (values[:, 1] - values[:, 0]) / h
    out[:, -1] = (values[:, -1] - values[:, -2]) / h
    return out


def cartesian_gradient(f: WaveField):
    """(u_x1, u_x2) on the nodes via the chain rule."""
    g = f.grid
    U_s = _d_dsigma(f.values, g.hsigma)
    U_x = _d_dx1(f.values, g.h1)
    G = g.depth[:, None]
    a = g.sigma[None, :] * g.dslope[:, None] / G
    return U_x - a * U_s, U_s / G


def _quad_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def integrate(f: WaveField, integrand: np.ndarray) -> float:
    """Trapezoid integral of a nodal integrand over the physical strip."""
    g = f.grid
    w1 = _quad_weights(g.n1, g.h1)
    w2 = _quad_weights(g.n2, g.hsigma)
    jac = np.abs(g.depth)
    return float(np.einsum("i,j,ij->", w1 * jac, w2, integrand))


def h1_norm(f: WaveField, cutoff: np.ndarray | None = None) -> float:
    """Full H1 norm of (optionally chi-weighted) field.

    ``cutoff`` is a per-column weight chi(x1); the product chi*u is formed
    before differentiating, matching ||chi u||_{H1}.
    """
    vals = f.values if cutoff is None else f.values * cutoff[:, None]
    ff = f.copy_with(vals)
    ux1, ux2 = cartesian_gradient(ff)
    dens = np.abs(vals) ** 2 + np.abs(ux1) ** 2 + np.abs(ux2) ** 2
    return float(np.sqrt(integrate(f, dens)))


def l2_norm(f: WaveField, cutoff: np.ndarray | None = None) -> float:
    vals = f.values if cutoff is None else f.values * cutoff[:, None]
    return float(np.sqrt(integrate(f, np.abs(vals) ** 2)))


def h1_diff(f1: WaveField, f2: WaveField,
            cutoff: np.ndarray | None = None) -> float:
    if f1.values.shape != f2.values.shape:
        raise DomainError("fields live on different grids")
    return h1_norm(f1.copy_with(f1.values - f2.values), cutoff)
