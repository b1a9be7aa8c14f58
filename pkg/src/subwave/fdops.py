"""Second-order finite-difference assembly in boundary-fitted coordinates.

For constant coefficients (alpha1, alpha2) the operator
alpha1 d^2/dx1^2 + alpha2 d^2/dx2^2 acting on u(x1, x2) = U(x1, sigma),
sigma = x2/G(x1), transforms by the chain rule to

    alpha1 U_x1x1  -  2 alpha1 a U_x1sigma
    + (alpha1 a^2 + alpha2 / G^2) U_sigmasigma  +  alpha1 q U_sigma,

    a = sigma G'/G,     q = 2 sigma (G'/G)^2 - sigma G''/G.

(The stationary operator is (alpha1, alpha2) = (-omega^2, 1-omega^2), the
Laplacian is (1, 1), and d^2/dx2^2 alone is (0, 1).)  Dirichlet rows at
sigma = 0, 1 are eliminated; centered second-order stencils everywhere,
with the mixed term on the four-corner cross.

Truncation faces x1 = +-L support two closures:

* ``dirichlet`` - hard walls, face columns eliminated;
* ``radiation`` - per-sigma-mode outgoing closure, exact at the discrete
  level: in the flat ends the per-mode recurrence
  alpha1 (U_{i+1} - 2 U_i + U_{i-1})/h1^2 + (alpha2/pi^2) mu_m U_i = 0
  has root pair (r, 1/r); the ghost column is V diag(r_m) V^{-1} applied
  to the face column, with |r_m| < 1 the decaying (outgoing for
  Im omega < 0) branch and V the discrete sine basis.  Faces must lie in
  the flat region.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .field import ChannelGrid

__all__ = ["assemble_operator", "d2x2_matrix", "sine_basis", "decaying_roots"]


def sine_basis(n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the Dirichlet second difference on n2 cells.

    Returns (V, mu): V[j-1, m-1] = sin(m pi j / n2) for j, m = 1..n2-1 and
    mu_m = -(4/h^2) sin^2(m pi / (2 n2)) with h = 1/n2.
    """
    j = np.arange(1, n2)
    V = np.sin(np.pi * np.outer(j, j) / n2)
    h = 1.0 / n2
    mu = -(4.0 / h ** 2) * np.sin(np.pi * j / (2 * n2)) ** 2
    return V, mu


def decaying_roots(alpha1, alpha2, mu, h1: float, depth: float) -> np.ndarray:
    """|r| < 1 roots of r^2 - (2 + tau) r + 1 = 0 per sigma-mode."""
    tau = -(h1 ** 2) * (alpha2 / alpha1) * mu / depth ** 2
    b = 2.0 + tau
    disc = np.sqrt(b * b - 4.0 + 0j)
    r1 = (b + disc) / 2.0
    r2 = (b - disc) / 2.0
    r = np.where(np.abs(r1) < np.abs(r2), r1, r2)
    if np.any(np.abs(r) >= 1.0 - 1e-14):
        raise DomainError(
            "no strictly decaying branch: frequency too close to the real "
            "axis for this grid")
    return r


def _coefficients(grid: ChannelGrid, alpha1, alpha2, cols: np.ndarray):
    """Stencil coefficient fields on unknown nodes (len(cols), n2-1)."""
    G = grid.depth[cols][:, None]
    Gp = grid.dslope[cols][:, None]
    Gpp = grid.dcurv[cols][:, None]
    s = grid.sigma[1:-1][None, :]
    a = s * Gp / G
    q = 2.0 * s * (Gp / G) ** 2 - s * Gpp / G
    c_x1x1 = alpha1 * np.ones_like(a)
    c_mixed = -2.0 * alpha1 * a
    c_ss = alpha1 * a ** 2 + alpha2 / G ** 2
    c_s = alpha1 * q
    return c_x1x1, c_mixed, c_ss, c_s


def assemble_operator(grid: ChannelGrid, alpha1, alpha2,
                      closure: str = "dirichlet") -> sp.csc_matrix:
    """Sparse section of the transformed operator on the unknown nodes.

    Unknowns are interior sigma rows j = 1..n2-1 at columns
    i = 1..n1-1 (``dirichlet``) or i = 0..n1 (``radiation``), indexed
    idx = col * (n2-1) + (j-1).
    """
    n1, n2 = grid.n1, grid.n2
    h1, hs = grid.h1, grid.hsigma
    if closure == "dirichlet":
        cols = np.arange(1, n1)
    elif closure == "radiation":
        cols = np.arange(0, n1 + 1)
        flat = (np.abs(grid.dslope[0]) == 0.0) and (np.abs(grid.dslope[-1]) == 0.0)
        if not flat:
            raise DomainError("radiation closure requires flat truncation faces")
    else:
        raise DomainError(f"unknown closure {closure!r}")

    nc, nj = cols.size, n2 - 1
    ntot = nc * nj
    dtype = complex if (np.iscomplexobj(alpha1) or np.iscomplexobj(alpha2)) else float
    c_x1x1, c_mixed, c_ss, c_s = _coefficients(grid, alpha1, alpha2, cols)

    rows_, cols_, vals_ = [], [], []

    def add(r, c, v):
        rows_.append(np.asarray(r, dtype=np.int64).ravel())
        cols_.append(np.asarray(c, dtype=np.int64).ravel())
        vals_.append(np.broadcast_to(np.asarray(v, dtype=dtype), np.shape(r)).ravel())

    K = np.arange(nc)[:, None]   # unknown column index
    J = np.arange(nj)[None, :]   # sigma row index (0 <-> j=1)
    idx = K * nj + J             # (nc, nj) unknown index

    # sigma-sigma and sigma terms, tridiagonal within each column
    add(idx, idx, -2.0 * c_ss / hs ** 2 - 2.0 * c_x1x1 / h1 ** 2)
    up = c_ss / hs ** 2 + c_s / (2 * hs)
    dn = c_ss / hs ** 2 - c_s / (2 * hs)
    add(idx[:, :-1], idx[:, 1:], up[:, :-1])
    add(idx[:, 1:], idx[:, :-1], dn[:, 1:])

    # x1-x1 neighbors (between unknown columns only)
    add(idx[1:], idx[:-1], c_x1x1[1:] / h1 ** 2)
    add(idx[:-1], idx[1:], c_x1x1[:-1] / h1 ** 2)

    # mixed term on the four-corner cross
    cm = c_mixed / (4 * h1 * hs)
    if np.any(cm != 0):
        add(idx[1:, :-1], idx[:-1, 1:], -cm[1:, :-1])   # (i-1, j+1)
        add(idx[1:, 1:], idx[:-1, :-1], cm[1:, 1:])     # (i-1, j-1)
        add(idx[:-1, :-1], idx[1:, 1:], cm[:-1, :-1])   # (i+1, j+1)
        add(idx[:-1, 1:], idx[1:, :-1], -cm[:-1, 1:])   # (i+1, j-1)

    A = sp.coo_matrix(
        (np.concatenate(vals_), (np.concatenate(rows_), np.concatenate(cols_))),
        shape=(ntot, ntot)).tocsc()

    if closure == "radiation":
        V, mu = sine_basis(n2)
        Vinv = (2.0 / n2) * V.T
        r = decaying_roots(alpha1, alpha2, mu, h1, float(-grid.depth[0]))
        Q = (V * r[None, :]) @ Vinv  # ghost column = Q @ face column
        blocks = sp.lil_matrix((ntot, ntot), dtype=complex)
        face_scale = alpha1 / h1 ** 2
        left = slice(0, nj)
        right = slice((nc - 1) * nj, nc * nj)
        blocks[left, left] = face_scale * Q
        blocks[right, right] = face_scale * Q
        A = (A + blocks.tocsc()).tocsc()
    return A


def d2x2_matrix(grid: ChannelGrid, closure: str = "dirichlet") -> sp.csc_matrix:
    """(1/G^2) d^2/dsigma^2 on the same unknown layout (exact transform)."""
    n1, n2 = grid.n1, grid.n2
    hs = grid.hsigma
    cols = np.arange(1, n1) if closure == "dirichlet" else np.arange(0, n1 + 1)
    nj = n2 - 1
    inv_g2 = 1.0 / grid.depth[cols] ** 2
    main = np.repeat(-2.0 * inv_g2 / hs ** 2, nj)
    off = np.repeat(inv_g2 / hs ** 2, nj)
    upper = off.copy()
    upper[nj - 1::nj] = 0.0  # no coupling across column blocks
    n = cols.size * nj
    return sp.diags([upper[:-1], main, upper[:-1]], [-1, 0, 1],
                    shape=(n, n)).tocsc()


def sample_rhs(grid: ChannelGrid, fn, closure: str = "dirichlet") -> np.ndarray:
    """Evaluate f(x1, x2) at the unknown nodes, flattened to the index map."""
    n1, n2 = grid.n1, grid.n2
    cols = np.arange(1, n1) if closure == "dirichlet" else np.arange(0, n1 + 1)
    x1 = grid.x1[cols][:, None]
    x2 = np.outer(grid.depth[cols], grid.sigma[1:-1])
    vals = fn(np.broadcast_to(x1, x2.shape), x2)
    return np.asarray(vals).reshape(-1)


def unknowns_to_field(grid: ChannelGrid, u: np.ndarray,
                      closure: str = "dirichlet") -> np.ndarray:
    """Scatter the unknown vector into a full (n1+1, n2+1) nodal array."""
    n1, n2 = grid.n1, grid.n2
    out = np.zeros((n1 + 1, n2 + 1), dtype=u.dtype)
    if closure == "dirichlet":
        out[1:n1, 1:n2] = u.reshape(n1 - 1, n2 - 1)
    else:
        out[:, 1:n2] = u.reshape(n1 + 1, n2 - 1)
    return out


def field_to_unknowns(grid: ChannelGrid, values: np.ndarray,
                      closure: str = "dirichlet") -> np.ndarray:
    n1, n2 = grid.n1, grid.n2
    if closure == "dirichlet":
        return values[1:n1, 1:n2].reshape(-1)
    return values[:, 1:n2].reshape(-1)
