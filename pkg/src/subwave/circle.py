"""Mean-zero data on the circle: Fourier sections, projectors, pullbacks.

A :class:`CircleForm` holds truncated Fourier coefficients v(k), k = -K..K
with v(0) = 0, under the convention

    v(theta) = sum_k v(k) e^{i k theta},
    v(k) = (1/2pi) int e^{-i k theta} v(theta) dtheta.

Projectors Pi+- keep the positive/negative frequencies.  The homogeneous
Sobolev norm of order s is (sum |k|^{2s} |v(k)|^2)^{1/2}, and the quantum
flux of v is

    F(v) = (1/i) int conj(v) dv = 2 pi sum_k k |v(k)|^2
         = 2 pi ( ||Pi+ v||_{H^{1/2}}^2 - ||Pi- v||_{H^{1/2}}^2 ).

Pullback along an orientation-preserving degree-one circle map phi comes in
two flavors that are exactly conjugate under d/dtheta (D = diag(ik)):

* ``one_form``:  B_{jk} = (1/2pi) int e^{-ij theta} e^{ik phi} phi' dtheta,
  the action of phi* on coefficients of 1-forms v dtheta;
* ``potential``: C_{jk} = (1/2pi) int e^{-ij theta} e^{ik phi} dtheta,
  plain composition w -> w o phi on coefficients of the antiderivatives,
  with B = D C D^{-1}.

F is invariant under the ``potential`` flavor (change of variables in the
flux integral); that flavor therefore carries all scattering data, for which
F and the H^{1/2} norm are the conserved quantities.  The ``one_form``
flavor instead conserves the flux of the antiderivative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AliasWarning, DomainError, QuadratureWarning

__all__ = [
    "CircleForm",
    "PullbackMatrix",
    "assemble_pullback",
    "from_samples",
    "invert_circle_map",
    "project",
    "quantum_flux",
    "random_form",
    "sobolev_norm",
]


# ---------------------------------------------------------------------------
# CircleForm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleForm:
    """Truncated mean-zero Fourier data; coeffs[j] is v(k = j - K)."""

    K: int
    coeffs: np.ndarray
    mean_defect: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.K + 1,):
            raise DomainError(f"coeffs must have length 2K+1 = {2 * self.K + 1}")
        if c[self.K] != 0:
            c = c.copy()
            c[self.K] = 0.0
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def zero(K: int) -> "CircleForm":
        return CircleForm(K, np.zeros(2 * K + 1, dtype=complex))

    @staticmethod
    def unit(K: int, k: int, amplitude: complex = 1.0) -> "CircleForm":
        if k == 0 or abs(k) > K:
            raise DomainError(f"mode {k} outside the mean-zero band of K={K}")
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K + k] = amplitude
        return CircleForm(K, c)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        flat = theta.reshape(-1)
        out = np.zeros(flat.size, dtype=complex)
        ks = self.wavenumbers
        step = max(1, 2 ** 22 // (2 * self.K + 1))
        for i in range(0, flat.size, step):
            sl = flat[i:i + step]
            out[i:i + step] = np.exp(1j * np.outer(sl, ks)) @ self.coeffs
        return out.reshape(theta.shape)

    def derivative(self) -> "CircleForm":
        """Coefficient map v(k) -> ik v(k) (d/dtheta)."""
        return replace(self, coeffs=1j * self.wavenumbers * self.coeffs)

    def antiderivative(self) -> "CircleForm":
        """Mean-zero antiderivative: v(k) -> v(k) / (ik)."""
        ks = self.wavenumbers.astype(float)
        ks[self.K] = 1.0
        return replace(self, coeffs=self.coeffs / (1j * ks))

    def restrict(self, band: int) -> "CircleForm":
        """Zero out all frequencies with |k| > band."""
        c = self.coeffs.copy()
        mask = np.abs(self.wavenumbers) > band
        c[mask] = 0.0
        return replace(self, coeffs=c)

    def with_K(self, K_new: int) -> "CircleForm":
        """Pad or truncate to a new section size."""
        c = np.zeros(2 * K_new + 1, dtype=complex)
        m = min(self.K, K_new)
        c[K_new - m:K_new + m + 1] = self.coeffs[self.K - m:self.K + m + 1]
        return CircleForm(K_new, c)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))) <= tol)

    def __add__(self, other):
        return replace(self, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other):
        return replace(self, coeffs=self.coeffs - other.coeffs)

    def __mul__(self, a):
        return replace(self, coeffs=a * self.coeffs)

    __rmul__ = __mul__


def from_samples(values, K: int, alias_tol: float = 1e-8) -> CircleForm:
    """DFT of values at n >= 4K+4 uniform angles, truncated to |k| <= K.

    The k=0 coefficient is forced to zero and recorded as ``mean_defect``.
    Emits AliasWarning when the discarded band carries more than
    ``alias_tol`` of the total (mean-free) energy.
    """
    values = np.asarray(values)
    n = values.shape[-1]
    if n < 4 * K + 4:
        raise DomainError(f"need n >= 4K+4 = {4 * K + 4} samples, got {n}")
    c = np.fft.fft(values) / n
    coeffs = np.zeros(2 * K + 1, dtype=complex)
    coeffs[K:] = c[:K + 1]
    coeffs[:K] = c[n - K:]
    defect = float(np.abs(coeffs[K]))
    coeffs[K] = 0.0
    total = float(np.sum(np.abs(c) ** 2)) - np.abs(c[0]) ** 2
    kept = float(np.sum(np.abs(coeffs) ** 2))
    discarded = max(total - kept, 0.0)
    if total > 0 and discarded > alias_tol * total:
        warnings.warn(
            f"truncation to K={K} discards {discarded / total:.2e} of energy",
            AliasWarning, stacklevel=2)
    return CircleForm(K, coeffs, mean_defect=defect)


def project(v: CircleForm, sign: str) -> CircleForm:
    """Pi+ (keep k > 0) or Pi- (keep k < 0)."""
    c = v.coeffs.copy()
    if sign == "+":
        c[:v.K + 1] = 0.0
    elif sign == "-":
        c[v.K:] = 0.0
    else:
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    return replace(v, coeffs=c)


def sobolev_norm(v: CircleForm, s: float) -> float:
    ks = np.abs(v.wavenumbers).astype(float)
    ks[v.K] = 1.0  # k=0 slot is zero anyway
    return float(np.sqrt(np.sum(ks ** (2 * s) * np.abs(v.coeffs) ** 2)))


def quantum_flux(v: CircleForm) -> float:
    """F(v) = (1/i) int conj(v) dv = 2 pi sum k |v(k)|^2."""
    return float(2 * np.pi * np.sum(v.wavenumbers * np.abs(v.coeffs) ** 2))


def random_form(K: int, band: int, rng, real: bool = False,
                decay: float = 0.0) -> CircleForm:
    """Random mean-zero data supported on 1 <= |k| <= band, unit l2 norm."""
    c = np.zeros(2 * K + 1, dtype=complex)
    ks = np.arange(-K, K + 1)
    m = (np.abs(ks) <= band) & (ks != 0)
    amp = rng.standard_normal(m.sum()) + 1j * rng.standard_normal(m.sum())
    if decay > 0:
        amp = amp * np.exp(-decay * np.abs(ks[m]))
    c[m] = amp
    if real:
        c = 0.5 * (c + np.conj(c[::-1]))
    c /= np.linalg.norm(c)
    return CircleForm(K, c)


# ---------------------------------------------------------------------------
# pullback matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PullbackMatrix:
    """Finite section of a pullback operator in the Fourier basis.

    ``entries[j, k]`` indexes frequencies j - K, k - K; the mean row and
    column are identically zero, so mean-zero data stays mean-zero.
    """

    K: int
    entries: np.ndarray
    flavor: str = "one_form"
    meta: dict = field(default_factory=dict)

    def apply(self, v: CircleForm) -> CircleForm:
        if v.K != self.K:
            raise DomainError("section size mismatch")
        return CircleForm(self.K, self.entries @ v.coeffs)

    def as_matrix(self) -> np.ndarray:
        return self.entries


def _dft_columns(phi, weight, K, n):
    """Rows j=-K..K of (1/n) sum_m e^{-ij theta_m} e^{ik phi_m} w_m, all k."""
    ks = np.arange(-K, K + 1)
    out = np.empty((2 * K + 1, 2 * K + 1), dtype=complex)
    step = max(1, 2 ** 22 // n)  # bound the n x step work array
    for i in range(0, 2 * K + 1, step):
        kb = ks[i:i + step]
        E = np.exp(1j * phi[:, None] * kb[None, :])
        if weight is not None:
            E = E * weight[:, None]
        F = np.fft.fft(E, axis=0) / n
        out[K:, i:i + step] = F[:K + 1, :]
        out[:K, i:i + step] = F[n - K:, :]
    return out


def assemble_pullback(map_fn, K: int, n_quad: int | None = None,
                      flavor: str = "one_form", deriv_fn=None,
                      check: bool = True, quad_tol: float = 1e-10,
                      ) -> PullbackMatrix:
    """Assemble the finite-section pullback of a monotone degree-one map.

    Trapezoidal quadrature on ``n_quad`` uniform nodes (spectrally accurate
    for smooth maps); ``n_quad`` defaults to 8K.  ``flavor='one_form'``
    needs ``deriv_fn``; ``flavor='potential'`` ignores it.  With ``check``
    the node count is doubled until no entry moves by more than
    ``quad_tol`` (maps with large derivative dilate the integrand bandwidth
    past 8K); a QuadratureWarning is emitted if the drift survives the
    refinement cap.
    """
    if flavor not in ("one_form", "potential"):
        raise DomainError(f"unknown flavor {flavor!r}")
    if n_quad is None:
        n_quad = 8 * K
    if n_quad < 8 * K:
        raise DomainError(f"n_quad must be at least 8K = {8 * K}")
    if flavor == "one_form" and deriv_fn is None:
        raise DomainError("one_form flavor needs the map derivative")

    def build(n):
        theta = 2 * np.pi * np.arange(n) / n
        phi = np.asarray(map_fn(theta), dtype=float)
        w = np.asarray(deriv_fn(theta), dtype=float) if flavor == "one_form" else None
        M = _dft_columns(phi, w, K, n)
        M[K, :] = 0.0
        M[:, K] = 0.0
        return M

    n = n_quad
    M = build(n)
    if check:
        drift = np.inf
        for _ in range(4):
            M2 = build(2 * n)
            drift = float(np.max(np.abs(M2 - M)))
            n, M = 2 * n, M2
            if drift <= quad_tol:
                break
        if drift > quad_tol:
            warnings.warn(
                f"pullback quadrature not converged: entry drift {drift:.2e}",
                QuadratureWarning, stacklevel=2)
    return PullbackMatrix(K=K, entries=M, flavor=flavor,
                          meta={"n_quad": n})


def invert_circle_map(map_fn, targets, tol: float = 1e-13,
                      max_iter: int = 200):
    """Pointwise monotone inversion of a degree-one lift by bisection."""
    y = np.asarray(targets, dtype=float)
    probe = np.linspace(0.0, 2 * np.pi, 2048)
    disp = np.asarray(map_fn(probe)) - probe
    # sampled extremes can miss the true ones between probes; pad by the
    # largest inter-probe variation
    pad = 3.0 * float(np.max(np.abs(np.diff(disp)))) + 1e-9
    lo = y - float(disp.max()) - pad
    hi = y - float(disp.min()) + pad
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = np.asarray(map_fn(mid)) - y
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# serialization (CSV: k, re, im with k ascending, k=0 omitted)
# ---------------------------------------------------------------------------

def form_to_csv(v: CircleForm, path) -> None:
    with open(path, "w") as fh:
        fh.write("k,re,im\n")
        for k, c in zip(v.wavenumbers, v.coeffs):
            if k == 0:
                continue
            fh.write(f"{k},{float(c.real)!r},{float(c.imag)!r}\n")


def form_from_csv(path) -> CircleForm:
    ks, vals = [], []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("k,"):
            raise DomainError(f"not a CircleForm CSV: {path}")
        for line in fh:
            k_s, re_s, im_s = line.strip().split(",")
            ks.append(int(k_s))
            vals.append(float(re_s) + 1j * float(im_s))
    if not ks:
        return CircleForm.zero(1)
    K = max(abs(k) for k in ks)
    c = np.zeros(2 * K + 1, dtype=complex)
    for k, v in zip(ks, vals):
        c[K + k] = v
    return CircleForm(K, c)
