"""Outgoing resolvent: U0, transport, omega, reconstruction, Neumann data."""

import numpy as np
import pytest

from subwave import SupportError, Topography
from subwave.circle import CircleForm, from_samples, project
from subwave.field import ChannelGrid, WaveField, h1_diff, h1_norm
from subwave.scattering import build_assembly
from subwave.sources import SourceTerm, bump, mode_bump, random_source
from subwave.stationary import (
    U0Evaluator,
    build_omega,
    neumann_data,
    neumann_strip_grid,
    omega_cocycle_residual,
    reconstruct_field,
    solve_outgoing,
    solve_outgoing_data,
    transport_data,
)

LAM = 1.0 / np.sqrt(2.0)
FLAT = Topography.flat()
GAUSS = Topography.gaussian_bump(0.5)


@pytest.fixture(scope="module")
def flat_assembly():
    return build_assembly(FLAT, LAM, K=64)


@pytest.fixture(scope="module")
def gauss_assembly():
    return build_assembly(GAUSS, LAM, K=128)


@pytest.fixture(scope="module")
def gauss_solution(gauss_assembly):
    src = mode_sigma_source(GAUSS)
    return solve_outgoing(GAUSS, LAM, src, gauss_assembly, window_L=25.0)


def mode_sigma_source(topo, seed=11):
    return random_source(topo, np.random.default_rng(seed),
                         half_width_cap=topo.support_radius + 1.0)


def zero_source():
    return SourceTerm(fn=lambda a, b: np.zeros_like(a), x1_half_width=1.0)


# --- U0 ------------------------------------------------------------------

def test_u0_zero_source():
    u0 = U0Evaluator(zero_source(), LAM)
    th = np.linspace(-10, 10, 33)
    assert np.max(np.abs(u0.trace(th))) == 0.0
    assert np.max(np.abs(u0.field(th, th))) == 0.0


def test_u0_indicator_in_char_coords():
    sq = np.sqrt(1 - LAM ** 2)

    def fn(x1, x2):
        yp = x1 / LAM + x2 / sq
        ym = -x1 / LAM + x2 / sq
        return 1.0 * ((yp >= 0) & (yp <= 1) & (ym >= 0) & (ym <= 1))

    src = SourceTerm(fn=fn, x1_half_width=LAM, x2_range=(-1.0, 1.0),
                     char_box=((0.0, 1.0), (0.0, 1.0)))
    u0 = U0Evaluator(src, LAM, check=False)
    rng = np.random.default_rng(0)
    Yp = rng.uniform(-0.5, 1.8, 50)
    Ym = rng.uniform(-0.5, 1.8, 50)
    # iterated integral of the indicator; the overall constant is 1/4, not
    # the quoted 4 (P = 4 d+d-, pinned by the finite-difference residual)
    want = 0.25 * np.clip(Yp, 0, 1) * np.clip(Ym, 0, 1)
    got = u0.field(Yp, Ym)
    assert np.max(np.abs(got - want)) < 1e-12


def test_u0_satisfies_pde_by_finite_differences():
    src = mode_bump(k=1, half_width=1.0)
    u0 = U0Evaluator(src, LAM, order=128, check=False)  # FD divides by h^2
    sq = np.sqrt(1 - LAM ** 2)

    def U(x1, x2):
        return u0.field(x1 / LAM + x2 / sq, -x1 / LAM + x2 / sq).real

    h = 5e-4
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.8, 0.8, (12, 2)) * np.array([1.0, 0.4])
    pts[:, 1] -= 1.2
    for x1, x2 in pts:
        uxx = (U(x1 + h, x2) - 2 * U(x1, x2) + U(x1 - h, x2)) / h ** 2
        uyy = (U(x1, x2 + h) - 2 * U(x1, x2) + U(x1, x2 - h)) / h ** 2
        resid = -LAM ** 2 * uxx + (1 - LAM ** 2) * uyy
        assert resid == pytest.approx(float(src.evaluate(x1, x2)), abs=1e-4)


def test_u0_trace_vanishes_outside_shadow():
    src = mode_bump(k=1, half_width=1.0)
    u0 = U0Evaluator(src, LAM)
    lo, hi = u0.theta_shadow()
    th = np.array([lo - 0.2, hi + 0.2, lo - 4.0, hi + 4.0])
    assert np.max(np.abs(u0.trace(th))) == 0.0
    inside = u0.trace(np.linspace(lo + 0.3, hi - 0.3, 7))
    assert np.max(np.abs(inside)) > 0


# --- transport ------------------------------------------------------------

def test_transport_zero(flat_assembly):
    u0 = U0Evaluator(zero_source(), LAM)
    g = transport_data(u0, flat_assembly.intervals, flat_assembly.params,
                       FLAT, K=64)
    assert g.l2_norm() == 0.0


def test_transport_flat_superposes_shifts(flat_assembly):
    src = mode_bump(k=1, half_width=1.0)
    u0 = U0Evaluator(src, LAM)
    fi, params = flat_assembly.intervals, flat_assembly.params
    K = 64
    got = transport_data(u0, fi, params, FLAT, K)
    n = 8 * K
    phi = 2 * np.pi * np.arange(n) / n
    acc = np.zeros(n, dtype=complex)
    for k in range(1, fi.N + 1):
        acc += u0.trace(fi.theta0 + phi + 2 * np.pi * k)
    want = from_samples(-acc, K)
    assert np.max(np.abs(got.coeffs - want.coeffs)) < 1e-12


def test_transport_mean_zero_gaussian(gauss_assembly):
    src = SourceTerm(
        fn=lambda x1, x2: bump(x1 / 0.6) * bump((x2 + 1.5) / 0.8),
        x1_half_width=0.6, label="narrow")
    u0 = U0Evaluator(src, LAM)
    g = transport_data(u0, gauss_assembly.intervals, gauss_assembly.params,
                       GAUSS, K=128)
    assert g.mean_defect < 1e-10 * (1 + g.l2_norm())


def test_transport_support_error(gauss_assembly):
    wide = SourceTerm(fn=lambda a, b: bump(a / 25.0) * bump((b + 1.5) / 0.5),
                      x1_half_width=25.0)
    u0 = U0Evaluator(wide, LAM, check=False)
    with pytest.raises(SupportError):
        transport_data(u0, gauss_assembly.intervals, gauss_assembly.params,
                       GAUSS, K=128)


# --- outgoing data ---------------------------------------------------------

def test_outgoing_data_zero(gauss_assembly):
    v_L, v_R = solve_outgoing_data(CircleForm.zero(128), gauss_assembly)
    assert v_L.l2_norm() == 0.0 and v_R.l2_norm() == 0.0


def test_outgoing_data_flat_negative_mode(flat_assembly):
    g = CircleForm.unit(64, -1)
    v_L, v_R = solve_outgoing_data(g, flat_assembly)
    assert np.max(np.abs(v_L.coeffs - g.coeffs)) < 1e-13
    assert v_R.l2_norm() < 1e-13


def test_outgoing_data_random(gauss_assembly):
    from subwave.circle import random_form
    from subwave.scattering import transport_residual

    rng = np.random.default_rng(2)
    for _ in range(3):
        g = random_form(128, 32, rng)
        v_L, v_R = solve_outgoing_data(g, gauss_assembly)
        assert transport_residual(gauss_assembly, v_L, v_R, g) <= 1e-8
        assert np.linalg.norm(project(v_L, "+").coeffs) <= 1e-10
        assert np.linalg.norm(project(v_R, "-").coeffs) <= 1e-10


# --- omega ------------------------------------------------------------------

def test_omega_zero(flat_assembly):
    fi, params = flat_assembly.intervals, flat_assembly.params
    om = build_omega(CircleForm.zero(64), None, fi, params, FLAT,
                     theta_max=abs(fi.theta0) + 8 * np.pi)
    th = np.linspace(-20, 20, 101)
    assert np.max(np.abs(om.evaluate(th))) == 0.0


def test_omega_flat_sine(flat_assembly):
    # potential of sin(phi) is -cos(phi); omega = 1 - cos(theta - theta0)
    fi, params = flat_assembly.intervals, flat_assembly.params
    K = 64
    phi = 2 * np.pi * np.arange(8 * K) / (8 * K)
    W = from_samples(-np.cos(phi), K)
    om = build_omega(W, None, fi, params, FLAT,
                     theta_max=abs(fi.theta0) + 8 * np.pi)
    th = np.linspace(-15.0, 15.0, 57)
    want = 1.0 - np.cos(th - fi.theta0)
    assert np.max(np.abs(om.evaluate(th) - want)) < 1e-9


def test_omega_cocycle_gaussian(gauss_solution):
    rng = np.random.default_rng(3)
    th = rng.uniform(-18.0, 12.0, 100)
    res = omega_cocycle_residual(gauss_solution.omega, gauss_solution.u0,
                                 gauss_solution.assembly.params, GAUSS, th)
    assert res <= 1e-8


def test_omega_defects(gauss_solution):
    d = gauss_solution.defects()
    assert d["omega_max_jump"] <= 1e-8
    assert d["transport_residual"] <= 1e-8
    assert d["outgoing_plus_L"] <= 1e-10
    assert d["outgoing_minus_R"] <= 1e-10


# --- reconstruction ---------------------------------------------------------

def test_reconstruct_zero(flat_assembly):
    src = zero_source()
    sol = solve_outgoing(FLAT, LAM, src, flat_assembly, window_L=12.0)
    grid = ChannelGrid.make(FLAT, 10.0, 64, 16)
    f = sol.field_on(grid)
    assert np.max(np.abs(f.values)) == 0.0


def green_mode_field(grid, lam, center, width, amp):
    """Outgoing single-mode solution via the Green kernel (flat channel)."""
    c = np.sqrt(1 - lam ** 2) / lam
    s, w = np.polynomial.legendre.leggauss(400)
    s = center + width * s
    w = width * w
    chi = -amp * bump((s - center) / width)   # sin(pi sigma) coefficient
    kern = np.exp(1j * c * np.abs(grid.x1[:, None] - s[None, :])) / (2j * c)
    prof = kern @ (w * chi) * (-1.0 / lam ** 2)
    return WaveField(grid=grid,
                     values=prof[:, None] * np.sin(np.pi * grid.sigma)[None, :],
                     lam=lam)


def test_reconstruct_flat_mode_vs_green_oracle(flat_assembly):
    src = mode_bump(k=1, half_width=1.0)
    sol = solve_outgoing(FLAT, LAM, src, flat_assembly, window_L=16.0)
    grid = ChannelGrid.make(FLAT, 15.0, 512, 64)
    got = sol.field_on(grid)
    want = green_mode_field(grid, LAM, 0.0, 1.0, 1.0)
    rel = h1_diff(got, want) / h1_norm(want)
    assert rel <= 1e-3
    assert got.boundary_defect() <= 1e-8


def test_reconstruct_interior_residual_second_order(gauss_solution):
    src_fn = gauss_solution.u0.source.evaluate
    errs = []
    for n1, n2 in ((192, 24), (384, 48)):
        grid = ChannelGrid.make(GAUSS, 8.0, n1, n2)
        f = gauss_solution.field_on(grid)
        u = f.values
        h1g, hsg = grid.h1, grid.hsigma
        # transformed-operator residual on interior nodes
        from subwave.fdops import assemble_operator, field_to_unknowns, sample_rhs
        lam = LAM
        A = assemble_operator(grid, -lam ** 2 + 0j, 1 - lam ** 2 + 0j,
                              closure="dirichlet")
        got = A @ field_to_unknowns(grid, u)
        want = sample_rhs(grid, src_fn, closure="dirichlet")
        err = np.abs(got - want).reshape(n1 - 1, n2 - 1)[8:-8, :]
        errs.append(np.max(err))
    assert errs[1] < errs[0] / 2.5
    assert errs[1] < 2e-2


def test_reconstruct_dirichlet_rows(gauss_solution):
    grid = ChannelGrid.make(GAUSS, 12.0, 256, 48)
    f = gauss_solution.field_on(grid)
    assert f.boundary_defect() <= 1e-8


def test_linearity(flat_assembly):
    f1 = mode_bump(k=1, half_width=1.0, amplitude=1.0)
    f2 = mode_bump(k=2, half_width=0.8, amplitude=0.7)
    alpha = 1.7

    def combo(x1, x2):
        return alpha * f1.evaluate(x1, x2) + f2.evaluate(x1, x2)

    fc = SourceTerm(fn=combo, x1_half_width=1.0)
    grid = ChannelGrid.make(FLAT, 10.0, 128, 24)
    fields = []
    for s in (f1, f2, fc):
        sol = solve_outgoing(FLAT, LAM, s, flat_assembly, window_L=11.0)
        fields.append(sol.field_on(grid).values)
    err = np.max(np.abs(alpha * fields[0] + fields[1] - fields[2]))
    assert err < 1e-10 * (1 + np.max(np.abs(fields[2])))


# --- Neumann data ------------------------------------------------------------

def test_neumann_zero(flat_assembly):
    grid = neumann_strip_grid(FLAT, LAM, flat_assembly.intervals.theta0,
                              256, 64)
    f = WaveField(grid=grid, values=np.zeros((257, 65), complex), lam=LAM)
    v = neumann_data(f, K_out=32)
    assert v.l2_norm() == 0.0


def test_neumann_flat_single_mode(flat_assembly):
    # (1/2) d/dx2 of û(x1) sin(x2) at x2=0 is û(x1)/2
    src = mode_bump(k=1, half_width=1.0)
    sol = solve_outgoing(FLAT, LAM, src, flat_assembly, window_L=25.0)
    fi = flat_assembly.intervals
    grid = neumann_strip_grid(FLAT, LAM, fi.theta_R0, 512, 64)
    fld = sol.field_on(grid)
    got = neumann_data(fld, K_out=48)
    ref = green_mode_field(grid, LAM, 0.0, 1.0, 1.0)
    # sin x2 = -sin(pi sigma): d/dx2 [prof sin(pi sigma)] = -prof at sigma=0
    prof = ref.values[:, 1] / np.sin(np.pi * grid.sigma[1])
    want = from_samples(-0.5 * prof[:-1], 48)
    assert np.max(np.abs(got.coeffs - want.coeffs)) < 1e-6


def test_neumann_matches_outgoing_data(gauss_solution):
    fi = gauss_solution.assembly.intervals
    for theta0, pot in ((fi.theta0, gauss_solution.v_L),
                        (fi.theta_R0, gauss_solution.v_R)):
        grid = neumann_strip_grid(GAUSS, LAM, theta0, 512, 96)
        fld = gauss_solution.field_on(grid)
        got = neumann_data(fld, K_out=32)
        want = -1.0 * pot.derivative().with_K(32)
        err = np.linalg.norm(got.coeffs - want.coeffs)
        assert err <= 1e-6 * (1 + want.l2_norm())
