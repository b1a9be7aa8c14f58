"""Geometry: involutions, billiard map, fundamental intervals, circle map."""

import numpy as np
import pytest

from subwave import (
    ConvergenceError,
    DomainError,
    SupercriticalError,
    Topography,
    billiard,
    billiard_derivative,
    billiard_inverse,
    check_subcritical,
    circle_map,
    circle_map_inverse,
    find_fundamental_intervals,
    gamma_minus,
    gamma_plus,
)
from subwave.geometry import ChannelParams, FundamentalIntervals, billiard_theta

LAM = 1.0 / np.sqrt(2.0)


@pytest.fixture(scope="module")
def flat():
    return Topography.flat()


@pytest.fixture(scope="module")
def gauss():
    return Topography.gaussian_bump(0.5)


@pytest.fixture(scope="module")
def pflat(flat):
    return check_subcritical(flat, LAM)


@pytest.fixture(scope="module")
def pgauss(gauss):
    return check_subcritical(gauss, LAM)


# --- independent oracles -----------------------------------------------------

def bisect_gamma_plus(topo, c, x1, lo, hi, iters=200):
    f = lambda s: s + topo.depth(s) / c - x1
    assert f(lo) < 0 < f(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_billiard(topo, c, x1):
    s = bisect_gamma_plus(topo, c, x1, x1, x1 + (np.pi + 1.0) / c)
    return x1 - 2.0 * topo.depth(s) / c


# --- subcriticality ----------------------------------------------------------

def test_check_subcritical_flat(pflat):
    assert pflat.c == pytest.approx(1.0)
    assert pflat.subcritical_margin == pytest.approx(1.0)
    assert pflat.max_slope == 0.0


def test_check_subcritical_gaussian(pgauss):
    # max of A |2 x e^{-x^2}| at x = 1/sqrt(2)
    assert pgauss.max_slope == pytest.approx(0.5 * np.sqrt(2.0 / np.e), abs=1e-9)
    assert pgauss.subcritical_margin > 0


def test_check_supercritical_raises():
    with pytest.raises(SupercriticalError) as exc:
        check_subcritical(Topography.gaussian_bump(2.0), LAM)
    assert exc.value.max_slope == pytest.approx(2.0 * np.sqrt(2.0 / np.e), abs=1e-9)
    assert exc.value.c == pytest.approx(1.0)


def test_check_subcritical_bad_lambda(flat):
    with pytest.raises(DomainError):
        check_subcritical(flat, 1.2)
    with pytest.raises(DomainError):
        check_subcritical(flat, 0.0)


def test_m_satisfies_paper_bound(pgauss, gauss):
    assert pgauss.M > gauss.support_radius + 3 * np.pi / pgauss.c


# --- involutions -------------------------------------------------------------

def test_gamma_plus_flat(pflat, flat):
    assert gamma_plus(pflat, flat, 0.0) == pytest.approx(np.pi, abs=1e-12)


def test_gamma_plus_flat_c2(flat):
    p = check_subcritical(flat, 1.0 / np.sqrt(5.0))  # c = 2
    assert p.c == pytest.approx(2.0)
    assert gamma_plus(p, flat, 5.0) == pytest.approx(5.0 + np.pi / 2.0, abs=1e-12)


def test_gamma_plus_gaussian_vs_bisection(pgauss, gauss):
    s = gamma_plus(pgauss, gauss, 0.0)
    s_oracle = bisect_gamma_plus(gauss, 1.0, 0.0, 0.0, 2 * np.pi)
    assert s == pytest.approx(s_oracle, abs=1e-10)


def test_gamma_minus_flat(pflat, flat):
    assert gamma_minus(pflat, flat, 0.0) == pytest.approx(-np.pi, abs=1e-12)
    s = gamma_minus(pflat, flat, 2 * np.pi)
    assert s - flat.depth(s) - 2 * np.pi == pytest.approx(0.0, abs=1e-12)
    assert s == pytest.approx(np.pi, abs=1e-12)


def test_gamma_minus_gaussian_residual(pgauss, gauss):
    x1 = 2 * np.pi
    s = gamma_minus(pgauss, gauss, x1)
    assert s - gauss.depth(s) / pgauss.c - x1 == pytest.approx(0.0, abs=1e-12)


def test_involution_residuals_everywhere(pgauss, gauss):
    x1 = np.linspace(-20.0, 20.0, 401)
    sp = gamma_plus(pgauss, gauss, x1)
    sm = gamma_minus(pgauss, gauss, x1)
    c = pgauss.c
    assert np.max(np.abs(sp + gauss.depth(sp) / c - x1)) < 1e-10
    assert np.max(np.abs(sm - gauss.depth(sm) / c - x1)) < 1e-10


# --- billiard map ------------------------------------------------------------

def test_billiard_flat_shift(pflat, flat):
    assert billiard(pflat, flat, -7.0) == pytest.approx(-7.0 + 2 * np.pi, abs=1e-12)


def test_billiard_flat_c2(flat):
    p = check_subcritical(flat, 1.0 / np.sqrt(5.0))
    assert billiard(p, flat, 0.0) == pytest.approx(np.pi, abs=1e-12)


def test_billiard_gaussian_level_sets(pgauss, gauss):
    # the three points of the bounce must share the +/- level sets
    for x1 in [0.0, 0.7, -1.3, 3.0]:
        s = gamma_plus(pgauss, gauss, x1)
        y = billiard(pgauss, gauss, x1)
        g = gauss.depth(s)
        c = pgauss.c
        assert x1 == pytest.approx(s + g / c, abs=1e-10)   # ell+ level
        assert y == pytest.approx(s - g / c, abs=1e-10)    # ell- level


def test_billiard_gaussian_vs_bisection_oracle(pgauss, gauss):
    for x1 in np.linspace(-9.0, 9.0, 41):
        assert billiard(pgauss, gauss, x1) == pytest.approx(
            bisect_billiard(gauss, pgauss.c, x1), abs=1e-10)


def test_billiard_inverse_roundtrip(pgauss, gauss):
    x1 = np.linspace(-12.0, 12.0, 101)
    y = billiard(pgauss, gauss, x1)
    assert np.max(np.abs(billiard_inverse(pgauss, gauss, y) - x1)) < 1e-10


def test_billiard_monotone_and_flat_tail(pgauss, gauss):
    x1 = np.linspace(-25.0, 25.0, 1501)
    b = billiard(pgauss, gauss, x1)
    assert np.all(np.diff(b) > 0)
    db = billiard_derivative(pgauss, gauss, x1)
    assert np.all(db > 0)
    m = np.abs(x1) >= pgauss.M
    assert np.max(np.abs(b[m] - x1[m] - 2 * np.pi / pgauss.c)) < 1e-12


def test_billiard_derivative_flat(pflat, flat):
    assert billiard_derivative(pflat, flat, 1.234) == pytest.approx(1.0, abs=1e-14)


def test_billiard_derivative_at_max_slope(pgauss, gauss):
    # abscissa whose gamma_plus image is the max-slope point s0 = -1/sqrt(2)
    s0 = -1.0 / np.sqrt(2.0)
    x1 = s0 + gauss.depth(s0) / pgauss.c
    m = 0.5 * np.sqrt(2.0 / np.e)
    expect = (pgauss.c - m) / (pgauss.c + m)
    assert billiard_derivative(pgauss, gauss, x1) == pytest.approx(expect, rel=1e-9)
    assert expect == pytest.approx(0.3997, abs=1e-4)


def test_billiard_derivative_vs_finite_difference(pgauss, gauss):
    h = 1e-5
    for x1 in np.linspace(-8.0, 8.0, 33):
        fd = (billiard(pgauss, gauss, x1 + h)
              - billiard(pgauss, gauss, x1 - h)) / (2 * h)
        assert billiard_derivative(pgauss, gauss, x1) == pytest.approx(fd, rel=1e-6)


# --- fundamental intervals ---------------------------------------------------

def test_fundamental_intervals_flat_pure_shift(flat):
    p = ChannelParams(lam=LAM, c=1.0, M=3 * np.pi, max_slope=0.0,
                      subcritical_margin=1.0)
    fi = find_fundamental_intervals(p, flat)
    assert fi.theta0 == pytest.approx(-5 * np.pi)
    assert fi.N == 5  # b^4(theta0) = cM exactly; strict exceedance continues
    assert fi.theta_R0 == pytest.approx(fi.theta0 + 10 * np.pi, abs=1e-12)


def test_fundamental_intervals_flat_c2(flat):
    p = ChannelParams(lam=1.0 / np.sqrt(5.0), c=2.0, M=1.5 * np.pi + 1.0,
                      max_slope=0.0, subcritical_margin=1.0)
    fi = find_fundamental_intervals(p, flat)
    cM, theta0 = p.c * p.M, -p.c * p.M - 2 * np.pi
    assert fi.N == int(np.ceil((cM - theta0) / (2 * np.pi)))
    assert fi.N == 5


def test_fundamental_intervals_gaussian_vs_oracle(pgauss, gauss):
    fi = find_fundamental_intervals(pgauss, gauss)
    cM = pgauss.c * pgauss.M
    th, n = fi.theta0, 0
    while th <= cM:
        th = pgauss.c * bisect_billiard(gauss, pgauss.c, th / pgauss.c)
        n += 1
    assert n == fi.N
    assert th == pytest.approx(fi.theta_R0, abs=1e-9)
    assert fi.theta0 + 2 * np.pi <= -cM + 1e-12
    assert fi.theta_R0 > cM


def test_periodic_compatibility(pgauss, gauss):
    fi = find_fundamental_intervals(pgauss, gauss)
    for th in [fi.theta0, fi.theta0 + np.pi, fi.theta0 + 2 * np.pi]:
        a, b = th, th + 2 * np.pi
        for _ in range(fi.N):
            a = billiard_theta(pgauss, gauss, a)
            b = billiard_theta(pgauss, gauss, b)
        assert b - a == pytest.approx(2 * np.pi, abs=1e-10)


# --- circle map --------------------------------------------------------------

def test_circle_map_flat_identity(flat, pflat):
    fi = find_fundamental_intervals(pflat, flat)
    phi = np.linspace(0, 2 * np.pi, 65, endpoint=False)
    beta, dbeta = circle_map(fi, pflat, flat, phi)
    assert np.max(np.abs(beta - phi)) < 1e-11
    assert np.max(np.abs(dbeta - 1.0)) < 1e-11


def test_circle_map_degree_one(pgauss, gauss):
    fi = find_fundamental_intervals(pgauss, gauss)
    n = 2048
    phi = 2 * np.pi * np.arange(n) / n
    _, dbeta = circle_map(fi, pgauss, gauss, phi)
    integral = 2 * np.pi * np.mean(dbeta)  # periodic trapezoid
    assert integral == pytest.approx(2 * np.pi, abs=1e-8)


def test_circle_map_derivative_vs_fd(pgauss, gauss):
    fi = find_fundamental_intervals(pgauss, gauss)
    h = 1e-5
    phi = np.linspace(0.3, 2 * np.pi - 0.3, 17)
    bp, dp = circle_map(fi, pgauss, gauss, phi + h)
    bm, _ = circle_map(fi, pgauss, gauss, phi - h)
    b0, d0 = circle_map(fi, pgauss, gauss, phi)
    assert np.max(np.abs((bp - bm) / (2 * h) - d0) / d0) < 1e-6


def test_circle_map_inverse(pgauss, gauss):
    fi = find_fundamental_intervals(pgauss, gauss)
    phi = np.linspace(0.0, 2 * np.pi, 33, endpoint=False)
    beta, _ = circle_map(fi, pgauss, gauss, phi)
    back = circle_map_inverse(fi, pgauss, gauss, beta)
    assert np.max(np.abs(back - phi)) < 1e-10


# --- spline topography -------------------------------------------------------

def test_spline_topography_subcritical_and_monotone():
    x = np.linspace(-4.0, 4.0, 17)
    vals = -np.pi + 0.4 * np.exp(-x ** 2)
    vals[0] = vals[-1] = -np.pi
    topo = Topography.spline(x, vals)
    p = check_subcritical(topo, LAM)
    assert p.subcritical_margin > 0
    xs = np.linspace(-10, 10, 301)
    b = billiard(p, topo, xs)
    assert np.all(np.diff(b) > 0)
    # exact flat join beyond the knots
    assert topo.depth(np.array([4.5, -7.0]))[0] == -np.pi


def test_spline_rejects_bad_input():
    with pytest.raises(DomainError):
        Topography.spline([0, 1, 2, 3], [-np.pi, -1.0, -1.0, -2.0])  # ends not -pi
