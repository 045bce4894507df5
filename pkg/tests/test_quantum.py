import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.optimize import brentq

from monopole_orbits import (
    AmbiguousNormalizability,
    DomainError,
    ModelParams,
    alpha_for_zero_mode,
    analytic_zero_mode,
    build_radial_operator,
    count_zero_modes,
    eigenvalues,
    log_grid,
    solve_modes,
    uniform_grid,
)
from monopole_orbits.quantum import (
    classify_tail,
    estimate_zero_tolerance,
    extremal_zero_mode,
    gauge_profile,
    kernel_residual,
    zero_mode_window,
)

GRID = log_grid(1e-4, 1e4, 4096)


# independent oracles ---------------------------------------------------------


def shoot_growth(alpha, rc, q, m, s0=-9.0, s1=7.0):
    """Coefficient of the growing tail of the E = 0 solution regular at r = 0.

    In s = ln r the zero-energy equation reads psi'' = ((m + a)^2 + 2 r^2 V) psi
    with a = -Q r^2 / (2 R^2 (r^2 + R^2)); it is integrated outward by
    scipy and the r^|m + a(inf)| component is read off at large r.
    """

    def rhs(s, u):
        r = math.exp(s)
        a = -q * r * r / (2 * rc * rc * (r * r + rc * rc))
        w = (m + a) ** 2 - 2 * r * r * alpha / (r * r + rc * rc) ** 2
        return [u[1], w * u[0]]

    k0 = abs(m)
    sol = solve_ivp(rhs, (s0, s1), [1.0, k0], method="DOP853", rtol=1e-12, atol=1e-300)
    kin = abs(m - q / (2 * rc * rc))
    psi, dpsi = sol.y[:, -1]
    # psi = A e^{kin s} + B e^{-kin s}
    return 0.5 * (psi + dpsi / kin) * math.exp(-kin * s1 - k0 * s0)


def shooting_alpha(rc, q, m, guess):
    return brentq(lambda a: shoot_growth(a, rc, q, m), 0.8 * guess, 1.2 * guess, xtol=1e-12)


def fd_lowest(alpha, m, q=0.0, r_max=60.0, n=6000):
    """Lowest eigenvalue from a hand-built uniform-grid u = sqrt(r) psi scheme (R = 1)."""
    h = r_max / (n + 1)
    r = h * np.arange(1, n + 1)
    a = -q * r * r / (2 * (r * r + 1.0))
    d = 1.0 / h**2 + ((m + a) ** 2 - 0.25) / (2 * r * r) - alpha / (r * r + 1.0) ** 2
    e = np.full(n - 1, -0.5 / h**2)
    return eigh_tridiagonal(d, e, select="i", select_range=(0, 0))[0][0]


@pytest.mark.parametrize("i_level", [1, 2, 3])
def test_zero_mode_alpha_shooting_q0(i_level):
    target = 2.0 * i_level * (i_level + 1)
    assert shooting_alpha(1.0, 0.0, i_level, target) == pytest.approx(target, rel=1e-8)
    assert alpha_for_zero_mode(1.0, i_level, 0) == target


@pytest.mark.parametrize("i_level,m_charge", [(1, 2), (2, 4), (1, -2), (2, -4), (2, 2)])
def test_zero_mode_alpha_shooting_monopole(i_level, m_charge):
    q = -2.0 * m_charge
    win = zero_mode_window(ModelParams(1.0, 1.0, q), i_level)
    want = alpha_for_zero_mode(1.0, i_level, m_charge)
    # the interior sector nearest the window center carries a regular zero mode
    m = win[len(win) // 2]
    assert shooting_alpha(1.0, q, m, want) == pytest.approx(want, rel=1e-8)


def test_spectral_flow_independent_scheme():
    # the hand-built scheme sees the lowest m = 1 level cross zero near alpha = 4
    cross = brentq(lambda a: fd_lowest(a, 1), 3.6, 4.6, xtol=1e-6)
    assert cross == pytest.approx(4.0, rel=2e-2)


@pytest.mark.parametrize("m", [-1, -2])
def test_monopole_alpha_scan_oracle(m):
    # (I, M) = (2, 4): Q = -8, inner sectors reach E = 0 at alpha = 4.
    # Sectors with m + a(0) = 0 are avoided: Dirichlet u(0) = 0 cannot
    # tell the regular s-wave from the log solution there.
    cross = brentq(lambda a: fd_lowest(a, m, q=-8.0), 3.0, 5.5, xtol=1e-6)
    assert cross == pytest.approx(alpha_for_zero_mode(1.0, 2, 4), rel=2e-2)


@pytest.mark.parametrize("m", [1, 2, -3])
def test_weak_coupling_has_no_bound_states(m):
    op = build_radial_operator(ModelParams(1e-3, 1.0, 0.0), m, GRID)
    assert eigenvalues(op, 1)[0] > 0.0


# discretisation ----------------------------------------------------------------


@pytest.mark.parametrize("order", [2, 4])
def test_bisection_matches_dense(order):
    p = ModelParams(30.0, 1.0, 2.0)
    op = build_radial_operator(p, 1, log_grid(1e-3, 1e3, 300), order=order)
    a = op.to_dense()
    ref = eigh(a, np.diag(op.weight), eigvals_only=True)[:4]
    assert np.allclose(eigenvalues(op, 4), ref, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2])
def test_fourth_order_convergence(m):
    p = ModelParams(30.0, 1.0, 1.0)
    vals = [eigenvalues(build_radial_operator(p, m, log_grid(1e-4, 1e3, n)), 1)[0] for n in (512, 1024, 2048)]
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert 14.0 < ratio < 18.0


def test_s_wave_inner_closure_floor():
    # k = 0 modes do not vanish at r_min; the closure leaves a ~1e-9 floor
    p = ModelParams(30.0, 1.0, 1.0)
    a, b = (eigenvalues(build_radial_operator(p, 0, log_grid(1e-4, 1e3, n)), 1)[0] for n in (2048, 4096))
    assert abs(a - b) < 1e-9 * abs(b)


def test_uniform_grid_agrees_for_bound_state():
    p = ModelParams(30.0, 1.0, 0.0)
    lam_log = eigenvalues(build_radial_operator(p, 1, log_grid(1e-4, 1e3, 2048)), 1)[0]
    lam_uni = eigenvalues(build_radial_operator(p, 1, uniform_grid(40.0, 8000), order=2), 1)[0]
    assert lam_uni == pytest.approx(lam_log, rel=1e-4)
    with pytest.raises(DomainError):
        build_radial_operator(p, 1, uniform_grid(40.0, 100), order=4)


@pytest.mark.parametrize("i_level", [1, 2, 3])
def test_kernel_residual_and_lowest_eigenvalue(i_level):
    p = ModelParams(2.0 * i_level * (i_level + 1), 1.0, 0.0)
    op = build_radial_operator(p, i_level, GRID)
    assert kernel_residual(op, analytic_zero_mode(p, i_level, GRID.nodes)) <= 1e-6
    assert abs(eigenvalues(op, 1)[0]) <= 1e-5


def test_extremal_modes_in_kernel():
    p = ModelParams(4.0, 1.0, -8.0)  # I = 2, M = 4
    for m in (-1, -2, -3):
        op = build_radial_operator(p, m, GRID)
        assert kernel_residual(op, extremal_zero_mode(p, 2, m, GRID.nodes)) <= 1e-6


def test_gauge_relabelling():
    p = ModelParams(4.0, 1.0, -8.0)
    shift = int(round(p.q / (2 * p.r_cal**2)))  # a(inf) = -Q/(2R^2) = 4
    a = eigenvalues(build_radial_operator(p, -1, GRID), 2)
    b = eigenvalues(build_radial_operator(p, -1 - shift, GRID, gauge="origin"), 2)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)
    assert gauge_profile(p, np.array([0.0]))[0] == 0.0


def test_tail_classes():
    r = np.logspace(-2, 4, 2000)
    assert classify_tail(r, r ** -2.0).klass == "normalizable"
    assert classify_tail(r, r ** -1.0).klass == "marginal"
    assert classify_tail(r, np.ones_like(r)).klass == "flat"
    assert classify_tail(r, r ** -0.5).klass == "ambiguous"
    assert classify_tail(r, np.sin(r)).klass == "ambiguous"


def test_solve_modes_criteria():
    p = ModelParams(4.0, 1.0, 0.0)
    op = build_radial_operator(p, 1, GRID)
    paper = solve_modes(op, 1)[0]
    strict = solve_modes(op, 1, criterion="strict")[0]
    assert paper.tail_class == "marginal" and paper.normalizable is True
    assert strict.normalizable is None
    with pytest.raises(DomainError):
        solve_modes(op, 1, criterion="loose")


# counting ------------------------------------------------------------------


@pytest.mark.parametrize("i_level,m_charge", [(1, 2), (2, 4), (1, -2), (2, -4)])
def test_count_equals_charge(i_level, m_charge):
    p = ModelParams(alpha_for_zero_mode(1.0, i_level, m_charge), 1.0, -2.0 * m_charge)
    res = count_zero_modes(p, i_level, m_charge, GRID, details=True)
    assert res.count == abs(m_charge)
    edge = [s for s in res.sectors if abs(s.m) == 2 * i_level]
    assert edge and all(s.tail_class == "flat" and not s.normalizable for s in edge)
    assert count_zero_modes(p, i_level, m_charge, GRID, gauge="origin") == abs(m_charge)


def test_count_reports_neighbours():
    p = ModelParams(4.0, 1.0, -8.0)
    res = count_zero_modes(p, 2, 4, GRID, details=True, extra=2)
    outside = [s for s in res.sectors if not s.in_window]
    assert len(outside) == 4 and not any(s.normalizable and s.candidate for s in outside)


def test_count_strict_criterion_is_inconclusive():
    p = ModelParams(2.0, 1.0, -4.0)
    with pytest.raises(AmbiguousNormalizability):
        count_zero_modes(p, 1, 2, GRID, criterion="strict")


def test_count_input_checks():
    p = ModelParams(2.0, 1.0, -4.0)
    with pytest.raises(DomainError):
        count_zero_modes(p, 1, 3, GRID)
    with pytest.raises(DomainError):
        count_zero_modes(p.with_q(4.0), 1, 2, GRID)
    with pytest.raises(DomainError):
        alpha_for_zero_mode(1.0, 1, 3)


def test_default_tolerance_scale():
    p = ModelParams(2.0, 1.0, -4.0)
    tol = estimate_zero_tolerance(p, GRID, 1)
    # above the eigenvalue noise, far below the spectral-flow step
    assert 1e-9 < tol < 1e-5
