import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from skimage.measure import EllipseModel

from monopole_orbits import (
    DegenerateFit,
    DomainError,
    ModelParams,
    NoCircularOrbit,
    NotZeroEnergy,
    PhaseState,
    ZeroAngularMomentum,
    centered_orbit_determinant,
    constraint_residuals,
    determinant_roots,
    e0_state_for,
    fit_circle,
    hodograph_analysis,
    integrate,
    make_e0_state,
    minimum_radius,
    period_formula,
    predict_geometry,
    stability_determinant,
)
from monopole_orbits.experiments import closure_check, random_e0_states
from monopole_orbits.fitting import fit_circle_points, fit_ellipse_points
from monopole_orbits.geometry import centered_orbit_frequency, hodograph_eccentricity


# fitting -------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    cx=st.floats(-5, 5), cy=st.floats(-5, 5), r=st.floats(0.05, 20), t0=st.floats(0, 6.3),
    span=st.floats(1.2, 2 * math.pi),
)
def test_circle_fit_exact(cx, cy, r, t0, span):
    t = t0 + np.linspace(0, span, 50)
    c, rad, rms = fit_circle_points(np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)]))
    assert np.allclose(c, [cx, cy], atol=1e-9 * (r + 1))
    assert rad == pytest.approx(r, rel=1e-9)
    assert rms < 1e-9 * (r + 1)


def test_circle_fit_matches_reference_on_noise():
    rng = np.random.default_rng(1)
    t = rng.uniform(0, 2 * np.pi, 300)
    pts = np.column_stack([1 + 2 * np.cos(t), -1 + 2 * np.sin(t)]) + rng.normal(0, 0.01, (300, 2))
    # geometric least squares by a generic minimiser
    cost = lambda v: np.sum((np.hypot(pts[:, 0] - v[0], pts[:, 1] - v[1]) - v[2]) ** 2)
    ref = minimize(cost, [0.0, 0.0, 1.0], method="Nelder-Mead", options=dict(xatol=1e-12, fatol=1e-15, maxiter=20000))
    c, r, _ = fit_circle_points(pts)
    assert np.allclose(c, ref.x[:2], atol=1e-6)
    assert r == pytest.approx(ref.x[2], abs=1e-6)


def test_circle_fit_degenerate():
    with pytest.raises(DegenerateFit):
        fit_circle_points(np.array([[0, 0], [1, 1], [2, 2], [3, 3.0]]))
    with pytest.raises(DegenerateFit):
        fit_circle_points(np.zeros((2, 2)))
    t = np.linspace(0, 0.3, 20)
    with pytest.raises(DegenerateFit):
        fit_circle_points(np.column_stack([np.cos(t), np.sin(t)]))


@pytest.mark.parametrize("a,b,th", [(2.0, 1.0, 0.3), (1.0, 0.999, 2.0), (5.0, 0.5, 1.4)])
def test_ellipse_fit_exact(a, b, th):
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    x = 0.5 + a * np.cos(t) * np.cos(th) - b * np.sin(t) * np.sin(th)
    y = -0.2 + a * np.cos(t) * np.sin(th) + b * np.sin(t) * np.cos(th)
    c, fa, fb, ang, rms = fit_ellipse_points(np.column_stack([x, y]))
    assert np.allclose(c, [0.5, -0.2], atol=1e-9)
    assert fa == pytest.approx(a, rel=1e-9) and fb == pytest.approx(b, rel=1e-9)
    assert abs(((ang - th) + np.pi / 2) % np.pi - np.pi / 2) < 1e-6
    ref = EllipseModel()
    assert ref.estimate(np.column_stack([x, y]))
    assert max(ref.params[2:4]) == pytest.approx(a, rel=1e-6)


# predictions ---------------------------------------------------------------


def test_reference_orbit(p2):
    g = predict_geometry(p2, e0_state_for(p2, 1.0))
    assert g.radius_r == pytest.approx(1.0) and g.offset_l == pytest.approx(1.0)
    assert g.period_pred == pytest.approx(3 * math.pi)
    assert np.allclose(g.center, (1.0, 0.0))


def test_period_formula_signs():
    p = ModelParams(2.0, 1.0, 2.0)
    assert period_formula(p.with_q(0), 1.0) == pytest.approx(2 * math.pi)
    assert period_formula(p, 1.0) == pytest.approx(3 * math.pi)
    # reversed sense: the flux term changes sign with L_z
    assert period_formula(p, -1.0) == pytest.approx(math.pi)
    # pi (R^2 + l^2 + R_cal^2)/|L| form
    for lz in (0.7, -0.3, 1.1):
        pp = ModelParams(2.0, 1.0, -1.5)
        R2 = pp.alpha / (2 * lz * lz)
        l2 = R2 - 1 + pp.q / (2 * lz)
        if l2 >= 0:
            assert period_formula(pp, lz) == pytest.approx(math.pi * (R2 + l2 + 1) / abs(lz))
    with pytest.raises(ZeroAngularMomentum):
        period_formula(p, 0.0)


@pytest.mark.parametrize("q", [0.0, 2.0, -2.0, 8.0, -8.0])
def test_closure_random(q):
    p = ModelParams(2.0, 1.0, q)
    for s in random_e0_states(p, 4, seed=7):
        r = closure_check(p, s)
        assert r.fit_residual <= 1e-6
        assert r.center_err <= 1e-5 and r.radius_err <= 1e-5
        assert r.period_rel_err <= 1e-6


def test_constraints_hold_along_orbit(p2):
    s = e0_state_for(p2, 0.8, axis_angle=1.0)
    traj = integrate(p2, s, period_formula(p2, 0.8))
    res = constraint_residuals(p2, traj, n_dense=500)
    assert res["max1"] < 1e-7 and res["max2"] < 1e-7
    fit = fit_circle(traj)
    assert fit.fit_residual < 1e-8


def test_prediction_errors(p2):
    with pytest.raises(NotZeroEnergy):
        predict_geometry(p2, PhaseState(1.0, 0.0, 0.0, 0.1))
    with pytest.raises(ZeroAngularMomentum):
        predict_geometry(p2.with_q(0), make_e0_state(p2, 1.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        e0_state_for(p2, 5.0)
    with pytest.raises(ZeroAngularMomentum):
        e0_state_for(p2, 0.0)


def test_minimum_radius_brute_force():
    p = ModelParams(2.0, 1.0, 3.0)
    best = math.inf
    for lz in np.concatenate([np.linspace(-5, -1e-3, 20001), np.linspace(1e-3, 5, 20001)]):
        R2 = p.alpha / (2 * lz * lz)
        if R2 - 1 + p.q / (2 * lz) >= 0:
            best = min(best, math.sqrt(R2))
    assert minimum_radius(p) == pytest.approx(best, rel=1e-3)
    assert minimum_radius(p) <= best


# stability -----------------------------------------------------------------


def test_stability_determinant_values(p0):
    assert stability_determinant(p0, 1.0, 0.0).det_m == pytest.approx(0.0, abs=1e-12)
    assert stability_determinant(p0, 2.0, 0.0).det_m == pytest.approx(12 / 125, abs=1e-12)
    roots, _ = determinant_roots(p0, 0.0, np.linspace(0.05, 20, 2000))
    assert len(roots) == 1 and roots[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.7])
@pytest.mark.parametrize("branch", [1, -1])
def test_centered_frequency_by_integration(a, branch):
    # the predicted omega must give a circular orbit in the package flow
    p = ModelParams(2.0, 1.0, 2.0)
    w = centered_orbit_frequency(p, a, branch)
    s = PhaseState(a, 0.0, 0.0, -w * a)  # clockwise positive
    # one revolution; centered orbits are unstable so roundoff grows slowly
    traj = integrate(p, s, 2 * math.pi / abs(w), 1e-12)
    r = np.hypot(traj.z[:, 0], traj.z[:, 1])
    assert np.max(np.abs(r - a)) < 1e-8
    wrong = integrate(p, PhaseState(a, 0.0, 0.0, w * a), 2 * math.pi / abs(w), 1e-12)
    assert np.max(np.abs(np.hypot(wrong.z[:, 0], wrong.z[:, 1]) - a)) > 1e-3
    d = centered_orbit_determinant(p, a, branch)
    assert d == pytest.approx(w * p.q * a * a / (a * a + 1) ** 2)


def test_centered_determinant_q0_vanishes(p0):
    assert centered_orbit_determinant(p0, 1.3, both=True) == (0.0, 0.0)
    with pytest.raises(DomainError):
        centered_orbit_determinant(p0, -1.0)
    assert isinstance(NoCircularOrbit("x"), DomainError)


# hodograph -----------------------------------------------------------------


def test_hodograph_reference_orbit(p2):
    s = e0_state_for(p2, 1.0, axis_angle=0.5)
    g = predict_geometry(p2, s)
    fit = hodograph_analysis(integrate(p2, s, g.period_pred), g)
    assert fit.eccentricity == pytest.approx(2 / 3, abs=1e-6)
    assert fit.eccentricity_pred == pytest.approx(2 / 3)
    assert fit.axis_error < 1e-6
    assert not fit.circular


def test_hodograph_centered_is_circular(p0):
    s = e0_state_for(p0, 1.0)
    g = predict_geometry(p0, s)
    fit = hodograph_analysis(integrate(p0, s, g.period_pred), g)
    assert fit.circular and fit.eccentricity == 0.0 and math.isnan(fit.axis_error)
    assert hodograph_eccentricity(p0, 1.0, 0.0) == 0.0
