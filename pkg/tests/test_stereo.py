import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from monopole_orbits import (
    ModelParams,
    PoleSingular,
    e0_state_for,
    integrate,
    monopole_data,
    period_formula,
    plane_flux_integral,
    predict_geometry,
    project,
    sphere_circle_analysis,
    unproject,
)
from monopole_orbits.experiments import random_e0_states
from monopole_orbits.stereo import (
    NORTH_POLE,
    conformal_factor,
    metric_ratio,
    plane_flux_closed_form,
    project_array,
    sphere_field,
    unproject_array,
)


def test_fixed_points(p0):
    assert project(p0, 0, 0).as_array() == pytest.approx([0, 0, -1])
    eq = project(p0, 0.6, 0.8)
    assert eq.z3 == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(PoleSingular):
        unproject(p0, np.array(NORTH_POLE) * p0.r_cal)


@settings(max_examples=60, deadline=None)
@given(rc=st.floats(0.1, 10), x=st.floats(-1e3, 1e3), y=st.floats(-1e3, 1e3))
def test_round_trip_and_radius(rc, x, y):
    p = ModelParams(1.0, rc, 0.0)
    pt = project(p, x, y).as_array()
    assert np.linalg.norm(pt) == pytest.approx(rc, rel=1e-12)
    xb, yb = unproject(p, pt)
    scale = math.hypot(x, y) + rc
    assert abs(xb - x) <= 1e-12 * scale * (1 + (math.hypot(x, y) / rc) ** 2)
    assert abs(yb - y) <= 1e-12 * scale * (1 + (math.hypot(x, y) / rc) ** 2)


def test_projection_is_inverse_from_north_geometry(p2):
    # the line from the north pole through the image meets the plane z = 0 at (x, y)
    x, y = 0.7, -2.2
    X, Y, Z = project(p2, x, y).as_array()
    t = (0.0 - 1.0) / (Z - 1.0)
    assert (t * X, t * Y) == pytest.approx((x, y))


def test_conformal_metric(p2):
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-4, 4, (20, 2)):
        ratio, aniso = metric_ratio(p2, x, y)
        assert ratio == pytest.approx(conformal_factor(p2, math.hypot(x, y)), rel=1e-6)
        assert aniso < 1e-6


def test_sphere_field_is_constant():
    p = ModelParams(2.0, 1.3, 2.5)
    vals = sphere_field(p, np.linspace(0, 30, 50), np.zeros(50))
    assert np.allclose(vals, monopole_data(p).b_sphere, rtol=1e-13)
    assert monopole_data(p).b_sphere == -p.q / (4 * p.r_cal**4)


@pytest.mark.parametrize("q", [1.0, 2.0, 4.0])
def test_flux(q):
    p = ModelParams(2.0, 1.0, q)
    val = plane_flux_integral(p, 1e3)
    assert val == pytest.approx(-math.pi * q, rel=1e-5)
    ref = quad(lambda r: 2 * math.pi * r * (-q / (r * r + 1) ** 2), 0, 1e3, epsrel=1e-13, limit=200)[0]
    assert val == pytest.approx(ref, rel=1e-8)
    assert plane_flux_closed_form(p, 1e3) == pytest.approx(ref, rel=1e-12)
    assert monopole_data(p).m_charge == pytest.approx(-q / 2)


def test_flux_quadrature_converges():
    p = ModelParams(2.0, 1.0, 2.0)
    exact = plane_flux_closed_form(p, 10.0)
    errs = [abs(plane_flux_integral(p, 10.0, n) - exact) for n in (32, 64, 128)]
    assert errs[1] < errs[0] / 10 and errs[2] < errs[1] / 10


@pytest.mark.parametrize("q", [0.0, 2.0, -2.0])
def test_orbits_map_to_circles(q):
    p = ModelParams(2.0, 1.0, q)
    for s in random_e0_states(p, 3, seed=4):
        g = predict_geometry(p, s)
        res = sphere_circle_analysis(p, integrate(p, s, g.period_pred))
        assert res.planarity_residual <= 1e-6


def test_tilt_and_frequency():
    p = ModelParams(6.0, 1.0, 4.0)
    s = e0_state_for(p, 3.0)
    res = sphere_circle_analysis(p, integrate(p, s, period_formula(p, 3.0)))
    assert res.gamma == pytest.approx(math.pi / 3, abs=1e-7)
    assert res.omega_pred == pytest.approx(2.0, rel=1e-6)


def test_equator_orbit(p0):
    s = e0_state_for(p0, 1.0)
    res = sphere_circle_analysis(p0, integrate(p0, s, 2 * math.pi))
    assert res.gamma == pytest.approx(math.pi / 2, abs=1e-8)
    assert res.omega_pred is None
    pts = project_array(p0, np.cos(np.linspace(0, 6, 30)), np.sin(np.linspace(0, 6, 30)))
    assert np.max(np.abs(pts[:, 2])) < 1e-15


def test_vectorised_inverse(p2):
    xy = np.random.default_rng(2).normal(size=(100, 2)) * 5
    x, y = unproject_array(p2, project_array(p2, xy[:, 0], xy[:, 1]))
    assert np.allclose(np.column_stack([x, y]), xy, rtol=1e-12, atol=1e-12)
