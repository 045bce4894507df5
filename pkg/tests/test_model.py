import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from monopole_orbits import (
    DomainError,
    ModelParams,
    PhaseState,
    bound_angular_momentum_limit,
    effective_potential,
    equivalent_params_under_q2_shift,
    field_profile,
    hamiltonian,
    make_e0_state,
)

pos = st.floats(0.1, 10.0)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0, 1.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, -1.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, 1.0, float("nan"))
    with pytest.raises(DomainError):
        PhaseState(0.0, float("inf"), 0.0, 0.0)


def test_profiles_at_origin(p2):
    f = field_profile(p2, 0.0)
    assert f.v == -2.0 and f.dv_dr == 0.0
    assert f.b == -2.0 and f.g == 2.0


@settings(max_examples=50, deadline=None)
@given(a=pos, rc=pos, q=st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-6), r=st.floats(1e-3, 20.0))
def test_profiles_match_quadrature(a, rc, q, r):
    p = ModelParams(a, rc, q)
    f = field_profile(p, r)
    # G = 2 int_r^inf B r' dr' with the sign fixed by G(inf) = 0
    g = -2.0 * quad(lambda u: field_profile(p, u).b * u, r, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    assert f.g == pytest.approx(g, rel=1e-9, abs=1e-12 * abs(q) / rc**2)
    h = min(1e-4 * (r + rc), 0.5 * r)
    dv = (field_profile(p, r + h).v - field_profile(p, r - h).v) / (2 * h)
    assert f.dv_dr == pytest.approx(dv, rel=1e-6, abs=1e-9 * a / rc**5)


def test_profile_rejects_negative_radius(p0):
    with pytest.raises(DomainError):
        field_profile(p0, -1.0)


def test_vectorised_profile(p2):
    r = np.linspace(0, 3, 7)
    f = field_profile(p2, r)
    assert f.b.shape == (7,)
    assert f.b[3] == field_profile(p2, r[3]).b


def test_e0_state_has_zero_energy(p2):
    s = make_e0_state(p2, 0.3, -1.2, 0.7)
    assert abs(hamiltonian(p2, s)) < 1e-15


def test_effective_potential_centered_orbit(p0):
    # centered circle r = R_cal at L = 1 is a stationary point with U = 0
    assert effective_potential(p0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    h = 1e-5
    d = (effective_potential(p0, 1.0, 1.0 + h) - effective_potential(p0, 1.0, 1.0 - h)) / (2 * h)
    assert abs(d) < 1e-9
    with pytest.raises(DomainError):
        effective_potential(p0, 1.0, 0.0)


@pytest.mark.parametrize("q", [0.0, 2.0, -2.0, 8.0, -8.0])
@pytest.mark.parametrize("sense", [1, -1])
def test_angular_momentum_limit(q, sense):
    p = ModelParams(2.0, 1.0, q)
    lim = bound_angular_momentum_limit(p, sense)
    # independent: bounded scalar maximisation of the same envelope
    env = lambda r: -(sense * field_profile(p, r).g / 2 + math.sqrt(2 * p.alpha) * r / (r * r + 1))
    best = -minimize_scalar(env, bounds=(0, 50), method="bounded", options={"xatol": 1e-12}).fun
    assert lim == pytest.approx(best, rel=1e-9)
    closed = (sense * q + math.sqrt(q * q + 8 * p.alpha)) / 4.0
    assert lim == pytest.approx(closed, rel=1e-12)


def test_q2_shift_absorbed_in_alpha():
    p = ModelParams(2.0, 1.5, 3.0)
    e = equivalent_params_under_q2_shift(p)
    r = np.linspace(0, 4, 9)
    extra = -p.q**2 / (8 * p.r_cal**2 * (r * r + p.r_cal**2) ** 2)
    assert np.allclose(field_profile(e, r).v, field_profile(p, r).v + extra, rtol=1e-14)
