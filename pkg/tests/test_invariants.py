import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from monopole_orbits import (
    ModelParams,
    PhaseState,
    casimir_residual,
    constants_of_motion,
    constants_of_motion_array,
    e0_state_for,
    poisson_bracket,
    verify_algebra,
)
from monopole_orbits.invariants import newton_constants, observables, sample_phase_points


@pytest.fixture(scope="module")
def symbolic():
    """Exact bracket algebra from sympy, built without the package."""
    x, y, px, py = sp.symbols("x y p_x p_y", real=True)
    a, rc, q = sp.symbols("alpha R Q", positive=True)
    s = x**2 + y**2 + rc**2
    b = -q / s**2
    g = q / s
    h = (px**2 + py**2) / 2 - a / s**2
    lz = x * py - y * px + g / 2
    rp = x * px + y * py
    jx = (lz + g / 2) * x - rp * y - rc**2 * py
    jy = (lz + g / 2) * y + rp * x + rc**2 * px

    def br(f, k):
        d = sp.diff
        return (
            d(f, x) * d(k, px) - d(f, px) * d(k, x) + d(f, y) * d(k, py) - d(f, py) * d(k, y)
            + b * (d(f, px) * d(k, py) - d(f, py) * d(k, px))
        )

    return dict(syms=(x, y, px, py, a, rc, q), br=br, H=h, Lz=lz, Jx=jx, Jy=jy)


def test_symbolic_relations(symbolic):
    br, h, lz, jx, jy = (symbolic[k] for k in ("br", "H", "Lz", "Jx", "Jy"))
    x, y, _, _, _, rc, q = symbolic["syms"]
    assert sp.simplify(br(lz, h)) == 0
    assert sp.simplify(br(jx, lz) + jy) == 0
    assert sp.simplify(br(jy, lz) - jx) == 0
    assert sp.simplify(br(jx, jy) - (4 * rc**2 * lz - q)) == 0
    # sign +1 in {J, H} = s 4 H e_z x r
    assert sp.simplify(br(jx, h) - 4 * h * (-y)) == 0
    assert sp.simplify(br(jy, h) - 4 * h * x) == 0


@pytest.mark.parametrize("f,g", [("Jx", "Jy"), ("Lz", "H"), ("Jx", "H"), ("Jy", "Lz"), ("px", "py")])
def test_numeric_bracket_matches_symbolic(symbolic, f, g):
    x, y, px, py, a, rc, q = symbolic["syms"]
    base = {"px": px, "py": py}
    ef = symbolic.get(f, base.get(f))
    eg = symbolic.get(g, base.get(g))
    exact = sp.lambdify((x, y, px, py, a, rc, q), symbolic["br"](ef, eg))
    p = ModelParams(1.7, 0.8, 2.3)
    obs = observables(p)
    rng = np.random.default_rng(5)
    for z in rng.uniform(-2, 2, (5, 4)):
        s = PhaseState(*z)
        want = exact(*z, p.alpha, p.r_cal, p.q)
        assert poisson_bracket(p, obs[f], obs[g], s) == pytest.approx(want, rel=1e-7, abs=1e-7)


def test_canonical_brackets(p2):
    obs = observables(p2)
    s = PhaseState(0.4, -0.7, 0.3, 0.1)
    assert poisson_bracket(p2, obs["x"], obs["px"], s) == pytest.approx(1.0, abs=1e-10)
    assert poisson_bracket(p2, obs["x"], obs["py"], s) == pytest.approx(0.0, abs=1e-10)
    b = -p2.q / (s.r**2 + 1) ** 2
    assert poisson_bracket(p2, obs["px"], obs["py"], s) == pytest.approx(b, abs=1e-10)
    with pytest.raises(ValueError):
        poisson_bracket(p2, obs["x"], obs["px"], s, h=0.0)


def test_constants_examples(p0, p2):
    c = constants_of_motion(p0, PhaseState(1.0, 0.0, 0.0, 1.0))
    assert c.l_z == 1.0 and c.j == (0.0, 0.0)
    assert c.c2_lhs == pytest.approx(1.0) and c.c2_rhs == pytest.approx(1.0)
    c = constants_of_motion(p2, e0_state_for(p2, 1.0, axis_angle=0.3))
    assert math.hypot(*c.j) == pytest.approx(2.0, rel=1e-12)
    assert c.c2_lhs == pytest.approx(1.25, rel=1e-12)
    assert c.c2_rhs == pytest.approx(1.25, rel=1e-12)


def test_q0_reduction_bitwise(p0):
    z = sample_phase_points(p0, 1000, 3)
    c = constants_of_motion_array(p0, z)
    lt, ix, iy = newton_constants(p0, z)
    assert np.array_equal(c["l_z"], lt)
    assert np.array_equal(c["jx"], ix) and np.array_equal(c["jy"], iy)


@pytest.mark.parametrize("q", [0.0, 2.0, -2.0, 8.0])
def test_verify_algebra(q):
    p = ModelParams(2.0, 1.0, q)
    rep = verify_algebra(p, 2000, 11)
    assert rep.worst <= 1e-6
    assert rep.jh_sign == 1
    assert rep.central_term == pytest.approx(-q, abs=1e-6)
    assert rep.central_spread <= 1e-5 * (1 + abs(q))
    assert all(v >= 0 for v in rep.residuals.values())


def test_on_shell_j_h_relation(p2):
    # at H = 0 the right side vanishes, leaving pure cancellation error
    rep = verify_algebra(p2, 500, 2, on_shell=True)
    assert rep.residuals["J,H"] <= 1e-6


def test_wrong_g_constant_breaks_j_conservation(p2):
    rep = verify_algebra(p2, 500, 2, on_shell=True, g_offset=1e-3 * p2.q)
    assert rep.residuals["J,H"] > 1e-5


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(0.1, 10), rc=st.floats(0.2, 5), q=st.floats(-10, 10), seed=st.integers(0, 2**31)
)
def test_casimir_identity(a, rc, q, seed):
    assert casimir_residual(ModelParams(a, rc, q), 200, seed) <= 1e-11
