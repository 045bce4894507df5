"""Constants of motion and numerical verification of their Poisson algebra.

Brackets are taken in kinetic-momentum coordinates with the twisted
structure ``{Px, Py} = B(r)``::

    {f, g} = f_r . g_P - f_P . g_r + B (f_Px g_Py - f_Py g_Px)

so that ``df/dt = {f, H}`` along the flow of :mod:`monopole_orbits.dynamics`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NumericalFailure
from .model import field_profile

__all__ = [
    "ConstantsOfMotion",
    "AlgebraReport",
    "constants_of_motion",
    "constants_of_motion_array",
    "newton_constants",
    "poisson_bracket",
    "observables",
    "verify_algebra",
    "casimir_residual",
    "sample_phase_points",
]


@dataclass(frozen=True)
class ConstantsOfMotion:
    """Angular momentum, J vector, both sides of the Casimir identity and H."""

    l_z: float
    j: tuple
    c2_lhs: float
    c2_rhs: float
    energy: float


def constants_of_motion_array(params, z, q=None, g_offset=0.0):
    """Vectorised constants for rows ``(x, y, Px, Py)`` of ``z``.

    Parameters
    ----------
    params : ModelParams
    z : ndarray, shape (n, 4)
    q : float, optional
        Flux to use instead of ``params.q`` (flux sweeps).
    g_offset : float, optional
        Additive constant in G; anything but zero breaks conservation of J.

    Returns
    -------
    dict of ndarray
        Keys ``l_z``, ``jx``, ``jy``, ``energy``, ``c2_lhs``, ``c2_rhs``.
    """
    q = params.q if q is None else q
    z = np.atleast_2d(np.asarray(z, dtype=float))
    x, y, px, py = z[:, 0], z[:, 1], z[:, 2], z[:, 3]
    rc2 = params.r_cal**2
    r2 = x * x + y * y
    s = r2 + rc2
    g = q / s + g_offset
    k = x * py - y * px
    l_z = k + g / 2.0
    rp = x * px + y * py
    lj = l_z + g / 2.0
    jx = lj * x + rp * (-y) + rc2 * (-py)
    jy = lj * y + rp * x + rc2 * px
    energy = 0.5 * (px * px + py * py) - params.alpha / s**2
    c2_lhs = (jx * jx + jy * jy) / (4.0 * rc2) + (l_z - q / (4.0 * rc2)) ** 2
    c2_rhs = s * s * energy / (2.0 * rc2) + params.alpha / (2.0 * rc2) + q * q / (16.0 * rc2 * rc2)
    return dict(l_z=l_z, jx=jx, jy=jy, energy=energy, c2_lhs=c2_lhs, c2_rhs=c2_rhs)


def constants_of_motion(params, s, g_offset=0.0):
    """Constants of motion at one phase point.

    Returns
    -------
    ConstantsOfMotion
        ``l_z = x Py - y Px + G/2``,
        ``j = (l_z + G/2) r + (r.P) e_z x r + R^2 e_z x P``.
    """
    c = constants_of_motion_array(params, s.as_array()[None, :], None, g_offset)
    return ConstantsOfMotion(
        l_z=float(c["l_z"][0]),
        j=(float(c["jx"][0]), float(c["jy"][0])),
        c2_lhs=float(c["c2_lhs"][0]),
        c2_rhs=float(c["c2_rhs"][0]),
        energy=float(c["energy"][0]),
    )


def newton_constants(params, z):
    """Field-free angular momentum and vector ``I`` (no magnetic terms).

    Written independently of :func:`constants_of_motion_array` so that the
    Q = 0 reduction of the magnetic formulas can be compared against it.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    x, y, px, py = z[:, 0], z[:, 1], z[:, 2], z[:, 3]
    rc2 = params.r_cal**2
    lt = x * py - y * px
    rp = x * px + y * py
    ix = lt * x + rp * (-y) + rc2 * (-py)
    iy = lt * y + rp * x + rc2 * px
    return lt, ix, iy


def observables(params, g_offset=0.0):
    """Prebuilt scalar observables ``f(x, y, px, py)`` (array friendly).

    Returns
    -------
    dict
        Keys ``H``, ``Lz``, ``Jx``, ``Jy``, ``x``, ``y``, ``px``, ``py``.
    """

    def _c(key):
        def f(x, y, px, py):
            z = np.stack(np.broadcast_arrays(x, y, px, py), axis=-1)
            return constants_of_motion_array(params, z.reshape(-1, 4), None, g_offset)[key].reshape(
                np.shape(z)[:-1]
            )

        return f

    return {
        "H": _c("energy"),
        "Lz": _c("l_z"),
        "Jx": _c("jx"),
        "Jy": _c("jy"),
        "x": lambda x, y, px, py: x,
        "y": lambda x, y, px, py: y,
        "px": lambda x, y, px, py: px,
        "py": lambda x, y, px, py: py,
    }


def _gradient(fun, z, h):
    """Central-difference gradient of ``fun`` at rows of ``z``."""
    n = z.shape[0]
    grad = np.empty((n, 4))
    for i in range(4):
        step = h * (1.0 + np.abs(z[:, i]))
        zp = z.copy()
        zm = z.copy()
        zp[:, i] += step
        zm[:, i] -= step
        # use the representable step actually taken
        dz = zp[:, i] - zm[:, i]
        grad[:, i] = (fun(*zp.T) - fun(*zm.T)) / dz
    return grad


def _bracket_rows(params, gf, gg, z):
    """Bracket value and its un-cancelled magnitude from two gradients."""
    b = -params.q / (z[:, 0] ** 2 + z[:, 1] ** 2 + params.r_cal**2) ** 2
    terms = np.stack(
        [
            gf[:, 0] * gg[:, 2],
            gf[:, 1] * gg[:, 3],
            -gf[:, 2] * gg[:, 0],
            -gf[:, 3] * gg[:, 1],
            b * gf[:, 2] * gg[:, 3],
            -b * gf[:, 3] * gg[:, 2],
        ]
    )
    return terms.sum(axis=0), np.abs(terms).sum(axis=0)


def poisson_bracket(params, f, g, s, h=1e-5):
    """Twisted Poisson bracket ``{f, g}`` at state ``s`` by central differences.

    Parameters
    ----------
    params : ModelParams
    f, g : callable
        Scalar functions of ``(x, y, px, py)``.
    s : PhaseState
    h : float
        Relative step; the step along coordinate u is ``h (1 + |u|)``.

    Returns
    -------
    float

    Raises
    ------
    NumericalFailure
        If a derivative estimate is not finite.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    z = s.as_array()[None, :]
    gf = _gradient(f, z, h)
    gg = _gradient(g, z, h)
    if not (np.all(np.isfinite(gf)) and np.all(np.isfinite(gg))):
        raise NumericalFailure("non-finite derivative estimate in Poisson bracket")
    val, _ = _bracket_rows(params, gf, gg, z)
    return float(val[0])


def sample_phase_points(params, n, seed, box=3.0, on_shell=False):
    """Uniform pseudo-random phase points in the default sampling box.

    Positions lie in ``[-box R, box R]^2`` and momenta in
    ``[-box, box] * sqrt(2 alpha) / R^2``. With ``on_shell`` the momentum is
    rescaled to zero energy, keeping its direction.
    """
    rng = np.random.default_rng(seed)
    z = np.empty((n, 4))
    z[:, :2] = rng.uniform(-box, box, (n, 2)) * params.r_cal
    z[:, 2:] = rng.uniform(-box, box, (n, 2)) * params.speed_scale
    if on_shell:
        r2 = z[:, 0] ** 2 + z[:, 1] ** 2
        speed = np.sqrt(2.0 * params.alpha) / (r2 + params.r_cal**2)
        norm = np.hypot(z[:, 2], z[:, 3])
        z[:, 2:] *= (speed / norm)[:, None]
    return z


@dataclass(frozen=True)
class AlgebraReport:
    """Worst-case normalised residuals of the four bracket relations.

    Attributes
    ----------
    residuals : dict
        ``"Lz,H"``, ``"J,Lz"``, ``"Jx,Jy"``, ``"J,H"``.
    jh_sign : int
        Sign s found in ``{J, H} = s * 4 H (e_z x r)``.
    central_term : float
        Mean of ``{Jx, Jy} - 4 R^2 L_z``; should equal ``-Q``.
    central_spread : float
        Max deviation of that difference from its mean.
    n_samples : int
    seed : int
    """

    residuals: dict
    jh_sign: int
    central_term: float
    central_spread: float
    n_samples: int
    seed: int

    @property
    def worst(self):
        return max(self.residuals.values())


def verify_algebra(params, n_samples, seed, h=1e-5, *, box=3.0, on_shell=False, g_offset=0.0):
    """Check the bracket relations at pseudo-random phase points.

    Relations checked::

        {Lz, H} = 0
        {J, Lz} = e_z x J
        {Jx, Jy} = 4 R^2 Lz - Q
        {J, H} = s 4 H (e_z x r),  s = +1 or -1 detected once for all samples

    Each residual is divided by the sum of absolute values of the terms in
    the bracket plus ``|rhs|``, so it measures cancellation accuracy.

    Returns
    -------
    AlgebraReport
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    z = sample_phase_points(params, n_samples, seed, box, on_shell)
    obs = observables(params, g_offset)
    grads = {k: _gradient(obs[k], z, h) for k in ("H", "Lz", "Jx", "Jy")}
    c = constants_of_motion_array(params, z, None, g_offset)
    rc2 = params.r_cal**2

    def rel(val, mag, rhs):
        return np.abs(val - rhs) / (mag + np.abs(rhs) + 1e-300)

    res = {}
    v, m = _bracket_rows(params, grads["Lz"], grads["H"], z)
    res["Lz,H"] = float(np.max(rel(v, m, 0.0)))

    vx, mx = _bracket_rows(params, grads["Jx"], grads["Lz"], z)
    vy, my = _bracket_rows(params, grads["Jy"], grads["Lz"], z)
    res["J,Lz"] = float(max(np.max(rel(vx, mx, -c["jy"])), np.max(rel(vy, my, c["jx"]))))

    vj, mj = _bracket_rows(params, grads["Jx"], grads["Jy"], z)
    rhs = 4.0 * rc2 * c["l_z"] - params.q
    res["Jx,Jy"] = float(np.max(rel(vj, mj, rhs)))
    diff = vj - 4.0 * rc2 * c["l_z"]
    central = float(np.mean(diff))
    spread = float(np.max(np.abs(diff - central)))

    hx, mhx = _bracket_rows(params, grads["Jx"], grads["H"], z)
    hy, mhy = _bracket_rows(params, grads["Jy"], grads["H"], z)
    ex = 4.0 * c["energy"] * (-z[:, 1])
    ey = 4.0 * c["energy"] * z[:, 0]
    proj = float(np.sum(hx * ex + hy * ey))
    sign = 1 if proj >= 0.0 else -1
    res["J,H"] = float(max(np.max(rel(hx, mhx, sign * ex)), np.max(rel(hy, mhy, sign * ey))))
    if not all(math.isfinite(r) for r in res.values()):
        raise NumericalFailure("non-finite bracket residual")
    return AlgebraReport(res, sign, central, spread, int(n_samples), int(seed))


def casimir_residual(params, n_samples, seed, box=3.0):
    """Largest ``|c2_lhs - c2_rhs| / (1 + |c2_rhs|)`` over random phase points."""
    z = sample_phase_points(params, n_samples, seed, box)
    c = constants_of_motion_array(params, z)
    return float(np.max(np.abs(c["c2_lhs"] - c["c2_rhs"]) / (1.0 + np.abs(c["c2_rhs"]))))
