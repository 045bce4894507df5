"""Geometry of zero-energy orbits, stability probes and hodographs.

On the zero-energy stratum every bounded orbit is a circle with

    center = J / (2 L_z),   R = sqrt(alpha / 2) / |L_z|,
    l^2 = R^2 - R_cal^2 + Q / (2 L_z),

and period ``pi alpha / |L_z|^3 + pi Q / (2 L_z |L_z|)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    DomainError,
    Forbidden,
    Inconsistent,
    NoCircularOrbit,
    NotZeroEnergy,
    ZeroAngularMomentum,
)
from .fitting import fit_circle_points, fit_ellipse_points
from .invariants import constants_of_motion, constants_of_motion_array
from .model import PhaseState, field_profile

__all__ = [
    "OrbitGeometry",
    "EllipseFit",
    "StabilityProbe",
    "period_formula",
    "predict_geometry",
    "e0_state_for",
    "fit_circle",
    "constraint_residuals",
    "stability_determinant",
    "determinant_roots",
    "centered_orbit_determinant",
    "hodograph_analysis",
    "hodograph_eccentricity",
    "minimum_radius",
]


@dataclass(frozen=True)
class OrbitGeometry:
    """Circle descriptors of a zero-energy orbit.

    ``fit_residual`` is NaN for purely predicted geometry.
    """

    center: tuple
    radius_r: float
    offset_l: float
    l_z: float
    j: tuple
    period_pred: float
    fit_residual: float = math.nan


@dataclass(frozen=True)
class EllipseFit:
    """Velocity-space ellipse fitted to a hodograph.

    ``axis_angle`` is NaN when the hodograph is circular to within the fit
    residual; ``eccentricity`` is then reported as 0.
    """

    center: tuple
    semi_major: float
    semi_minor: float
    eccentricity: float
    axis_angle: float
    residual: float
    eccentricity_pred: float = math.nan
    axis_error: float = math.nan
    circular: bool = False


@dataclass(frozen=True)
class StabilityProbe:
    """Outer turning radius, speed there and the determinant ``a V' - v_a^2``."""

    a: float
    v_a: float
    det_m: float


def period_formula(params, l_z):
    """Zero-energy period ``pi alpha/|L|^3 + pi Q/(2 L |L|)``.

    The second term carries the sign of ``Q / L_z``; it follows from
    ``T = pi (R^2 + l^2 + R_cal^2) / |L_z|``.
    """
    a = abs(l_z)
    if a == 0.0:
        raise ZeroAngularMomentum("period undefined at L_z = 0")
    return math.pi * params.alpha / a**3 + math.pi * params.q / (2.0 * l_z * a)


_period_formula = period_formula


def _energy_scale(params):
    return params.alpha / params.r_cal**4


def predict_geometry(params, s, *, energy_tol=1e-9, l_min=1e-9, rel_tol=1e-9):
    """Circle predicted by the constants of motion at ``s``.

    Parameters
    ----------
    params : ModelParams
    s : PhaseState
        Must have zero energy within ``energy_tol * alpha / R^4``.
    l_min : float
        Smallest accepted ``|L_z|`` in units of ``sqrt(alpha)/R``.
    rel_tol : float
        Tolerance of the cross-check between the two radius formulas.

    Returns
    -------
    OrbitGeometry

    Raises
    ------
    NotZeroEnergy, ZeroAngularMomentum, Inconsistent
    """
    c = constants_of_motion(params, s)
    if abs(c.energy) > energy_tol * _energy_scale(params):
        raise NotZeroEnergy(f"|H| = {abs(c.energy):.3e} exceeds the zero-energy tolerance")
    lz = c.l_z
    if abs(lz) < l_min * math.sqrt(params.alpha) / params.r_cal:
        raise ZeroAngularMomentum(f"|L_z| = {abs(lz):.3e} too small")
    rc2 = params.r_cal**2
    jx, jy = c.j
    r2_a = params.alpha / (2.0 * lz * lz)
    r2_b = rc2 + (jx * jx + jy * jy) / (4.0 * lz * lz) - params.q / (2.0 * lz)
    # the two agree up to the exact off-shell term (r^2+R^2)^2 H / (2 L^2)
    s2 = (s.x * s.x + s.y * s.y + rc2) ** 2
    off = s2 * c.energy / (2.0 * lz * lz)
    mag = r2_a + rc2 + (jx * jx + jy * jy) / (4.0 * lz * lz) + abs(params.q / (2.0 * lz))
    if abs(r2_b - r2_a - off) > rel_tol * mag:
        raise Inconsistent(f"radius formulas disagree: {r2_a!r} vs {r2_b!r}")
    l2 = r2_a - rc2 + params.q / (2.0 * lz)
    if l2 < 0.0:
        if l2 < -rel_tol * mag:
            raise Inconsistent(f"negative squared offset {l2!r}")
        l2 = 0.0
    return OrbitGeometry(
        center=(jx / (2.0 * lz), jy / (2.0 * lz)),
        radius_r=math.sqrt(r2_a),
        offset_l=math.sqrt(l2),
        l_z=lz,
        j=(jx, jy),
        period_pred=period_formula(params, lz),
    )


def e0_state_for(params, l_z, axis_angle=0.0, phase=0.0):
    """Zero-energy state on the orbit with angular momentum ``l_z``.

    The orbit center lies along ``axis_angle``. The returned point sits at
    angle ``phase`` about the center, measured from the far side (phase 0
    is the point farthest from the origin).

    Raises
    ------
    DomainError
        If no zero-energy orbit has this angular momentum (``l^2 < 0``).
    """
    if l_z == 0.0:
        raise ZeroAngularMomentum("l_z must be non-zero")
    rc2 = params.r_cal**2
    big_r = math.sqrt(params.alpha / 2.0) / abs(l_z)
    l2 = big_r * big_r - rc2 + params.q / (2.0 * l_z)
    if l2 < -1e-14 * (big_r * big_r + rc2):
        raise DomainError(f"no zero-energy orbit with L_z = {l_z!r} (l^2 = {l2:.3e})")
    ell = math.sqrt(max(l2, 0.0))
    u = np.array([math.cos(axis_angle), math.sin(axis_angle)])
    w = np.array([-u[1], u[0]])
    cp, sp = math.cos(phase), math.sin(phase)
    radial = cp * u + sp * w
    pos = ell * u + big_r * radial
    tangent = np.array([-radial[1], radial[0]]) * math.copysign(1.0, l_z)
    speed = math.sqrt(2.0 * params.alpha) / (pos @ pos + rc2)
    st = PhaseState(pos[0], pos[1], speed * tangent[0], speed * tangent[1])
    got = constants_of_motion(params, st).l_z
    if abs(got - l_z) > 1e-9 * (abs(l_z) + abs(params.q) / rc2):
        raise Inconsistent(f"constructed state has L_z = {got!r}, wanted {l_z!r}")
    return st


def _circle_fit_points(points):
    return fit_circle_points(points)


def fit_circle(traj, n=400, t0=None, t1=None):
    """Fit a circle to a trajectory, resampled uniformly in time.

    Constants of motion are taken from the first sample; ``period_pred`` is
    filled only if that sample has zero energy.

    Returns
    -------
    OrbitGeometry
    """
    t0 = traj.t[0] if t0 is None else t0
    t1 = traj.t[-1] if t1 is None else t1
    tq = np.linspace(t0, t1, n, endpoint=False)
    z = traj(tq)
    center, radius, rms = fit_circle_points(z[:, :2])
    c = constants_of_motion(traj.params, PhaseState.from_array(traj.z[0], traj.t[0]))
    p = traj.params
    period = math.nan
    if abs(c.energy) <= 1e-8 * _energy_scale(p) and c.l_z != 0.0:
        period = period_formula(p, c.l_z)
    return OrbitGeometry(
        center=(float(center[0]), float(center[1])),
        radius_r=float(radius),
        offset_l=float(math.hypot(center[0], center[1])),
        l_z=c.l_z,
        j=c.j,
        period_pred=period,
        fit_residual=rms,
    )


def constraint_residuals(params, traj, energy_tol=1e-8, n_dense=0):
    """Residuals of the two zero-energy circle constraints along a trajectory.

    With J and L_z from the first sample,

    ``e1 = J.r / L - (r^2 - R^2 + Q / (2L))`` and
    ``e2 = (J x r) / L + (r^2 + R^2)(r.P) / L``.

    Using constants from each sample instead would make both vanish
    identically, so the first sample is the reference.

    Returns
    -------
    dict
        ``max1``, ``rms1``, ``max2``, ``rms2`` and the arrays ``e1``, ``e2``.
    """
    z = traj.z
    if n_dense:
        z = traj(np.linspace(traj.t[0], traj.t[-1], n_dense))
    c = constants_of_motion_array(params, traj.z[:1])
    if abs(c["energy"][0]) > energy_tol * _energy_scale(params):
        raise NotZeroEnergy("constraint residuals need a zero-energy trajectory")
    lz = float(c["l_z"][0])
    if abs(lz) < 1e-12:
        raise ZeroAngularMomentum("L_z vanishes")
    jx, jy = float(c["jx"][0]), float(c["jy"][0])
    x, y, px, py = z.T
    r2 = x * x + y * y
    rc2 = params.r_cal**2
    e1 = (jx * x + jy * y) / lz - (r2 - rc2 + params.q / (2.0 * lz))
    e2 = (jx * y - jy * x) / lz + (r2 + rc2) * (x * px + y * py) / lz
    return dict(
        max1=float(np.max(np.abs(e1))),
        rms1=float(np.sqrt(np.mean(e1**2))),
        max2=float(np.max(np.abs(e2))),
        rms2=float(np.sqrt(np.mean(e2**2))),
        e1=e1,
        e2=e2,
    )


def stability_determinant(params, a, energy):
    """Determinant ``a V'(a) + 2 V(a) - 2E`` at the outer excursion ``a``.

    Raises
    ------
    Forbidden
        If ``E < V(a)``.
    """
    if not a > 0.0:
        raise DomainError("a must be positive")
    f = field_profile(params, a)
    va2 = 2.0 * (energy - f.v)
    if va2 < 0.0:
        raise Forbidden(f"E = {energy!r} lies below V(a) = {f.v!r}")
    return StabilityProbe(a=float(a), v_a=math.sqrt(va2), det_m=a * f.dv_dr + 2.0 * f.v - 2.0 * energy)


def determinant_roots(params, energy, a_grid):
    """Sign changes of the determinant over ``a_grid``, refined by bisection."""
    from scipy.optimize import brentq

    a_grid = np.asarray(a_grid, dtype=float)
    vals = np.array([stability_determinant(params, a, energy).det_m for a in a_grid])
    roots = []
    for i in range(len(a_grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(a_grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(
                brentq(lambda a: stability_determinant(params, a, energy).det_m, a_grid[i], a_grid[i + 1], xtol=1e-15)
            )
    if vals[-1] == 0.0:
        roots.append(float(a_grid[-1]))
    return roots, vals


def centered_orbit_determinant(params, a, branch=1, both=False):
    """Determinant ``omega Q a^2 / (a^2 + R^2)^2`` for a centered circular orbit.

    ``omega`` solves ``omega^2 a = V'(a) + B(a) omega a``. In the flow of
    :mod:`monopole_orbits.dynamics` this balance holds for clockwise
    rotation counted positive. ``branch = +1`` continues the Q = 0 root
    ``+sqrt(V'/a)``, ``branch = -1`` the negative one.

    Returns
    -------
    float or (float, float)
        The determinant, or both branches if ``both``.
    """
    if not a > 0.0:
        raise DomainError("a must be positive")
    f = field_profile(params, a)
    disc = f.b * f.b * a * a + 4.0 * a * f.dv_dr
    if disc < 0.0:
        raise NoCircularOrbit(f"no real angular frequency at a = {a!r}")
    s = (a * a + params.r_cal**2) ** 2

    def det(sign):
        omega = (f.b * a + sign * math.sqrt(disc)) / (2.0 * a)
        return omega * params.q * a * a / s

    if both:
        return det(1), det(-1)
    if branch not in (1, -1):
        raise DomainError("branch must be +1 or -1")
    return det(branch)


def centered_orbit_frequency(params, a, branch=1):
    """Angular frequency solving the centered force balance (see above)."""
    f = field_profile(params, a)
    disc = f.b * f.b * a * a + 4.0 * a * f.dv_dr
    if disc < 0.0:
        raise NoCircularOrbit(f"no real angular frequency at a = {a!r}")
    return (f.b * a + branch * math.sqrt(disc)) / (2.0 * a)


def hodograph_eccentricity(params, radius_r, offset_l):
    """Predicted eccentricity ``2 R l / (R^2 + R_cal^2 + l^2)``."""
    return 2.0 * radius_r * offset_l / (radius_r**2 + params.r_cal**2 + offset_l**2)


def hodograph_analysis(traj, geom, n=400, circular_factor=3.0, tol_factor=100.0):
    """Fit an ellipse to the velocity curve over one orbit.

    The velocity is resampled uniformly in time over one predicted period
    (or the whole span if shorter). The hodograph is reported circular
    (eccentricity 0, undefined axis) when the difference of its semi-axes
    is below ``circular_factor`` times the fit residual or below
    ``tol_factor * traj.tol`` relative to the major axis. Since
    ``e ~ sqrt(2 (a - b) / a)``, smaller eccentricities cannot be resolved
    from a trajectory integrated at that tolerance.

    Returns
    -------
    EllipseFit
        ``axis_error`` is the angle between the major axis and the normal
        of the orbit axis (the center direction); NaN when undefined.
    """
    t0 = traj.t[0]
    t1 = traj.t[-1]
    if math.isfinite(geom.period_pred) and t0 + geom.period_pred <= t1:
        t1 = t0 + geom.period_pred
    tq = np.linspace(t0, t1, n, endpoint=False)
    v = traj(tq)[:, 2:]
    center, a, b, angle, rms = fit_ellipse_points(v)
    pred = hodograph_eccentricity(traj.params, geom.radius_r, geom.offset_l)
    if a - b <= max(circular_factor * rms, tol_factor * traj.tol * a, 1e-14 * a):
        return EllipseFit((float(center[0]), float(center[1])), a, b, 0.0, math.nan, rms, pred, math.nan, True)
    ecc = math.sqrt(max(0.0, 1.0 - (b / a) ** 2))
    axis_error = math.nan
    cx, cy = geom.center
    if math.hypot(cx, cy) > 1e-9 * traj.params.r_cal:
        normal = (math.atan2(cy, cx) + math.pi / 2.0) % math.pi
        d = abs(angle - normal) % math.pi
        axis_error = min(d, math.pi - d)
    return EllipseFit((float(center[0]), float(center[1])), a, b, ecc, angle, rms, pred, axis_error, False)


def minimum_radius(params, n=2001):
    """Smallest radius among zero-energy orbits at fixed Q.

    ``R = sqrt(alpha/2)/|L|`` is minimised by the largest admissible
    ``|L|``, i.e. the angular-momentum limit over both senses.
    """
    from .model import bound_angular_momentum_limit

    lmax = max(bound_angular_momentum_limit(params, 1), bound_angular_momentum_limit(params, -1))
    return math.sqrt(params.alpha / 2.0) / lmax
