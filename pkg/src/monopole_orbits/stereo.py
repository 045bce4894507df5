"""Stereographic picture: plane <-> sphere of radius R and the monopole field.

Projection is from the north pole onto the equatorial plane, so the origin
maps to ``(0, 0, -R)``, the circle ``r = R`` to the equator and the plane's
infinity to the north pole. The map is
conformal with ``g_plane = ((r^2 + R^2) / (2 R^2))^2 g_sphere``, and the
planar field ``B(r) = -Q / (r^2 + R^2)^2`` becomes the constant
``-Q / (4 R^4)`` on the sphere.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import NotPlanar, PoleSingular
from .fitting import fit_circle_points
from .model import field_profile

__all__ = [
    "SpherePoint",
    "MonopoleData",
    "SphereCircle",
    "NORTH_POLE",
    "project",
    "project_array",
    "unproject",
    "unproject_array",
    "metric_ratio",
    "conformal_factor",
    "monopole_data",
    "sphere_field",
    "plane_flux_closed_form",
    "plane_flux_integral",
    "sphere_circle_analysis",
]

# unit-radius north pole; scale by r_cal for a given sphere
NORTH_POLE = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class SpherePoint:
    """Point on the sphere of radius R centred at the origin."""

    x3: float
    y3: float
    z3: float

    def as_array(self):
        return np.array([self.x3, self.y3, self.z3])


@dataclass(frozen=True)
class MonopoleData:
    """Constant sphere field, total flux and charge ``M = -Q / (2 R^2)``."""

    b_sphere: float
    total_flux: float
    m_charge: float


def project_array(params, x, y):
    """Vectorised projection; returns an array of shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rc = params.r_cal
    r2 = x * x + y * y
    s = r2 + rc * rc
    return np.stack([2.0 * rc * rc * x / s, 2.0 * rc * rc * y / s, rc * (r2 - rc * rc) / s], axis=-1)


def project(params, x, y):
    """Map a plane point to the sphere."""
    p = project_array(params, float(x), float(y))
    return SpherePoint(float(p[0]), float(p[1]), float(p[2]))


def unproject_array(params, p, pole_tol=1e-9):
    """Inverse projection for rows of ``p``; returns ``(x, y)`` arrays."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    rc = params.r_cal
    X, Y, Z = p[:, 0], p[:, 1], p[:, 2]
    if np.any(np.sqrt(X * X + Y * Y + (Z - rc) ** 2) <= pole_tol * rc):
        raise PoleSingular("inverse projection is singular at the north pole")
    # choose the well-conditioned form on each hemisphere
    north = Z > 0.0
    den_s = rc - Z
    rho2 = X * X + Y * Y
    fac = np.where(north, rc * (rc + Z) / np.where(rho2 == 0.0, 1.0, rho2), rc / np.where(den_s == 0.0, 1.0, den_s))
    return X * fac, Y * fac


def unproject(params, p, pole_tol=1e-9):
    """Map a sphere point back to the plane.

    Raises
    ------
    PoleSingular
        Within ``pole_tol * R`` of the north pole.
    """
    arr = p.as_array() if isinstance(p, SpherePoint) else np.asarray(p, dtype=float)
    x, y = unproject_array(params, arr[None, :], pole_tol)
    return float(x[0]), float(y[0])


def conformal_factor(params, r):
    """Expected ratio ``((r^2 + R^2) / (2 R^2))^2`` of plane to sphere metric."""
    return ((np.asarray(r, dtype=float) ** 2 + params.r_cal**2) / (2.0 * params.r_cal**2)) ** 2


def metric_ratio(params, x, y, h=1e-6):
    """Finite-difference plane/sphere metric ratio at ``(x, y)``.

    Returns
    -------
    ratio : float
        Plane metric divided by the pulled-back sphere metric (mean of the
        two diagonal entries).
    anisotropy : float
        Relative size of the off-diagonal and unequal-diagonal parts, zero
        for a conformal map.
    """
    step = h * (params.r_cal + math.hypot(x, y))
    jx = (project_array(params, x + step, y) - project_array(params, x - step, y)) / (2.0 * step)
    jy = (project_array(params, x, y + step) - project_array(params, x, y - step)) / (2.0 * step)
    gxx, gyy, gxy = jx @ jx, jy @ jy, jx @ jy
    mean = 0.5 * (gxx + gyy)
    return 1.0 / mean, float((abs(gxx - gyy) + 2.0 * abs(gxy)) / mean)


def monopole_data(params):
    """Monopole identification of the planar field."""
    rc2 = params.r_cal**2
    flux = -math.pi * params.q / rc2
    return MonopoleData(b_sphere=-params.q / (4.0 * rc2 * rc2), total_flux=flux, m_charge=flux / (2.0 * math.pi))


def sphere_field(params, x, y):
    """Planar field pulled back to the sphere, ``B(r) * conformal factor``."""
    r = np.hypot(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return field_profile(params, r).b * conformal_factor(params, r)


def plane_flux_closed_form(params, r_max):
    """``int_0^r_max 2 pi r B dr = -pi Q r^2 / (R^2 (r^2 + R^2))``."""
    rc2 = params.r_cal**2
    return -math.pi * params.q * r_max**2 / (rc2 * (r_max**2 + rc2))


def plane_flux_integral(params, r_max, n=256):
    """Flux of B through the disc of radius ``r_max`` by composite Simpson.

    The radial integral is taken in the sphere polar angle
    ``theta = 2 atan(r / R)``, which maps the whole plane to a finite
    interval and makes the integrand smooth. The angular integral is exact.

    Parameters
    ----------
    r_max : float
        Positive radius.
    n : int
        Number of Simpson intervals (rounded up to even), at least 16.
    """
    if not r_max > 0.0:
        raise ValueError("r_max must be positive")
    if n < 16:
        raise ValueError("n must be at least 16")
    n += n % 2
    rc = params.r_cal
    th_max = 2.0 * math.atan(r_max / rc)
    th = np.linspace(0.0, th_max, n + 1)
    half = 0.5 * th
    r = rc * np.tan(half)
    dr_dth = rc / (2.0 * np.cos(half) ** 2)
    f = 2.0 * math.pi * r * field_profile(params, r).b * dr_dth
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((th_max / n) / 3.0 * np.dot(w, f))


@dataclass(frozen=True)
class SphereCircle:
    """Plane fit of a projected orbit.

    ``normal`` points toward the cap that is the image of the planar disc
    bounded by the orbit; ``gamma = arccos(d / R)`` with ``d`` the signed
    distance of the plane from the sphere centre along that normal.
    ``omega_pred`` is ``None`` for great circles.
    """

    planarity_residual: float
    gamma: float
    omega_pred: object
    normal: tuple
    d: float


def sphere_circle_analysis(params, traj, n=400, planar_tol=1e-4, great_tol=1e-9):
    """Project an orbit to the sphere, fit its plane and predict omega.

    ``omega_pred = |Q| / (4 R^4 cos gamma)``.

    Raises
    ------
    NotPlanar
        If the rms distance to the fitted plane exceeds ``planar_tol * R``.
    """
    t = np.linspace(traj.t[0], traj.t[-1], n, endpoint=False)
    z = traj(t)
    pts = project_array(params, z[:, 0], z[:, 1])
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    normal = vt[2]
    dist = (pts - centroid) @ normal
    rms = float(np.sqrt(np.mean(dist**2)))
    rc = params.r_cal
    if rms > planar_tol * rc:
        raise NotPlanar(f"rms distance {rms:.3e} from the best plane")
    d = float(centroid @ normal)
    c_plane, _, _ = fit_circle_points(z[:, :2])
    inside = project_array(params, c_plane[0], c_plane[1])
    if inside @ normal < d:
        normal, d = -normal, -d
    cos_g = max(-1.0, min(1.0, d / rc))
    gamma = math.acos(cos_g)
    if abs(d) <= max(great_tol * rc, 10.0 * rms):
        omega = None
    else:
        omega = abs(params.q) / (4.0 * rc**4 * cos_g)
    return SphereCircle(rms, gamma, omega, tuple(float(v) for v in normal), d)
