"""Circle and ellipse fits for planar point clouds.

Both fits start from a closed-form algebraic estimate and are then refined
by minimising geometric (circle) or Sampson (ellipse) distances, which
removes the bias of purely algebraic fits.
"""

import math

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateFit

__all__ = ["fit_circle_points", "fit_ellipse_points", "conic_to_ellipse", "arc_span"]


def arc_span(points, center):
    """Angular extent (radians) covered by ``points`` seen from ``center``."""
    ang = np.sort(np.arctan2(points[:, 1] - center[1], points[:, 0] - center[0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2.0 * math.pi]]))
    return 2.0 * math.pi - float(np.max(gaps))


def fit_circle_points(points, min_span=math.pi / 3):
    """Least-squares circle through 2-D points.

    Parameters
    ----------
    points : ndarray, shape (n, 2)
    min_span : float
        Smallest accepted arc coverage in radians.

    Returns
    -------
    center : ndarray, shape (2,)
    radius : float
    rms : float
        Root-mean-square geometric residual.

    Raises
    ------
    DegenerateFit
        Fewer than three points, collinear points or too short an arc.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[0] < 3:
        raise DegenerateFit("need at least three points")
    mu = p.mean(axis=0)
    scale = float(np.max(np.abs(p - mu)))
    if scale == 0.0:
        raise DegenerateFit("all points coincide")
    u = (p - mu) / scale
    a = np.column_stack([2.0 * u, np.ones(len(u))])
    rhs = np.sum(u * u, axis=1)
    sol, _, rank, sv = np.linalg.lstsq(a, rhs, rcond=None)
    if rank < 3 or sv[-1] < 1e-10 * sv[0]:
        raise DegenerateFit("points are collinear")
    c0 = sol[:2]
    r0 = math.sqrt(max(sol[2] + c0 @ c0, 0.0))
    if not math.isfinite(r0) or r0 == 0.0 or r0 > 1e6:
        raise DegenerateFit("points are collinear")

    def resid(v):
        d = u - v[:2]
        return np.hypot(d[:, 0], d[:, 1]) - v[2]

    def jac(v):
        d = u - v[:2]
        rho = np.hypot(d[:, 0], d[:, 1])
        rho = np.where(rho == 0.0, 1e-300, rho)
        return np.column_stack([-d[:, 0] / rho, -d[:, 1] / rho, -np.ones(len(u))])

    fit = least_squares(resid, np.r_[c0, r0], jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    center = mu + scale * fit.x[:2]
    radius = abs(fit.x[2]) * scale
    if arc_span(p, center) < min_span:
        raise DegenerateFit("samples span less than the minimum arc")
    rms = float(np.sqrt(np.mean(resid(fit.x) ** 2))) * scale
    return center, radius, rms


def _halir_flusser(u):
    x, y = u[:, 0], u[:, 1]
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    _, vec = np.linalg.eig(m)
    vec = np.real(vec)
    cond = 4.0 * vec[0] * vec[2] - vec[1] ** 2
    ok = np.nonzero(cond > 0.0)[0]
    if ok.size == 0:
        raise DegenerateFit("no ellipse-constrained conic solution")
    a1 = vec[:, ok[0]]
    return np.concatenate([a1, t @ a1])


def conic_to_ellipse(coef):
    """Convert ``A x^2 + B xy + C y^2 + D x + E y + F = 0`` to ellipse form.

    Returns
    -------
    center : ndarray
    semi_major, semi_minor : float
    angle : float
        Direction of the major axis in [0, pi).
    """
    a, b, c, d, e, f = coef
    m2 = np.array([[2.0 * a, b], [b, 2.0 * c]])
    center = np.linalg.solve(m2, [-d, -e])
    fc = a * center[0] ** 2 + b * center[0] * center[1] + c * center[1] ** 2 + d * center[0] + e * center[1] + f
    q = np.array([[a, b / 2.0], [b / 2.0, c]])
    lam, vec = np.linalg.eigh(q)
    if lam[0] * lam[1] <= 0.0:
        raise DegenerateFit("conic is not an ellipse")
    ax = np.sqrt(-fc / lam)
    if not np.all(np.isfinite(ax)):
        raise DegenerateFit("imaginary ellipse")
    i_major = int(np.argmax(ax))
    v = vec[:, i_major]
    angle = math.atan2(v[1], v[0]) % math.pi
    return center, float(ax[i_major]), float(ax[1 - i_major]), angle


def _ellipse_sampson(params, u):
    cx, cy, a, b, th = params
    ct, st = math.cos(th), math.sin(th)
    dx = u[:, 0] - cx
    dy = u[:, 1] - cy
    xr = ct * dx + st * dy
    yr = -st * dx + ct * dy
    val = (xr / a) ** 2 + (yr / b) ** 2 - 1.0
    gx = 2.0 * xr / a**2
    gy = 2.0 * yr / b**2
    return val / np.hypot(gx, gy)


def fit_ellipse_points(points):
    """Direct ellipse fit followed by Sampson-distance refinement.

    Returns
    -------
    center : ndarray, shape (2,)
    semi_major, semi_minor : float
    angle : float
        Major-axis direction in [0, pi).
    rms : float
        Root-mean-square Sampson distance, a first-order geometric residual.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[0] < 6:
        raise DegenerateFit("need at least six points")
    mu = p.mean(axis=0)
    scale = float(np.max(np.abs(p - mu)))
    if scale == 0.0:
        raise DegenerateFit("all points coincide")
    u = (p - mu) / scale
    coef = _halir_flusser(u)
    c0, a0, b0, th0 = conic_to_ellipse(coef)
    fit = least_squares(
        _ellipse_sampson,
        np.array([c0[0], c0[1], a0, b0, th0]),
        args=(u,),
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    cx, cy, a, b, th = fit.x
    a, b = abs(a), abs(b)
    if b > a:
        a, b = b, a
        th += math.pi / 2.0
    rms = float(np.sqrt(np.mean(_ellipse_sampson(fit.x, u) ** 2))) * scale
    center = mu + scale * np.array([cx, cy])
    return center, a * scale, b * scale, th % math.pi, rms
