"""Equations of motion, adaptive integration, period measurement and flux sweeps.

The flow is written in kinetic-momentum coordinates, so no vector potential
(and no Dirac-string gauge choice) ever appears on the classical side::

    x' = Px,  y' = Py,  Px' = B Py - dV/dx,  Py' = -B Px - dV/dy
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.optimize import brentq

from . import _rk
from .errors import (
    AdiabaticityWarning,
    BranchFlip,
    DomainError,
    NoReturn,
    NonFiniteState,
    NotZeroEnergy,
    StepUnderflow,
    Unbound,
)
from .model import ModelParams, PhaseState, hamiltonian

__all__ = [
    "Trajectory",
    "QSweepRecord",
    "derivative",
    "integrate",
    "measure_period",
    "sweep_q",
    "energies",
]

_CHUNK = 20000


def derivative(params, s):
    """Phase-space velocity ``(x', y', Px', Py')`` at state ``s``."""
    out = np.empty(4)
    rc2 = params.r_cal**2
    _rk.rhs(s.t, s.as_array(), params.alpha, rc2, params.q, 0.0, out)
    return out


def _rhs_rows(params, t, z, q0, qdot):
    """Vectorised right-hand side over rows of ``z``."""
    x, y, px, py = z.T
    s = x * x + y * y + params.r_cal**2
    b = -(q0 + qdot * t) / (s * s)
    w = 4.0 * params.alpha / s**3
    return np.column_stack([px, py, b * py - w * x, -b * px - w * y])


def energies(params, z):
    """Energy at every row of a state array (kinetic + potential)."""
    z = np.atleast_2d(z)
    r2 = z[:, 0] ** 2 + z[:, 1] ** 2
    return 0.5 * (z[:, 2] ** 2 + z[:, 3] ** 2) - params.alpha / (r2 + params.r_cal**2) ** 2


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integrator steps plus the interpolant between them.

    Attributes
    ----------
    params : ModelParams
        Parameters at t = 0; ``q_rate`` gives the flux ramp if any.
    t : ndarray, shape (n,)
    z : ndarray, shape (n, 4)
        Rows ``(x, y, Px, Py)``.
    coeffs : ndarray, shape (n-1, 4, 4)
        Quartic interpolant coefficients per step.
    tol : float
    energy_drift : float
        ``max |E(t) - E(0)|`` over the accepted steps.
    q_rate : float
        dQ/dt of a linear flux ramp; zero for fixed flux.
    status : str
    """

    params: ModelParams
    t: np.ndarray
    z: np.ndarray
    coeffs: np.ndarray
    tol: float
    energy_drift: float
    q_rate: float = 0.0
    status: str = "ok"

    def __post_init__(self):
        if self.t.shape[0] < 2:
            raise DomainError("a trajectory needs at least two samples")
        if np.any(np.diff(self.t) <= 0.0):
            raise DomainError("trajectory times must be strictly increasing")

    @property
    def samples(self):
        return [PhaseState.from_array(zi, ti) for ti, zi in zip(self.t, self.z)]

    @property
    def t_end(self):
        return float(self.t[-1])

    def q_at(self, t):
        return self.params.q + self.q_rate * (np.asarray(t, dtype=float) - self.t[0])

    def __call__(self, tq):
        """Dense output at times ``tq`` (scalar or array) inside the span."""
        tq = np.asarray(tq, dtype=float)
        flat = np.atleast_1d(tq).ravel()
        if np.any(flat < self.t[0] - 1e-12 * abs(self.t[-1])) or np.any(
            flat > self.t[-1] * (1 + 1e-14) + 1e-300
        ):
            raise DomainError("dense output requested outside the integrated span")
        order = np.argsort(flat, kind="stable")
        out = np.empty((flat.size, 4))
        tmp = np.empty((flat.size, 4))
        _rk.dense_eval(self.t, self.z, self.coeffs, np.ascontiguousarray(flat[order]), tmp)
        out[order] = tmp
        return out[0] if tq.ndim == 0 else out.reshape(tq.shape + (4,))

    def resample(self, n, t0=None, t1=None, endpoint=True):
        """Uniform-in-time resampling, returned as ``(t, z)``."""
        t0 = self.t[0] if t0 is None else t0
        t1 = self.t[-1] if t1 is None else t1
        tq = np.linspace(t0, t1, n, endpoint=endpoint)
        return tq, self(tq)


def _status_name(code):
    return {
        _rk.STATUS_OK: "ok",
        _rk.STATUS_ESCAPED: "escaped",
        _rk.STATUS_UNDERFLOW: "underflow",
        _rk.STATUS_NONFINITE: "nonfinite",
        _rk.STATUS_MAX_STEPS: "max_steps",
    }[code]


def _run(params, z0, t0, t_end, tol, q_rate, r_escape, max_steps, h=None):
    """Chunked driver around the compiled stepper."""
    rc2 = params.r_cal**2
    q0 = params.q
    z0 = np.ascontiguousarray(z0, dtype=float)
    if h is None:
        h = _rk.initial_step(t0, z0, tol, params.alpha, rc2, q0, q_rate)
    ts, zs, qs = [np.array([t0])], [z0[None, :]], []
    t, z, taken = t0, z0, 0
    status = _rk.STATUS_OK
    while True:
        cap = min(_CHUNK, max_steps - taken)
        if cap <= 0:
            status = _rk.STATUS_MAX_STEPS
            break
        tc, zc, qc, status, h = _rk.dp5_run(
            t, z, t_end, h, tol, params.alpha, rc2, q0, q_rate, cap, r_escape
        )
        ts.append(tc[1:])
        zs.append(zc[1:])
        qs.append(qc)
        taken += tc.shape[0] - 1
        t, z = tc[-1], zc[-1].copy()
        if status != _rk.STATUS_MAX_STEPS or taken >= max_steps:
            break
    return np.concatenate(ts), np.concatenate(zs), np.concatenate(qs), status, h


def integrate(
    params,
    s0,
    t_max,
    tol=1e-10,
    *,
    q_rate=0.0,
    r_escape=math.inf,
    max_steps=2_000_000,
):
    """Integrate the flow from ``s0`` for a duration ``t_max``.

    Parameters
    ----------
    params : ModelParams
        ``params.q`` is the flux at ``s0.t``.
    s0 : PhaseState
    t_max : float
        Positive duration.
    tol : float
        Relative and absolute tolerance of the local error, in [1e-14, 1e-3].
    q_rate : float, optional
        Linear flux ramp ``Q(t) = q + q_rate * (t - s0.t)``. The ramp enters
        B only; no induced electric field is modelled.
    r_escape : float, optional
        Stop early (status ``"escaped"``) when r exceeds this radius.
    max_steps : int, optional

    Returns
    -------
    Trajectory
        Time axis starts at ``s0.t``.

    Raises
    ------
    StepUnderflow, NonFiniteState
    """
    if not (t_max > 0.0 and math.isfinite(t_max)):
        raise DomainError("t_max must be positive and finite")
    if not (1e-14 <= tol <= 1e-3):
        raise DomainError("tol must lie in [1e-14, 1e-3]")
    # the compiled stepper measures time from zero so the ramp is Q(0) = q
    ts, zs, qs, status, _ = _run(
        params, s0.as_array(), 0.0, float(t_max), tol, q_rate, r_escape, max_steps
    )
    ts = ts + s0.t
    if status == _rk.STATUS_UNDERFLOW:
        raise StepUnderflow(float(ts[-1]))
    if status == _rk.STATUS_NONFINITE:
        raise NonFiniteState(float(ts[-1]))
    if ts.shape[0] < 2:
        raise StepUnderflow(float(ts[-1]))
    e = energies(params, zs)
    drift = float(np.max(np.abs(e - e[0])))
    return Trajectory(params, ts, zs, qs, tol, drift, q_rate, _status_name(status))


def _period_estimate(params, s0):
    from .invariants import constants_of_motion

    c = constants_of_motion(params, s0)
    lz = c.l_z
    scale = abs(lz) if abs(lz) > 1e-12 else 1e-12
    if abs(c.energy) <= 1e-8 * params.alpha / params.r_cal**4 and abs(lz) > 1e-12:
        t = math.pi * params.alpha / scale**3 + math.pi * params.q / (2.0 * lz * scale)
        if t > 0.0:
            return t, True
    return params.r_cal**2 / scale, False


def measure_period(
    params,
    s0,
    tol=1e-10,
    *,
    escape_radius=None,
    time_budget=None,
    return_tol=1e-6,
    depart_tol=1e-3,
):
    """First return time to ``s0`` in the full phase space.

    Distances are measured with positions scaled by R and momenta by
    sqrt(2 alpha)/R^2. A return is a local minimum of that distance, located
    with a bracketed root search of its time derivative on the dense output,
    at which the distance is below ``return_tol``.

    Parameters
    ----------
    params : ModelParams
    s0 : PhaseState
    tol : float
        Integrator tolerance.
    escape_radius : float, optional
        Default ``1e3 * r_cal``.
    time_budget : float, optional
        Default ``1e4`` times the period formula on the zero-energy stratum,
        else ``1e4 * r_cal**2 / |L_z|``.
    return_tol : float
        Largest accepted scaled distance at the return.
    depart_tol : float
        Scaled distance the orbit must first exceed before a return counts.

    Returns
    -------
    float

    Raises
    ------
    Unbound
        The orbit crosses the escape radius.
    NoReturn
        No return within the time budget.
    """
    escape_radius = 1e3 * params.r_cal if escape_radius is None else escape_radius
    t_est, _ = _period_estimate(params, s0)
    if time_budget is None:
        time_budget = 1e4 * t_est
    w = np.array(
        [1.0 / params.r_cal] * 2 + [1.0 / params.speed_scale] * 2
    ) ** 2
    z0 = s0.as_array()
    rc2 = params.r_cal**2

    def g_rows(t, z):
        return np.sum((z - z0) * w * _rhs_rows(params, t, z, params.q, 0.0), axis=1)

    def dist(z):
        return math.sqrt(float(np.sum((z - z0) ** 2 * w)))

    t, z = 0.0, z0.copy()
    h = _rk.initial_step(0.0, z, tol, params.alpha, rc2, params.q, 0.0)
    departed = False
    chunk = 0.5 * t_est
    while t < time_budget:
        t_end = min(t + chunk, time_budget)
        ts, zs, qs, status, h = _run(
            params, z, t, t_end, tol, 0.0, escape_radius, 10_000_000, h
        )
        if status == _rk.STATUS_ESCAPED:
            raise Unbound(f"orbit left r = {escape_radius:g} at t = {ts[-1]:.6g}")
        if status == _rk.STATUS_UNDERFLOW:
            raise StepUnderflow(float(ts[-1]))
        if status == _rk.STATUS_NONFINITE:
            raise NonFiniteState(float(ts[-1]))
        d = np.sqrt(np.sum((zs - z0) ** 2 * w, axis=1))
        g = g_rows(ts, zs)
        seg = Trajectory(params, ts, zs, qs, tol, 0.0)
        for i in range(ts.shape[0] - 1):
            if not departed:
                if d[i + 1] > depart_tol:
                    departed = True
                continue
            if g[i] < 0.0 <= g[i + 1]:
                def gt(tt):
                    zz = seg(tt)
                    return float(g_rows(np.array([tt]), zz[None, :])[0])

                lo, hi = ts[i], ts[i + 1]
                glo, ghi = gt(lo), gt(hi)
                if glo > 0.0 or ghi < 0.0:
                    # interpolant sign disagrees with the node values; use node time
                    tr = lo if d[i] < d[i + 1] else hi
                else:
                    tr = brentq(gt, lo, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-15)
                if dist(seg(tr)) <= return_tol:
                    return float(tr)
        t, z = float(ts[-1]), zs[-1].copy()
        chunk = min(2.0 * chunk, 4.0 * t_est)
    raise NoReturn(f"no phase-space return within t = {time_budget:.6g}")


@dataclass(frozen=True)
class QSweepRecord:
    """Orbit geometry fitted over one period window of a flux sweep.

    ``q`` and ``t`` refer to the middle of the window.
    """

    q: float
    geometry: object
    t: float
    t_start: float = 0.0
    t_stop: float = 0.0
    predicted_center: tuple = field(default=(math.nan, math.nan))


def _unwrapped_angle(z, c):
    return np.unwrap(np.arctan2(z[:, 1] - c[1], z[:, 0] - c[0]))


def sweep_q(
    params,
    s0,
    q_from,
    q_to,
    rate,
    *,
    tol=1e-10,
    every=1,
    l_threshold=None,
    n_fit=400,
    max_records=100_000,
):
    """Ramp Q linearly from ``q_from`` to ``q_to`` and fit each orbit.

    The trajectory is cut into windows of exactly one measured period: the
    angle about the window-start center ``J/(2 L_z)`` advances by 2 pi. Every
    ``every``-th window is fitted with a circle and emitted as a record.

    Parameters
    ----------
    params : ModelParams
        ``alpha`` and ``r_cal`` are used; ``q`` is replaced by ``q_from``.
    s0 : PhaseState
        Zero-energy state at ``q_from``.
    rate : float
        dQ/dt; its sign must move Q from ``q_from`` toward ``q_to``.
    l_threshold : float, optional
        A ``BranchFlip`` warning is emitted and the sweep stops once
        ``|L_z|`` drops below this value or changes sign. Default is 10 % of
        the initial ``|L_z|``.

    Returns
    -------
    list of QSweepRecord

    Warns
    -----
    AdiabaticityWarning
        If ``|rate| * T > 0.01 (|Q| + 1)`` at the start.
    BranchFlip
        When the orbital sense is about to flip.
    """
    from .geometry import OrbitGeometry, _circle_fit_points, _period_formula
    from .invariants import constants_of_motion_array

    if rate == 0.0 or (q_to - q_from) * rate <= 0.0:
        raise DomainError("rate must be non-zero and point from q_from to q_to")
    p0 = params.with_q(q_from)
    e0 = hamiltonian(p0, s0)
    if abs(e0) > 1e-9 * p0.alpha / p0.r_cal**4:
        raise NotZeroEnergy(f"sweep start must have E = 0, got {e0:.3e}")
    s0 = PhaseState(s0.x, s0.y, s0.px, s0.py, 0.0)
    c0 = constants_of_motion_array(p0, s0.as_array()[None, :], p0.q)
    l0 = float(c0["l_z"][0])
    if l_threshold is None:
        l_threshold = 0.1 * abs(l0)
    t_orbit = _period_formula(p0, l0)
    if abs(rate) * t_orbit > 0.01 * (abs(q_from) + 1.0):
        warnings.warn(
            f"dQ per orbit {abs(rate) * t_orbit:.3g} exceeds 0.01(|Q|+1)",
            AdiabaticityWarning,
            stacklevel=2,
        )
    t_total = (q_to - q_from) / rate
    traj = integrate(p0, s0, t_total, tol, q_rate=rate)
    # the sweep ends where the orbital sense is about to flip
    l_all = constants_of_motion_array(p0, traj.z, traj.q_at(traj.t))["l_z"]
    bad = np.nonzero((np.abs(l_all) < l_threshold) | (l_all * l0 <= 0.0))[0]
    t_limit = float(traj.t[bad[0]]) if bad.size else traj.t_end

    records = []
    t_w = 0.0
    k = 0
    while len(records) < max_records:
        z_w = traj(t_w)
        q_w = float(traj.q_at(t_w))
        c = constants_of_motion_array(p0, z_w[None, :], q_w)
        lz = float(c["l_z"][0])
        center = np.array([c["jx"][0], c["jy"][0]]) / (2.0 * lz)
        t_guess = _period_formula(p0.with_q(q_w), lz)
        if not t_guess > 0.0:
            break
        # locate one full revolution about the window-start center; the
        # period drifts during the ramp so the search span may grow
        span = 1.25 * t_guess
        j = None
        while True:
            t_hi = min(t_w + span, t_limit)
            if t_hi <= t_w:
                break
            tt = np.linspace(t_w, t_hi, 2001)
            ang = _unwrapped_angle(traj(tt), center)
            turn = (ang - ang[0]) * np.sign(lz)
            idx = np.nonzero(turn >= 2.0 * math.pi)[0]
            if idx.size:
                j = idx[0]
                break
            if t_hi >= t_limit or span > 8.0 * t_guess:
                break
            span *= 2.0
        if j is None:
            break

        def f(tq):
            zq = traj(tq)
            a = math.atan2(zq[1] - center[1], zq[0] - center[0]) - ang[j - 1]
            a = (a + math.pi) % (2.0 * math.pi) - math.pi + ang[j - 1]
            return (a - ang[0]) * np.sign(lz) - 2.0 * math.pi

        t_stop = brentq(f, tt[j - 1], tt[j], xtol=1e-13 * max(1.0, tt[j]))
        if k % every == 0:
            tf = np.linspace(t_w, t_stop, n_fit, endpoint=False)
            zf = traj(tf)
            fc, fr, res = _circle_fit_points(zf[:, :2])
            t_mid = 0.5 * (t_w + t_stop)
            z_mid = traj(t_mid)
            q_mid = float(traj.q_at(t_mid))
            cm = constants_of_motion_array(p0, z_mid[None, :], q_mid)
            lz_m = float(cm["l_z"][0])
            j_m = np.array([cm["jx"][0], cm["jy"][0]])
            geom = OrbitGeometry(
                center=(float(fc[0]), float(fc[1])),
                radius_r=float(fr),
                offset_l=float(math.hypot(fc[0], fc[1])),
                l_z=lz_m,
                j=(float(j_m[0]), float(j_m[1])),
                period_pred=_period_formula(p0.with_q(q_mid), lz_m),
                fit_residual=float(res),
            )
            pc = j_m / (2.0 * lz_m)
            records.append(
                QSweepRecord(q_mid, geom, t_mid, t_w, t_stop, (float(pc[0]), float(pc[1])))
            )
        k += 1
        t_w = t_stop
    if bad.size:
        warnings.warn(
            f"|L_z| = {abs(l_all[bad[0]]):.3g} fell below {l_threshold:.3g} at Q = {float(traj.q_at(t_limit)):.4g}",
            BranchFlip,
            stacklevel=2,
        )
    return records
