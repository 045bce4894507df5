"""Reusable experiment building blocks shared by the CLI and the test suite."""

from dataclasses import dataclass
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import integrate, measure_period
from .geometry import fit_circle, predict_geometry
from .invariants import constants_of_motion
from .model import ModelParams, make_e0_state

__all__ = ["ClosureResult", "random_e0_states", "closure_check", "worker_count", "parallel_map"]


def worker_count():
    """Worker threads from ``MONOPOLE_ORBITS_THREADS`` (default 1)."""
    raw = os.environ.get("MONOPOLE_ORBITS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Order-preserving map over a thread pool sized by :func:`worker_count`."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def random_e0_states(params, n, seed, min_abs_l_z=0.3, box=2.0):
    """Zero-energy states at random positions and headings.

    Positions are uniform in ``[-box R, box R]^2`` and headings uniform in
    ``[0, 2 pi)``. Draws with ``|L_z| < min_abs_l_z * sqrt(alpha) / R`` are
    rejected: the period grows like ``|L_z|^-3`` so near-radial orbits
    would dominate the run time without probing anything new.
    """
    rng = np.random.default_rng(seed)
    out = []
    scale = math.sqrt(params.alpha) / params.r_cal
    while len(out) < n:
        x, y = rng.uniform(-box, box, 2) * params.r_cal
        heading = rng.uniform(0.0, 2.0 * math.pi)
        s = make_e0_state(params, x, y, heading)
        if abs(constants_of_motion(params, s).l_z) >= min_abs_l_z * scale:
            out.append(s)
    return out


@dataclass(frozen=True)
class ClosureResult:
    """Fit versus prediction for one zero-energy initial condition."""

    q: float
    l_z: float
    center_err: float
    radius_err: float
    fit_residual: float
    closure: float
    period_pred: float
    period_meas: float

    @property
    def period_rel_err(self):
        return abs(self.period_meas - self.period_pred) / self.period_pred


def closure_check(params, s, tol=1e-10):
    """Integrate one predicted period, fit a circle and measure the return."""
    pred = predict_geometry(params, s)
    traj = integrate(params, s, pred.period_pred, tol)
    fit = fit_circle(traj)
    end = traj.z[-1]
    closure = math.hypot(end[0] - s.x, end[1] - s.y)
    t_meas = measure_period(params, s, tol)
    return ClosureResult(
        q=params.q,
        l_z=pred.l_z,
        center_err=math.hypot(fit.center[0] - pred.center[0], fit.center[1] - pred.center[1]),
        radius_err=abs(fit.radius_r - pred.radius_r),
        fit_residual=fit.fit_residual,
        closure=closure,
        period_pred=pred.period_pred,
        period_meas=t_meas,
    )
