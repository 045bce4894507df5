"""Compiled Dormand-Prince 5(4) integrator for the planar equations of motion.

The right-hand side is specialised to the model family so the inner loop
runs without Python callbacks. Each accepted step stores the coefficients of
the method's native quartic interpolant, so the dense output is continuous
and fourth-order accurate between steps.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_ESCAPED = 1
STATUS_UNDERFLOW = 2
STATUS_NONFINITE = 3
STATUS_MAX_STEPS = 4

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
# Quartic interpolant of the Dormand-Prince pair (Shampine, 1986).
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@njit(cache=True, nogil=True)
def rhs(t, z, alpha, rc2, q0, qdot, out):
    x = z[0]
    y = z[1]
    px = z[2]
    py = z[3]
    s = x * x + y * y + rc2
    b = -(q0 + qdot * t) / (s * s)
    w = 4.0 * alpha / (s * s * s)
    out[0] = px
    out[1] = py
    out[2] = b * py - w * x
    out[3] = -b * px - w * y


@njit(cache=True, nogil=True)
def _err_norm(err, y0, y1, tol):
    acc = 0.0
    for i in range(4):
        sc = tol + tol * max(abs(y0[i]), abs(y1[i]))
        e = err[i] / sc
        acc += e * e
    return np.sqrt(acc / 4.0)


@njit(cache=True, nogil=True)
def initial_step(t0, z0, tol, alpha, rc2, q0, qdot):
    f0 = np.empty(4)
    rhs(t0, z0, alpha, rc2, q0, qdot, f0)
    d0 = 0.0
    d1 = 0.0
    for i in range(4):
        sc = tol + tol * abs(z0[i])
        d0 += (z0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / 4.0)
    d1 = np.sqrt(d1 / 4.0)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    z1 = z0 + h0 * f0
    f1 = np.empty(4)
    rhs(t0 + h0, z1, alpha, rc2, q0, qdot, f1)
    d2 = 0.0
    for i in range(4):
        sc = tol + tol * abs(z0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / 4.0) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


@njit(cache=True, nogil=True)
def dp5_run(t0, z0, t_end, h, tol, alpha, rc2, q0, qdot, max_steps, r_escape):
    """Integrate from ``t0`` to ``t_end`` taking at most ``max_steps`` steps.

    Returns
    -------
    ts : (n+1,) times of accepted steps
    zs : (n+1, 4) states
    qs : (n, 4, 4) interpolant coefficients per step
    status : int
    h : float, step size to use when continuing
    """
    ts = np.empty(max_steps + 1)
    zs = np.empty((max_steps + 1, 4))
    qs = np.empty((max_steps, 4, 4))
    ts[0] = t0
    zs[0] = z0
    k = np.empty((7, 4))
    ztmp = np.empty(4)
    err = np.empty(4)
    t = t0
    z = z0.copy()
    rhs(t, z, alpha, rc2, q0, qdot, k[0])
    n = 0
    status = STATUS_OK
    rejected = False
    direction = 1.0 if t_end >= t0 else -1.0
    h = abs(h)
    while True:
        remaining = (t_end - t) * direction
        if remaining <= 0.0:
            break
        if n >= max_steps:
            status = STATUS_MAX_STEPS
            break
        min_h = 10.0 * abs(np.nextafter(t, t + direction) - t)
        if h < min_h:
            status = STATUS_UNDERFLOW
            break
        last = False
        h_keep = h
        if h >= remaining:
            h = remaining
            last = True
        hs = h * direction
        for st in range(1, 6):
            for i in range(4):
                acc = 0.0
                for j in range(st):
                    acc += _A[st, j] * k[j, i]
                ztmp[i] = z[i] + hs * acc
            rhs(t + _C[st] * hs, ztmp, alpha, rc2, q0, qdot, k[st])
        znew = np.empty(4)
        for i in range(4):
            acc = 0.0
            for j in range(6):
                acc += _B[j] * k[j, i]
            znew[i] = z[i] + hs * acc
        tnew = t + hs if not last else t_end
        rhs(tnew, znew, alpha, rc2, q0, qdot, k[6])
        finite = True
        for i in range(4):
            if not np.isfinite(znew[i]) or not np.isfinite(k[6, i]):
                finite = False
        if not finite:
            if h < min_h * 4.0:
                status = STATUS_NONFINITE
                break
            h *= 0.25
            rejected = True
            continue
        for i in range(4):
            acc = 0.0
            for j in range(7):
                acc += _E[j] * k[j, i]
            err[i] = hs * acc
        en = _err_norm(err, z, znew, tol)
        if en <= 1.0:
            for i in range(4):
                for p in range(4):
                    acc = 0.0
                    for j in range(7):
                        acc += k[j, i] * _P[j, p]
                    qs[n, i, p] = acc
            n += 1
            t = tnew
            z = znew
            ts[n] = t
            zs[n] = z
            for i in range(4):
                k[0, i] = k[6, i]
            if en == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, 0.9 * en ** -0.2)
            if rejected:
                fac = min(1.0, fac)
            rejected = False
            if last:
                h = h_keep
            else:
                h = h * fac
            if z[0] * z[0] + z[1] * z[1] > r_escape * r_escape:
                status = STATUS_ESCAPED
                break
        else:
            h = h * max(0.2, 0.9 * en ** -0.2)
            rejected = True
    return ts[: n + 1], zs[: n + 1], qs[:n], status, h


@njit(cache=True, nogil=True)
def dense_eval(ts, zs, qs, tq, out):
    """Evaluate the piecewise quartic interpolant at sorted query times."""
    n = ts.shape[0] - 1
    seg = 0
    for m in range(tq.shape[0]):
        tt = tq[m]
        while seg < n - 1 and tt > ts[seg + 1]:
            seg += 1
        h = ts[seg + 1] - ts[seg]
        th = (tt - ts[seg]) / h if h != 0.0 else 0.0
        for i in range(4):
            acc = 0.0
            pw = th
            for p in range(4):
                acc += qs[seg, i, p] * pw
                pw *= th
            out[m, i] = zs[seg, i] + h * acc
