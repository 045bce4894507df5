"""Radial quantum problem, zero modes and their counting.

For angular sector m the radial Hamiltonian (unit mass and hbar) is

    H_m = -(1/(2r)) d/dr (r d/dr) + (m + a(r))^2 / (2 r^2) + V(r)

with ``a(r) = -Q r^2 / (2 R^2 (r^2 + R^2))``, the gauge whose string sits at
infinity so that ``a(0) = 0``. On a grid uniform in ``s = ln r`` the
eigenproblem becomes the symmetric pencil

    (-1/2 d^2/ds^2 + (m + a)^2 / 2 + r^2 V) psi = E r^2 psi,

whose ``r^2``-weighted norm is exactly the plane norm ``int |psi|^2 r dr``.
The default discretisation is a five-point fourth-order stencil. Eigenvalues
come from Sylvester-inertia bisection of the banded pencil, eigenvectors from
inverse iteration.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.linalg import solve_banded

from ._banded import banded_matvec, bisect_eigenvalue, inertia
from .errors import AmbiguousNormalizability, DomainError, EigenSolverFailure
from .model import ModelParams

__all__ = [
    "RadialGrid",
    "RadialOperator",
    "ModeResult",
    "ZeroModeCount",
    "log_grid",
    "uniform_grid",
    "alpha_for_zero_mode",
    "analytic_zero_mode",
    "extremal_zero_mode",
    "gauge_profile",
    "build_radial_operator",
    "kernel_residual",
    "eigenvalues",
    "solve_modes",
    "classify_tail",
    "zero_mode_window",
    "count_zero_modes",
]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing positive radii.

    ``scheme`` is ``"log"`` (uniform in ln r) or ``"uniform"``.
    """

    nodes: np.ndarray
    scheme: str
    r_min: float
    r_max: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if self.scheme not in ("log", "uniform"):
            raise DomainError(f"unknown grid scheme {self.scheme!r}")
        if nodes.ndim != 1 or nodes.size < 64:
            raise DomainError("a radial grid needs at least 64 nodes")
        if not (np.all(np.isfinite(nodes)) and nodes[0] >= self.r_min > 0.0):
            raise DomainError("grid nodes must be finite and >= r_min > 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("grid nodes must be strictly increasing")

    @property
    def n(self):
        return self.nodes.size

    @property
    def step(self):
        if self.scheme == "log":
            return float(math.log(self.nodes[1] / self.nodes[0]))
        return float(self.nodes[1] - self.nodes[0])


def log_grid(r_min=1e-4, r_max=1e4, n=4096):
    """Grid uniform in ``ln r`` including both endpoints."""
    if not (0.0 < r_min < r_max):
        raise DomainError("need 0 < r_min < r_max")
    nodes = np.exp(np.linspace(math.log(r_min), math.log(r_max), n))
    return RadialGrid(nodes, "log", float(nodes[0]), float(nodes[-1]))


def uniform_grid(r_max, n):
    """Grid ``r_i = i h`` for ``i = 1..n`` with ``h = r_max / n``."""
    h = r_max / n
    nodes = h * np.arange(1, n + 1)
    return RadialGrid(nodes, "uniform", float(h), float(nodes[-1]))


def alpha_for_zero_mode(r_cal, i_level, m_charge):
    """Coupling at which zero modes of level I exist for monopole charge M.

    ``alpha = 2 R^2 I (I+1) - R^2 M^2 / 2``; at ``|M| = 2I`` this is
    ``2 R^2 I``, the smallest non-zero value.
    """
    if int(i_level) != i_level or i_level < 1:
        raise DomainError("i_level must be a positive integer")
    if int(m_charge) != m_charge:
        raise DomainError("m_charge must be an integer")
    if abs(m_charge) > 2 * i_level:
        raise DomainError("|M| > 2I would need alpha <= 0")
    return 2.0 * r_cal**2 * i_level * (i_level + 1) - 0.5 * r_cal**2 * m_charge**2


def analytic_zero_mode(params, i_level, r):
    """Unnormalised field-free zero mode ``r^I / (r^2 + R^2)^I``."""
    if int(i_level) != i_level or i_level <= 0:
        raise DomainError("i_level must be a positive integer")
    if params.q != 0.0:
        raise DomainError("the field-free zero mode needs Q = 0")
    target = 2.0 * params.r_cal**2 * i_level * (i_level + 1)
    if abs(params.alpha - target) > 1e-12 * target:
        warnings.warn(f"alpha = {params.alpha!r} differs from {target!r}", stacklevel=2)
    r = np.asarray(r, dtype=float)
    return (r / (r * r + params.r_cal**2)) ** i_level


def extremal_zero_mode(params, i_level, m, r):
    """Zero mode ``r^|m| / (r^2 + R^2)^I`` of the ``|M| = 2I`` monopole case.

    Valid for ``Q = +-4 I R^2``, ``alpha = 2 R^2 I`` and sectors with
    ``0 <= sign(Q) m <= 2I``. Its plane tail is ``r^(|m| - 2I)``.
    """
    r = np.asarray(r, dtype=float)
    k = abs(m)
    return r**k / (r * r + params.r_cal**2) ** i_level


def gauge_profile(params, r, gauge="infinity"):
    """Angular gauge shift ``a(r)``.

    ``"infinity"`` puts the string at infinity (``a(0) = 0``,
    ``a(inf) = -Q/(2R^2)``); ``"origin"`` subtracts ``a(inf)`` so the string
    sits at the origin. A sector label m in the first gauge corresponds to
    ``m + a(inf)`` in the second.
    """
    r = np.asarray(r, dtype=float)
    rc2 = params.r_cal**2
    a = -params.q * r * r / (2.0 * rc2 * (r * r + rc2))
    if gauge == "infinity":
        return a
    if gauge == "origin":
        return a + params.q / (2.0 * rc2)
    raise DomainError(f"unknown gauge {gauge!r}")


def gauge_limits(params, gauge="infinity"):
    """``(a(0), a(inf))`` for the chosen gauge."""
    rc2 = params.r_cal**2
    if gauge == "infinity":
        return 0.0, -params.q / (2.0 * rc2)
    return params.q / (2.0 * rc2), 0.0


@dataclass(frozen=True, eq=False)
class RadialOperator:
    """Banded symmetric pencil ``(A, diag(weight))`` for one sector.

    ``bands[k, i] = A[i, i + k]``. On a log grid ``weight = r^2``; on a
    uniform grid the unknown is ``u = sqrt(r) psi`` and ``weight = 1``.
    """

    params: ModelParams
    grid: RadialGrid
    m: int
    bands: np.ndarray
    weight: np.ndarray
    gauge_a: np.ndarray
    order: int
    gauge: str = "infinity"
    n_origin: float = 0.0
    n_infinity: float = 0.0

    @property
    def diagonal(self):
        return self.bands[0]

    @property
    def off_diagonals(self):
        return [self.bands[k, : self.grid.n - k] for k in range(1, self.bands.shape[0])]

    def matvec(self, v):
        return banded_matvec(self.bands, np.ascontiguousarray(v, dtype=float))

    def to_dense(self):
        n = self.grid.n
        a = np.diag(self.bands[0].copy())
        for k, off in enumerate(self.off_diagonals, start=1):
            a += np.diag(off, k) + np.diag(off, -k)
        return a

    def to_psi(self, v):
        """Map the discrete unknown to the radial amplitude psi."""
        if self.grid.scheme == "uniform":
            return v / np.sqrt(self.grid.nodes)
        return v

    def from_psi(self, psi):
        if self.grid.scheme == "uniform":
            return psi * np.sqrt(self.grid.nodes)
        return psi

    def plane_norm(self, psi):
        """Quadrature of ``int |psi|^2 r dr`` on the grid."""
        r = self.grid.nodes
        if self.grid.scheme == "log":
            return float(np.sum(psi * psi * r * r) * self.grid.step)
        return float(np.sum(psi * psi * r) * self.grid.step)


def build_radial_operator(params, m, grid, order=4, gauge="infinity"):
    """Discretise the sector-m radial Hamiltonian.

    Parameters
    ----------
    params : ModelParams
    m : int
        Sector label in the chosen gauge.
    grid : RadialGrid
    order : {4, 2}
        Stencil order on log grids; uniform grids support order 2 only.
    gauge : {"infinity", "origin"}

    Notes
    -----
    Log grid, inner end: ghost values follow the regular Frobenius branch
    ``psi ~ r^k (1 + beta r^2)`` with ``k = |m + a(0)|``; they are folded
    into the diagonal so the matrix stays symmetric. Outer end: odd
    reflection about a wall half a step beyond the last node (Dirichlet).
    """
    m = int(m)
    a = gauge_profile(params, grid.nodes, gauge)
    a0, ainf = gauge_limits(params, gauge)
    n0 = m + a0
    r = grid.nodes
    rc2 = params.r_cal**2
    v = -params.alpha / (r * r + rc2) ** 2
    n = grid.n
    h = grid.step
    if grid.scheme == "log":
        pot = 0.5 * (m + a) ** 2 + r * r * v
        k = abs(n0)
        # r0^2-order coefficient of the Frobenius series
        beta_r0 = (pot[0] - 0.5 * k * k) / (2.0 * (k + 1.0))

        def ghost(j):
            return math.exp(-j * k * h) * (1.0 + beta_r0 * (math.exp(-2.0 * j * h) - 1.0))

        if order == 4:
            c = 1.0 / (24.0 * h * h)
            bands = np.zeros((3, n))
            bands[0] = 30.0 * c + pot
            bands[1, :-1] = -16.0 * c
            bands[2, :-2] = c
            bands[0, 0] += c * (ghost(2) - 16.0 * ghost(1))
            ratio = math.exp(-2.0 * k * h) * (1.0 + beta_r0 * (math.exp(-2.0 * h) - math.exp(2.0 * h)))
            bands[0, 1] += c * ratio
            bands[0, -1] += 16.0 * c
            bands[1, -2] += -c
        elif order == 2:
            c = 1.0 / (2.0 * h * h)
            bands = np.zeros((2, n))
            bands[0] = 2.0 * c + pot
            bands[1, :-1] = -c
            bands[0, 0] += -c * ghost(1)
            bands[0, -1] += c
        else:
            raise DomainError("order must be 2 or 4")
        weight = r * r
    else:
        if order != 2:
            raise DomainError("uniform grids support order 2 only")
        pot = ((m + a) ** 2 - 0.25) / (2.0 * r * r) + v
        c = 1.0 / (2.0 * h * h)
        bands = np.zeros((2, n))
        bands[0] = 2.0 * c + pot
        bands[1, :-1] = -c
        weight = np.ones(n)
    if not np.all(np.isfinite(bands)):
        raise DomainError("non-finite operator coefficients")
    return RadialOperator(params, grid, m, bands, weight, a, order, gauge, n0, m + ainf)


def kernel_residual(op, psi, interior=2):
    """``||H psi|| / ||psi||`` in the plane norm, over interior rows.

    The first and last ``interior`` rows carry the boundary closures and
    are excluded.
    """
    v = op.from_psi(np.asarray(psi, dtype=float))
    hv = op.matvec(v) / op.weight
    sl = slice(interior, op.grid.n - interior)
    hpsi = op.to_psi(hv)
    r = op.grid.nodes
    meas = r * r if op.grid.scheme == "log" else r
    num = np.sum((hpsi[sl] ** 2) * meas[sl])
    den = np.sum((np.asarray(psi)[sl] ** 2) * meas[sl])
    return float(math.sqrt(num / den))


def _lower_bound(op):
    lo = float(np.min(op.bands[0] / op.weight))
    # kinetic part is positive; pad against closure perturbations
    lo = min(lo, 0.0)
    lo = lo - 0.1 * abs(lo) - 1e-12
    for _ in range(200):
        if inertia(op.bands, op.weight, lo) == 0:
            return lo
        lo = 2.0 * lo - 1.0
    raise EigenSolverFailure("could not bracket the lowest eigenvalue")


def _upper_bound(op, k, start):
    hi = max(start, 1e-12)
    for _ in range(400):
        if inertia(op.bands, op.weight, hi) > k:
            return hi
        hi *= 2.0
    raise EigenSolverFailure("could not bracket the requested eigenvalue")


def eigenvalues(op, k, rtol=1e-14, atol=None, max_iter=400):
    """The ``k`` lowest generalized eigenvalues by inertia bisection."""
    if k < 1:
        raise DomainError("k must be >= 1")
    scale = op.params.alpha / op.params.r_cal**4
    atol = 1e-17 * scale if atol is None else atol
    lo = _lower_bound(op)
    hi = _upper_bound(op, k - 1, 1e-6 * scale)
    out = []
    for i in range(k):
        lam, it = bisect_eigenvalue(op.bands, op.weight, i, lo, hi, rtol, atol, max_iter)
        if it >= max_iter:
            raise EigenSolverFailure(f"bisection budget of {max_iter} iterations exhausted")
        out.append(lam)
    return np.array(out)


def _full_band(op, shift):
    b = op.bands.shape[0] - 1
    n = op.grid.n
    ab = np.zeros((2 * b + 1, n))
    ab[b] = op.bands[0] - shift * op.weight
    for k in range(1, b + 1):
        ab[b - k, k:] = op.bands[k, : n - k]
        ab[b + k, : n - k] = op.bands[k, : n - k]
    return ab, b


def _eigenvector(op, lam, iters=4):
    ab, b = _full_band(op, lam * (1.0 + 1e-12) + 1e-300)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(op.grid.n)
    for _ in range(iters):
        v = solve_banded((b, b), ab, op.weight * v, check_finite=False)
        v /= math.sqrt(float(np.sum(v * v * op.weight)))
    if not np.all(np.isfinite(v)):
        raise EigenSolverFailure("inverse iteration produced non-finite values")
    return v


@dataclass(frozen=True)
class TailFit:
    """Log-log fit of ``|psi|^2 r`` over the tail window."""

    slope: float
    deviation: float
    klass: str


def classify_tail(r, psi, window=(1e-2, 1e-1), r_max=None, delta=0.05, max_deviation=0.1):
    """Fit the tail exponent of ``|psi|^2 r`` and classify it.

    The window is given as fractions of ``r_max`` (default: last node); one
    decade inside the wall keeps the fit clear of the Dirichlet boundary.
    Classes, for slope s: ``"normalizable"`` if ``s < -1 - delta``,
    ``"marginal"`` if ``|s + 1| <= delta`` (norm diverges logarithmically),
    ``"flat"`` if ``s >= 1 - delta`` (psi tends to a constant or grows),
    ``"ambiguous"`` otherwise or when the local slope varies by more than
    ``max_deviation`` or psi changes sign in the window.
    """
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    r_max = r[-1] if r_max is None else r_max
    sel = (r >= window[0] * r_max) & (r <= window[1] * r_max)
    if np.count_nonzero(sel) < 8:
        raise DomainError("tail window holds fewer than 8 nodes")
    rs, ps = r[sel], psi[sel]
    if np.any(ps == 0.0) or np.any(np.sign(ps) != np.sign(ps[0])):
        return TailFit(math.nan, math.inf, "ambiguous")
    x = np.log(rs)
    y = np.log(ps * ps * rs)
    slope, intercept = np.polyfit(x, y, 1)
    local = np.gradient(y, x)
    dev = float(np.max(np.abs(local - slope)))
    if dev > max_deviation:
        klass = "ambiguous"
    elif slope < -1.0 - delta:
        klass = "normalizable"
    elif abs(slope + 1.0) <= delta:
        klass = "marginal"
    elif slope >= 1.0 - delta:
        klass = "flat"
    else:
        klass = "ambiguous"
    return TailFit(float(slope), dev, klass)


_CRITERIA = {
    # classes counted as normalizable, classes that make the verdict inconclusive
    "paper": ({"normalizable", "marginal"}, {"ambiguous"}),
    "strict": ({"normalizable"}, {"ambiguous", "marginal"}),
}


def _verdict(klass, criterion):
    if criterion not in _CRITERIA:
        raise DomainError(f"unknown normalizability criterion {criterion!r}")
    counted, unclear = _CRITERIA[criterion]
    if klass in unclear:
        return None
    return klass in counted


@dataclass(frozen=True, eq=False)
class ModeResult:
    """One eigenpair with its normalizability verdict.

    ``vector`` samples psi, scaled so that ``psi ~ r^|n(0)|`` at the first
    node. ``normalizable`` is ``None`` when the tail test is inconclusive
    under ``criterion``.
    """

    eigenvalue: float
    vector: np.ndarray
    plane_norm: float
    normalizable: object
    criterion: str
    tail_slope: float
    tail_class: str
    m: int = 0


def _mode(op, lam, criterion, delta, window):
    v = _eigenvector(op, lam)
    psi = op.to_psi(v)
    r = op.grid.nodes
    k = abs(op.n_origin)
    lead = psi[0] / r[0] ** k if k < 300 else psi[0]
    if lead != 0.0 and math.isfinite(lead):
        psi = psi / lead
    elif psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    tail = classify_tail(r, psi, window, delta=delta)
    return ModeResult(
        eigenvalue=float(lam),
        vector=psi,
        plane_norm=op.plane_norm(psi),
        normalizable=_verdict(tail.klass, criterion),
        criterion=criterion,
        tail_slope=tail.slope,
        tail_class=tail.klass,
        m=op.m,
    )


def solve_modes(op, k, criterion="paper", delta=0.05, window=(1e-2, 1e-1)):
    """The ``k`` lowest eigenpairs with tail-based normalizability verdicts.

    Criteria: ``"paper"`` counts modes whose plane tail decays at least like
    ``1/r`` (norm finite or logarithmically divergent); ``"strict"`` demands
    a convergent plane norm and calls the ``1/r`` case inconclusive.

    Returns
    -------
    list of ModeResult
    """
    lams = eigenvalues(op, k)
    return [_mode(op, lam, criterion, delta, window) for lam in lams]


def zero_mode_window(params, i_level, gauge="infinity"):
    """Sector labels with ``|m - Q/(4 R^2)| <= I`` (shifted for the gauge)."""
    centre = params.q / (4.0 * params.r_cal**2)
    if gauge == "origin":
        centre += gauge_limits(params, "infinity")[1]
    lo = math.ceil(centre - i_level - 1e-9)
    hi = math.floor(centre + i_level + 1e-9)
    return list(range(lo, hi + 1))


@dataclass(frozen=True)
class SectorScan:
    """Candidate E = 0 mode found in one sector, if any."""

    m: int
    in_window: bool
    eigenvalue: float
    candidate: bool
    tail_slope: float
    tail_class: str
    normalizable: object


@dataclass(frozen=True)
class ZeroModeCount:
    """Outcome of a zero-mode count with the per-sector evidence."""

    count: int
    tol: float
    sectors: tuple
    criterion: str

    def __int__(self):
        return self.count


def estimate_zero_tolerance(params, grid, i_level, gauge="infinity", factor=50.0):
    """``factor`` times the larger of two error scales.

    The grid part compares the lowest eigenvalue of the window-centre sector
    on the grid and on every second node (Richardson estimate for a fourth
    order scheme); the truncation part is ``1/(2 r_max^2)``, the energy
    scale of the box continuum.
    """
    window = zero_mode_window(params, i_level, gauge)
    m = window[len(window) // 2]
    fine = eigenvalues(build_radial_operator(params, m, grid, gauge=gauge), 1)[0]
    if grid.scheme == "log" and grid.n >= 128:
        coarse_nodes = grid.nodes[::2]
        coarse = RadialGrid(coarse_nodes, "log", float(coarse_nodes[0]), float(coarse_nodes[-1]))
        lam_c = eigenvalues(build_radial_operator(params, m, coarse, gauge=gauge), 1)[0]
        grid_err = abs(lam_c - fine) / 15.0
    else:
        grid_err = 0.0
    trunc = 1.0 / (2.0 * grid.r_max**2)
    return factor * max(grid_err, trunc)


def count_zero_modes(
    params,
    i_level,
    m_charge,
    grid=None,
    tol=None,
    *,
    criterion="paper",
    gauge="infinity",
    extra=0,
    delta=0.05,
    window=(1e-2, 1e-1),
    details=False,
):
    """Count normalizable E = 0 modes across the admissible sectors.

    In each sector the candidate is the first eigenvalue ``>= -tol``; it is a
    zero mode if ``|E| <= tol`` and its tail is normalizable under
    ``criterion``. ``extra`` additional sectors on each side of the window
    are scanned and reported but never counted.

    Parameters
    ----------
    params : ModelParams
        ``q`` must equal ``-2 R^2 M`` (monopole charge in the sign
        convention ``M = -Q / (2 R^2)``).
    i_level, m_charge : int
        ``|m_charge| = 2 i_level``.
    grid : RadialGrid, optional
        Default 4096 log nodes on ``[1e-4 R, 1e4 R]``.
    tol : float, optional
        Default from :func:`estimate_zero_tolerance`.

    Returns
    -------
    int, or ZeroModeCount if ``details``

    Raises
    ------
    AmbiguousNormalizability
        If a candidate's tail is inconclusive under ``criterion``.
    """
    if abs(m_charge) != 2 * i_level:
        raise DomainError("counting is defined for |M| = 2I")
    expected_q = -2.0 * params.r_cal**2 * m_charge
    if abs(params.q - expected_q) > 1e-12 * abs(expected_q):
        raise DomainError(f"q = {params.q!r} does not match M = {m_charge} (expected {expected_q!r})")
    alpha = alpha_for_zero_mode(params.r_cal, i_level, m_charge)
    if abs(params.alpha - alpha) > 1e-12 * alpha:
        warnings.warn(f"alpha = {params.alpha!r} differs from the zero-mode value {alpha!r}", stacklevel=2)
    if grid is None:
        grid = log_grid(1e-4 * params.r_cal, 1e4 * params.r_cal, 4096)
    if tol is None:
        tol = estimate_zero_tolerance(params, grid, i_level, gauge)
    win = zero_mode_window(params, i_level, gauge)
    labels = list(range(win[0] - extra, win[-1] + extra + 1))
    sectors = []
    count = 0
    for m in labels:
        op = build_radial_operator(params, m, grid, gauge=gauge)
        n_below = inertia(op.bands, op.weight, -tol)
        lam = eigenvalues(op, n_below + 1)[-1]
        inside = m in win
        if lam > tol:
            sectors.append(SectorScan(m, inside, float(lam), False, math.nan, "none", False))
            continue
        mode = _mode(op, lam, criterion, delta, window)
        if mode.normalizable is None and inside:
            raise AmbiguousNormalizability(
                f"sector m={m}: tail slope {mode.tail_slope:.4f} ({mode.tail_class}) "
                f"is inconclusive under criterion {criterion!r}; enlarge the grid"
            )
        sectors.append(
            SectorScan(m, inside, float(lam), True, mode.tail_slope, mode.tail_class, mode.normalizable)
        )
        if inside and mode.normalizable:
            count += 1
    result = ZeroModeCount(count, float(tol), tuple(sectors), criterion)
    return result if details else count
