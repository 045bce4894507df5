"""Parameter family, field profiles and phase-space states.

The family is hard-wired: a particle of unit mass in the planar potential
``V(r) = -alpha / (r**2 + R**2)**2`` with the radial magnetic field
``B(r) = -Q / (r**2 + R**2)**2``. Both profiles are fixed by requiring the
Runge-Lenz-like vector J to be conserved on the zero-energy stratum, so no
other potentials are supported.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "ModelParams",
    "PhaseState",
    "FieldProfile",
    "field_profile",
    "hamiltonian",
    "make_e0_state",
    "effective_potential",
    "bound_angular_momentum_limit",
    "equivalent_params_under_q2_shift",
    "e_z_cross",
]


def _finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """One member of the Hamiltonian family.

    Parameters
    ----------
    alpha : float
        Coupling strength, strictly positive.
    r_cal : float
        Length scale of the potential and the field, strictly positive.
    q : float
        Monopole strength, any sign.
    """

    alpha: float
    r_cal: float
    q: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "r_cal", "q"):
            value = float(getattr(self, name))
            _finite(name, value)
            object.__setattr__(self, name, value)
        if self.alpha <= 0.0:
            raise DomainError(f"alpha must be > 0, got {self.alpha!r}")
        if self.r_cal <= 0.0:
            raise DomainError(f"r_cal must be > 0, got {self.r_cal!r}")

    def with_q(self, q):
        return replace(self, q=float(q))

    @property
    def speed_scale(self):
        """Speed of a zero-energy particle at the origin, sqrt(2 alpha)/R^2."""
        return math.sqrt(2.0 * self.alpha) / self.r_cal**2


@dataclass(frozen=True)
class PhaseState:
    """Position and kinetic momentum (equal to velocity for unit mass)."""

    x: float
    y: float
    px: float
    py: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "px", "py", "t"):
            value = float(getattr(self, name))
            _finite(name, value)
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, z, t=0.0):
        return cls(float(z[0]), float(z[1]), float(z[2]), float(z[3]), float(t))

    def as_array(self):
        return np.array([self.x, self.y, self.px, self.py])

    @property
    def r(self):
        return math.hypot(self.x, self.y)

    @property
    def phi(self):
        return math.atan2(self.y, self.x)


@dataclass(frozen=True)
class FieldProfile:
    """Closed-form profiles at one radius (or an array of radii)."""

    v: float
    dv_dr: float
    b: float
    g: float


def e_z_cross(a, b):
    """Return e_z x (a, b) = (-b, a)."""
    return -b, a


def field_profile(params, r, g_offset=0.0):
    """Evaluate V, V', B and G at radius ``r``.

    Parameters
    ----------
    params : ModelParams
    r : float or ndarray
        Non-negative radius.
    g_offset : float, optional
        Additive constant in G. The physical choice is 0 (G vanishes at
        infinity); a non-zero value exists only to demonstrate that any other
        integration constant spoils conservation of J.

    Returns
    -------
    FieldProfile
    """
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)):
        raise DomainError("r must be finite")
    if np.any(r_arr < 0.0):
        raise DomainError("r must be non-negative")
    s = r_arr * r_arr + params.r_cal**2
    v = -params.alpha / s**2
    dv = 4.0 * params.alpha * r_arr / s**3
    b = -params.q / s**2
    g = params.q / s + g_offset
    if r_arr.ndim == 0:
        return FieldProfile(float(v), float(dv), float(b), float(g))
    return FieldProfile(v, dv, b, g)


def hamiltonian(params, s):
    """Energy ``P**2/2 + V(r)``; gauge independent because P is kinetic."""
    r2 = s.x * s.x + s.y * s.y
    v = -params.alpha / (r2 + params.r_cal**2) ** 2
    return 0.5 * (s.px * s.px + s.py * s.py) + v


def make_e0_state(params, x, y, heading, t=0.0):
    """Zero-energy state at ``(x, y)`` moving along ``heading`` (radians)."""
    _finite("x", float(x))
    _finite("y", float(y))
    speed = math.sqrt(2.0 * params.alpha) / (x * x + y * y + params.r_cal**2)
    return PhaseState(x, y, speed * math.cos(heading), speed * math.sin(heading), t)


def effective_potential(params, l_z, r):
    """Radial effective potential for canonical angular momentum ``l_z``.

    Uses the mechanical angular momentum K = l_z - G(r)/2.
    """
    r = float(r)
    if not (math.isfinite(r) and r >= 0.0):
        raise DomainError("r must be finite and non-negative")
    f = field_profile(params, r)
    if r == 0.0:
        k0 = l_z - 0.5 * f.g
        if abs(k0) > 1e-14 * (abs(l_z) + abs(f.g) + 1.0):
            raise DomainError("centrifugal term diverges at r = 0 for non-zero K(0)")
        return f.v
    k = l_z - 0.5 * f.g
    return k * k / (2.0 * r * r) + f.v


def bound_angular_momentum_limit(params, sense=1):
    """Largest ``sense * L_z`` compatible with a non-positive energy orbit.

    A bound orbit at ``E <= 0`` needs ``U_eff(r) <= 0`` somewhere, which is
    ``sense*L <= sense*G/2 + sqrt(2 alpha) r / (r^2 + R^2)``. The right side
    is maximised over r by a bracketed root search of its derivative.

    Parameters
    ----------
    params : ModelParams
    sense : {1, -1}
        Orbital sense. For Q = 0 both senses give sqrt(alpha / (2 R^2)).

    Returns
    -------
    float
        The limiting value of ``sense * L_z`` (positive).
    """
    if sense not in (1, -1):
        raise DomainError("sense must be +1 or -1")
    a2 = math.sqrt(2.0 * params.alpha)
    rc2 = params.r_cal**2
    q = params.q
    if q == 0.0:
        return math.sqrt(params.alpha / (2.0 * rc2))

    def slope(r):
        return a2 * (rc2 - r * r) - sense * q * r

    hi = params.r_cal
    while slope(hi) > 0.0:
        hi *= 2.0
    r_star = brentq(slope, 0.0, hi, xtol=1e-14 * params.r_cal, rtol=1e-14)
    return (sense * 0.5 * q + a2 * r_star) / (r_star * r_star + rc2)


def equivalent_params_under_q2_shift(params):
    """Absorb the extra term ``-Q^2 / (8 R^2 (r^2 + R^2)^2)`` into alpha."""
    return replace(params, alpha=params.alpha + params.q**2 / (8.0 * params.r_cal**2))
