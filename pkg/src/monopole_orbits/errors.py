"""Exception and warning types shared across the package."""


class MonopoleOrbitsError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MonopoleOrbitsError, ValueError):
    """An input lies outside the domain of an operation."""


class NumericalFailure(MonopoleOrbitsError, RuntimeError):
    """A numerical procedure could not deliver a trustworthy result."""


class StepUnderflow(NumericalFailure):
    """Adaptive step size fell below the representable resolution of t."""

    def __init__(self, t):
        super().__init__(f"step size underflow at t = {t!r}")
        self.t = t


class NonFiniteState(NumericalFailure):
    """The integrated state became NaN or infinite."""

    def __init__(self, t):
        super().__init__(f"non-finite state encountered at t = {t!r}")
        self.t = t


class Unbound(NumericalFailure):
    """The trajectory left the escape radius."""


class NoReturn(NumericalFailure):
    """No phase-space return was found within the time budget."""


class NotZeroEnergy(DomainError):
    """A zero-energy state was required."""


class ZeroAngularMomentum(DomainError):
    """Angular momentum is too small for the requested construction."""


class Inconsistent(NumericalFailure):
    """Two independent evaluations of the same quantity disagree."""


class DegenerateFit(NumericalFailure):
    """A curve fit is ill-posed for the supplied samples."""


class Forbidden(DomainError):
    """The requested point is classically forbidden (E < V)."""


class NoCircularOrbit(DomainError):
    """Force balance admits no real angular frequency."""


class PoleSingular(DomainError):
    """Inverse projection requested at or near the north pole."""


class NotPlanar(NumericalFailure):
    """Projected orbit does not lie on a plane within tolerance."""


class AmbiguousNormalizability(NumericalFailure):
    """Tail test of a radial mode is inconclusive on the given grid."""


class EigenSolverFailure(NumericalFailure):
    """Eigenvalue iteration did not converge within its budget."""


class BranchFlip(UserWarning):
    """Angular momentum approached zero during a flux sweep.

    Emitted as a warning because it is a physical signal, not a failure.
    """


class AdiabaticityWarning(UserWarning):
    """Flux changes too much per orbit for the sweep to be adiabatic."""
