"""Classical and quantum dynamics of a particle in the planar potential
``V = -alpha / (r^2 + R^2)^2`` with the magnetic field ``B = -Q / (r^2 + R^2)^2``.

Zero-energy orbits are circles, the conserved quantities close into a
centrally extended algebra, and stereographic projection maps the system to
a charged particle on a sphere around a monopole.
"""

from .errors import *  # noqa: F401,F403
from .model import (
    FieldProfile,
    ModelParams,
    PhaseState,
    bound_angular_momentum_limit,
    effective_potential,
    equivalent_params_under_q2_shift,
    field_profile,
    hamiltonian,
    make_e0_state,
)
from .dynamics import QSweepRecord, Trajectory, derivative, integrate, measure_period, sweep_q
from .invariants import (
    AlgebraReport,
    ConstantsOfMotion,
    casimir_residual,
    constants_of_motion,
    constants_of_motion_array,
    poisson_bracket,
    verify_algebra,
)
from .geometry import (
    EllipseFit,
    OrbitGeometry,
    StabilityProbe,
    centered_orbit_determinant,
    constraint_residuals,
    determinant_roots,
    e0_state_for,
    fit_circle,
    hodograph_analysis,
    minimum_radius,
    period_formula,
    predict_geometry,
    stability_determinant,
)
from .stereo import (
    MonopoleData,
    SphereCircle,
    SpherePoint,
    monopole_data,
    plane_flux_integral,
    project,
    sphere_circle_analysis,
    unproject,
)
from .quantum import (
    ModeResult,
    RadialOperator,
    ZeroModeCount,
    alpha_for_zero_mode,
    analytic_zero_mode,
    build_radial_operator,
    count_zero_modes,
    eigenvalues,
    log_grid,
    solve_modes,
    uniform_grid,
)

__version__ = "0.1.0"
