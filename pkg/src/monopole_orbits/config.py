"""JSON run configuration: schema, defaults and validation.

A minimal document only needs the model parameters::

    {"alpha": 2, "r_cal": 1, "q": 0}

Command blocks (``simulate``, ``period``, ``algebra_check``, ``geometry``,
``stability``, ``hodograph``, ``stereo``, ``flux``, ``sweep_q``,
``quantum_zero_mode``, ``quantum_count``, ``quantum_spectrum``) and the
``output`` block are optional and fall back to defaults. Unknown keys are
rejected everywhere.
"""

import json
from typing import Annotated, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .model import ModelParams

__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config"]

Finite = Annotated[float, Field(allow_inf_nan=False)]
Positive = Annotated[float, Field(gt=0, allow_inf_nan=False)]
Tol = Annotated[float, Field(ge=1e-14, le=1e-3)]
Fraction = Annotated[float, Field(gt=0, allow_inf_nan=False)]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class E0Start(_Block):
    x: Finite
    y: Finite
    heading: Finite = 0.0


class OrbitSpec(_Block):
    """Initial condition: one of ``l_z``, ``e0`` or ``state``.

    ``l_z`` builds the zero-energy orbit with that angular momentum whose
    center lies along ``axis_angle``. ``e0`` places a zero-energy particle
    at ``(x, y)`` moving along ``heading`` (radians). ``state`` gives
    ``[x, y, px, py]`` directly. With none of them, ``l_z`` defaults to
    80 % of the bound-orbit limit.
    """

    l_z: Optional[Finite] = None
    axis_angle: Finite = 0.0
    e0: Optional[E0Start] = None
    state: Optional[Tuple[Finite, Finite, Finite, Finite]] = None

    @model_validator(mode="after")
    def _one_kind(self):
        given = [k for k in ("l_z", "e0", "state") if getattr(self, k) is not None]
        if len(given) > 1:
            raise ValueError(f"give at most one of l_z, e0, state (got {', '.join(given)})")
        if self.l_z == 0.0:
            raise ValueError("l_z must be non-zero")
        return self


class SimulateCfg(_Block):
    orbit: OrbitSpec = OrbitSpec()
    periods: Positive = 10.0
    t_max: Optional[Positive] = None
    tol: Tol = 1e-10
    n_out: Annotated[int, Field(ge=2, le=1_000_000)] = 2000


class PeriodCfg(_Block):
    orbit: OrbitSpec = OrbitSpec(l_z=1.0)
    tol: Tol = 1e-10
    rel_tol: Positive = 1e-6


class AlgebraCfg(_Block):
    n_samples: Annotated[int, Field(ge=1)] = 1000
    h: Positive = 1e-5
    threshold: Positive = 1e-6
    casimir_threshold: Positive = 1e-11
    box: Positive = 3.0


class GeometryCfg(_Block):
    n_cases: Annotated[int, Field(ge=1)] = 20
    tol: Tol = 1e-10
    min_abs_l_z: Annotated[float, Field(ge=0)] = 0.3
    fit_tol: Positive = 1e-6
    match_tol: Positive = 1e-5
    period_tol: Positive = 1e-6


class StabilityCfg(_Block):
    energy: Finite = 0.0
    a_min: Positive = 0.05
    a_max: Positive = 20.0
    n: Annotated[int, Field(ge=10)] = 2000


class HodographCfg(_Block):
    orbit: OrbitSpec = OrbitSpec()
    tol: Tol = 1e-10
    ecc_tol: Positive = 1e-3
    axis_tol: Positive = 1e-3


class StereoCfg(_Block):
    n_orbits: Annotated[int, Field(ge=1)] = 20
    n_metric: Annotated[int, Field(ge=1)] = 100
    tol: Tol = 1e-10
    planar_tol: Positive = 1e-6
    metric_tol: Positive = 1e-6


class FluxCfg(_Block):
    r_max: Positive = 1e3
    n: Annotated[int, Field(ge=16)] = 256
    rel_tol: Positive = 1e-5


class SweepCfg(_Block):
    orbit: OrbitSpec = OrbitSpec(l_z=0.8)
    q_from: Optional[Finite] = None
    q_to: Optional[Finite] = None
    rate: Finite = 5e-4
    every: Annotated[int, Field(ge=1)] = 1
    l_threshold: Optional[Positive] = None
    tol: Tol = 1e-10
    min_records: Annotated[int, Field(ge=0)] = 20
    collinear_tol: Positive = 1e-3
    endpoint_tol: Positive = 1e-2


class GridCfg(_Block):
    n: Annotated[int, Field(ge=64)] = 4096
    r_min: Positive = 1e-4
    r_max: Positive = 1e4

    @model_validator(mode="after")
    def _order(self):
        if self.r_min >= self.r_max:
            raise ValueError("r_min must be below r_max")
        return self


class QuantumZeroModeCfg(_Block):
    levels: List[Annotated[int, Field(ge=1)]] = [1, 2, 3]
    grid: GridCfg = GridCfg()
    residual_tol: Positive = 1e-6
    eigen_tol: Positive = 1e-5
    flow_eps: Fraction = 0.01


class QuantumCountCfg(_Block):
    cases: List[Tuple[Annotated[int, Field(ge=1)], int]] = [(1, 2), (2, 4)]
    grid: GridCfg = GridCfg()
    criterion: Literal["paper", "strict"] = "paper"
    tol: Optional[Positive] = None
    check_gauge: bool = True
    check_chirality: bool = True


class QuantumSpectrumCfg(_Block):
    m_values: List[int] = [-2, -1, 0, 1, 2]
    k: Annotated[int, Field(ge=1, le=200)] = 5
    grid: GridCfg = GridCfg()
    criterion: Literal["paper", "strict"] = "paper"


class OutputCfg(_Block):
    dir: str = "out"
    format: Literal["csv", "json", "both"] = "both"
    plot: bool = True


class RunConfig(_Block):
    """Validated run configuration."""

    alpha: Positive
    r_cal: Positive
    q: Finite = 0.0
    seed: Annotated[int, Field(ge=0)] = 0
    output: OutputCfg = OutputCfg()
    simulate: SimulateCfg = SimulateCfg()
    period: PeriodCfg = PeriodCfg()
    algebra_check: AlgebraCfg = AlgebraCfg()
    geometry: GeometryCfg = GeometryCfg()
    stability: StabilityCfg = StabilityCfg()
    hodograph: HodographCfg = HodographCfg()
    stereo: StereoCfg = StereoCfg()
    flux: FluxCfg = FluxCfg()
    sweep_q: SweepCfg = SweepCfg()
    quantum_zero_mode: QuantumZeroModeCfg = QuantumZeroModeCfg()
    quantum_count: QuantumCountCfg = QuantumCountCfg()
    quantum_spectrum: QuantumSpectrumCfg = QuantumSpectrumCfg()

    @property
    def params(self):
        return ModelParams(self.alpha, self.r_cal, self.q)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _format_errors(exc):
    out = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            out.append(f"{path}: unknown key")
        else:
            out.append(f"{path}: {err['msg']}")
    return out


def parse_config(text):
    """Parse and validate a JSON configuration document.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        With all validation errors, or the JSON syntax error with its line
        and column.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["<root>: configuration must be a JSON object"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
