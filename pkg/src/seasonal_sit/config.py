"""Run configuration: a strict TOML schema and its conversion to model objects."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import tomlkit
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError, ModelError
from .model import ModelSpec, ReleaseSchedule, SeasonalFunction, Variant


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class ConstantSpec(_Strict):
    kind: Literal["constant"]
    value: float


class PiecewiseSpec(_Strict):
    kind: Literal["piecewise"]
    base_period: float
    breakpoints: list[float]
    values: list[float]


class CosineSpec(_Strict):
    kind: Literal["cosine"]
    mean: float
    amplitude: float
    base_period: float
    phase: float = 0.0


CoefficientSpec = Annotated[
    Union[ConstantSpec, PiecewiseSpec, CosineSpec], Field(discriminator="kind")
]


class ScheduleSection(_Strict):
    g0: float
    T_bar: float
    T: float
    n0: int = 1


class ModelSection(_Strict):
    variant: Literal["base", "competition_survival", "imperfect_ci", "saturated_release", "allee"]
    a: CoefficientSpec
    mu: CoefficientSpec
    xi: Optional[CoefficientSpec] = None
    eta: Optional[CoefficientSpec] = None
    s_h: Optional[float] = None
    b: Optional[float] = None
    alpha: Optional[float] = None
    schedule: ScheduleSection


class NumericsSection(_Strict):
    rtol: float = 1e-10
    atol: float = 1e-12
    eps_crit: float = 1e-8
    tol_p2: float = 1e-3
    tol_mult: float = 1e-6
    n_scan: int = 2000
    sweep_scan: int = 400
    attractor_tol: float = 1e-6


class SimulateSection(_Strict):
    w0: list[float] = [1.0]
    t_end: Optional[float] = None
    periods: int = 20
    averaged: bool = False


class PoincareSection(_Strict):
    w_min: float = 0.0
    w_max: Optional[float] = None
    n: int = 101


class SweepSection(_Strict):
    g0_min: float = 0.0
    g0_max: float
    n_points: int = 200
    refine: bool = True


class CompareSection(_Strict):
    w0: list[float] = [1.0]
    horizon_periods: int = 20000


class RunConfig(_Strict):
    model: ModelSection
    numerics: NumericsSection = NumericsSection()
    simulate: Optional[SimulateSection] = None
    poincare: Optional[PoincareSection] = None
    sweep: Optional[SweepSection] = None
    compare: Optional[CompareSection] = None


# -- parsing and serialization ------------------------------------------------


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"])
        lines.append(f"  {where}: {err['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    """Parse TOML text, validate the schema and the model it describes."""
    try:
        data = tomlkit.parse(text).unwrap()
    except Exception as exc:  # tomlkit raises several parse error types
        raise ConfigError(f"malformed TOML: {exc}") from exc
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    build_model(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    return tomlkit.dumps(cfg.model_dump(exclude_none=True))


def _seasonal(spec) -> Optional[SeasonalFunction]:
    if spec is None:
        return None
    if spec.kind == "constant":
        return SeasonalFunction.constant(spec.value)
    if spec.kind == "piecewise":
        return SeasonalFunction.piecewise(spec.base_period, spec.breakpoints, spec.values)
    return SeasonalFunction.cosine(spec.mean, spec.amplitude, spec.base_period, spec.phase)


def build_model(cfg: RunConfig) -> ModelSpec:
    """The :class:`ModelSpec` described by ``cfg.model``; model errors become ConfigError."""
    s = cfg.model
    try:
        return ModelSpec(
            Variant(s.variant),
            _seasonal(s.a),
            _seasonal(s.mu),
            _seasonal(s.xi),
            ReleaseSchedule(s.schedule.g0, s.schedule.T_bar, s.schedule.T, s.schedule.n0),
            eta=_seasonal(s.eta),
            s_h=s.s_h,
            b=s.b,
            alpha=s.alpha,
        )
    except ModelError as exc:
        raise ConfigError(f"invalid model: {exc}") from None


# -- built-in recipes ---------------------------------------------------------


def recipe_names() -> list[str]:
    root = resources.files("seasonal_sit") / "recipes"
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def recipe_text(name: str) -> str:
    path = resources.files("seasonal_sit") / "recipes" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown recipe {name!r}; available: {', '.join(recipe_names())}")
    return path.read_text(encoding="utf-8")


def load_recipe(name: str) -> RunConfig:
    return parse_config(recipe_text(name))
