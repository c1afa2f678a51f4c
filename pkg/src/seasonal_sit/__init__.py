"""Periodic switching ODE model of sterile-insect releases under seasonal coefficients."""

from __future__ import annotations

from .analysis import (
    Case,
    Origin,
    RegimeReport,
    StabilityIntegrals,
    basin_bound,
    check_persistence_condition,
    classify_regime,
    compute_integrals,
    g0_thresholds,
    origin_stability,
    p2_zero_closed_form,
)
from .bifurcation import (
    AveragedComparison,
    BifurcationDiagram,
    BifurcationType,
    classify_bifurcation,
    compare_averaged,
    sweep_g0,
)
from .errors import (
    BackwardBlowup,
    ConfigError,
    Inconsistent,
    IntegrationError,
    ModelError,
    NotConverged,
    OutOfRange,
    SeasonalSITError,
    SuspectCount,
    ToleranceFailure,
    UnsupportedVariant,
)
from .integrator import (
    LloydAccumulators,
    Trajectory,
    flow,
    flow_with_lloyd,
    integrate,
    integrate_with_lloyd,
    ultimate_bound,
)
from .model import (
    ModelSpec,
    ReleaseSchedule,
    SeasonalFunction,
    Variant,
    averaged_model,
    eval_dF,
    eval_g,
    eval_rhs,
)
from .poincare import (
    FixedPoint,
    FixedPointSet,
    PoincareEvaluation,
    Stability,
    find_fixed_points,
    omega_limit,
    poincare_eval,
    poincare_inverse,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
