"""Sweeps over the release density g0, bifurcation type at the origin, averaged-model comparison."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    TOL_P2,
    RegimeReport,
    classify_regime,
    g0_thresholds,
    p2_zero_closed_form,
)
from .errors import Inconsistent, NotConverged
from .integrator import DEFAULT_ATOL, DEFAULT_RTOL
from .model import ModelSpec, Variant, averaged_model
from .poincare import FixedPointSet, Stability, find_fixed_points, omega_limit

SWEEP_SCAN = 400
FOLD_RESOLUTION = 1e-6
REFINE_FACTOR = 3


class BifurcationType(str, enum.Enum):
    BACKWARD = "Backward"
    TRANSCRITICAL = "Transcritical"
    NONE = "None"


@dataclass(frozen=True)
class BifurcationClass:
    kind: BifurcationType
    boundary: bool = False
    critical_g0: Optional[float] = None
    p2_origin: Optional[float] = None

    @property
    def label(self) -> str:
        return f"{self.kind.value}(boundary)" if self.boundary else self.kind.value


def classify_bifurcation(m_template: ModelSpec, tol: float = TOL_P2) -> BifurcationClass:
    """Sign of ``P''(0)`` at the critical ``g0`` where ``I1`` vanishes.

    ``|P''(0)| <= tol`` is reported as a transcritical bifurcation with the
    boundary flag set. Non-base variants, or base families whose origin
    never changes stability, give ``None``.
    """
    if m_template.variant is not Variant.BASE:
        return BifurcationClass(BifurcationType.NONE)
    g_lower, _ = g0_thresholds(m_template)
    if g_lower is None:
        return BifurcationClass(BifurcationType.NONE)
    p2 = p2_zero_closed_form(m_template.with_g0(g_lower))
    if p2 > tol:
        return BifurcationClass(BifurcationType.BACKWARD, False, g_lower, p2)
    return BifurcationClass(BifurcationType.TRANSCRITICAL, p2 >= -tol, g_lower, p2)


@dataclass(frozen=True)
class SweepPoint:
    g0: float
    fixed_points: FixedPointSet
    case: Optional[str]
    flagged: bool = False
    message: str = ""

    @property
    def n_positive(self) -> int:
        return len(self.fixed_points.positive)


@dataclass(frozen=True)
class BifurcationDiagram:
    grid: tuple[float, ...]
    points: tuple[SweepPoint, ...]
    branch_ids: tuple[tuple[int, ...], ...]
    critical_g0: Optional[float]
    bifurcation: BifurcationClass
    fold_g0: Optional[float] = None
    parameter_name: str = field(default="g0", init=False)

    @property
    def bifurcation_type(self) -> BifurcationType:
        return self.bifurcation.kind

    @property
    def branches(self) -> tuple[FixedPointSet, ...]:
        return tuple(p.fixed_points for p in self.points)

    def rows(self) -> list[tuple[float, float, float, str, int]]:
        """Long format: one row per fixed point, ``(g0, w_star, multiplier, stability, branch_id)``."""
        out = []
        for pt, ids in zip(self.points, self.branch_ids):
            for fp, bid in zip(pt.fixed_points.points, ids):
                out.append((pt.g0, fp.w_star, fp.multiplier, fp.stability.value, bid))
        return out

    def summary(self) -> dict:
        return {
            "parameter_name": self.parameter_name,
            "n_points": len(self.grid),
            "g0_min": self.grid[0],
            "g0_max": self.grid[-1],
            "critical_g0": self.critical_g0,
            "bifurcation_type": self.bifurcation.label,
            "p2_origin": self.bifurcation.p2_origin,
            "fold_g0": self.fold_g0,
            "flagged_g0": [p.g0 for p in self.points if p.flagged],
        }


def _solve_point(args) -> SweepPoint:
    m, g0, rtol, atol, n_scan = args
    mg = m.with_g0(g0)
    fps = find_fixed_points(mg, rtol, atol, n_scan=n_scan)
    try:
        report = classify_regime(mg, rtol, atol, fixed_points=fps)
    except Inconsistent as exc:
        return SweepPoint(float(g0), fps, None, True, str(exc))
    return SweepPoint(float(g0), fps, report.case.value)


def _solve_all(m, g0s, rtol, atol, n_scan, threads) -> list[SweepPoint]:
    jobs = [(m, float(g), rtol, atol, n_scan) for g in g0s]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_solve_point, jobs))
    return [_solve_point(j) for j in jobs]


def _refinement_cells(points: Sequence[SweepPoint], critical: Optional[float]) -> list[int]:
    """Indices ``i`` of cells ``[g_i, g_{i+1}]`` that deserve extra grid points."""
    cells = set()
    for i in range(len(points) - 1):
        lo, hi = points[i], points[i + 1]
        if lo.n_positive != hi.n_positive:
            cells.add(i)
        if critical is not None and lo.g0 <= critical <= hi.g0:
            cells.update(j for j in (i - 1, i, i + 1) if 0 <= j < len(points) - 1)
    return sorted(cells)


def _assign_branches(points: Sequence[SweepPoint]) -> list[tuple[int, ...]]:
    """Nearest-neighbour continuation; the origin is branch 0 everywhere."""
    next_id = 1
    active: list[tuple[int, float, Stability]] = []
    out = []
    for pt in points:
        ids = [0]
        new_active = []
        free = list(active)
        for fp in pt.fixed_points.positive:
            best = None
            for cand in free:
                compatible = (
                    cand[2] is fp.stability
                    or Stability.DEGENERATE in (cand[2], fp.stability)
                )
                if not compatible:
                    continue
                d = abs(cand[1] - fp.w_star)
                if best is None or d < best[0] or (d == best[0] and cand[1] < best[1][1]):
                    best = (d, cand)
            if best is None:
                bid = next_id
                next_id += 1
            else:
                bid = best[1][0]
                free.remove(best[1])
            ids.append(bid)
            new_active.append((bid, fp.w_star, fp.stability))
        active = new_active
        out.append(tuple(ids))
    return out


def _locate_fold(m, lo, hi, rtol, atol, n_scan) -> float:
    """Bisect on "has a positive fixed point" between ``lo`` (yes) and ``hi`` (no)."""
    while hi - lo > FOLD_RESOLUTION:
        mid = 0.5 * (lo + hi)
        if find_fixed_points(m.with_g0(mid), rtol, atol, n_scan=n_scan).positive:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sweep_g0(
    m_template: ModelSpec,
    g0_min: float,
    g0_max: float,
    n_points: int = 200,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_scan: int = SWEEP_SCAN,
    refine: bool = True,
    tol_p2: float = TOL_P2,
    threads: int = 1,
) -> BifurcationDiagram:
    """Fixed points and their stability on a uniform ``g0`` grid.

    Cells where the number of positive fixed points changes, and those next
    to the critical ``g0``, get ``REFINE_FACTOR - 1`` extra points each. For
    a backward bifurcation the fold (where the positive pair disappears) is
    bisected to ``FOLD_RESOLUTION``.
    """
    if not (0.0 <= g0_min < g0_max):
        raise ValueError(f"need 0 <= g0_min < g0_max, got {g0_min}, {g0_max}")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    critical = None
    if m_template.variant is Variant.BASE:
        critical = g0_thresholds(m_template)[0]
    bif = classify_bifurcation(m_template, tol_p2)

    grid = np.linspace(g0_min, g0_max, n_points)
    points = _solve_all(m_template, grid, rtol, atol, n_scan, threads)
    if refine:
        extra = []
        for i in _refinement_cells(points, critical):
            step = (points[i + 1].g0 - points[i].g0) / REFINE_FACTOR
            extra.extend(points[i].g0 + k * step for k in range(1, REFINE_FACTOR))
        points = sorted(points + _solve_all(m_template, extra, rtol, atol, n_scan, threads), key=lambda p: p.g0)

    fold = None
    if bif.kind is BifurcationType.BACKWARD:
        for lo, hi in zip(points[:-1], points[1:]):
            if lo.g0 >= bif.critical_g0 and lo.n_positive >= 2 and hi.n_positive == 0:
                fold = _locate_fold(m_template, lo.g0, hi.g0, rtol, atol, n_scan)
                break

    return BifurcationDiagram(
        grid=tuple(p.g0 for p in points),
        points=tuple(points),
        branch_ids=tuple(_assign_branches(points)),
        critical_g0=critical,
        bifurcation=bif,
        fold_g0=fold,
    )


# -- seasonal versus averaged -------------------------------------------------


@dataclass(frozen=True)
class ModelOutcome:
    regime: Optional[RegimeReport]
    limits: dict[float, Optional[float]]
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.to_dict() if self.regime is not None else None,
            "limits": [{"w0": w0, "limit": lim} for w0, lim in self.limits.items()],
            "error": self.error,
        }


@dataclass(frozen=True)
class AveragedComparison:
    seasonal: ModelOutcome
    averaged: ModelOutcome

    def to_dict(self) -> dict:
        return {"seasonal": self.seasonal.to_dict(), "averaged": self.averaged.to_dict()}


def _outcome(m, w0_list, horizon_periods, rtol, atol) -> ModelOutcome:
    error = ""
    try:
        regime = classify_regime(m, rtol, atol)
    except Inconsistent as exc:
        regime, error = None, str(exc)
    limits: dict[float, Optional[float]] = {}
    for w0 in w0_list:
        try:
            limits[float(w0)] = omega_limit(m, w0, max_periods=horizon_periods, rtol=rtol, atol=atol)
        except NotConverged as exc:
            limits[float(w0)] = None
            error = error or str(exc)
    return ModelOutcome(regime, limits, error)


def compare_averaged(
    m: ModelSpec,
    w0_list: Sequence[float],
    horizon_periods: int = 20000,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> AveragedComparison:
    """Regimes and omega-limits of ``m`` and of its coefficient-averaged counterpart."""
    return AveragedComparison(
        _outcome(m, w0_list, horizon_periods, rtol, atol),
        _outcome(averaged_model(m), w0_list, horizon_periods, rtol, atol),
    )


def persists(limit: Optional[float], tol: float = 1e-8) -> bool:
    return limit is not None and not math.isnan(limit) and limit > tol


__all__ = [
    "AveragedComparison",
    "BifurcationClass",
    "BifurcationDiagram",
    "BifurcationType",
    "ModelOutcome",
    "SweepPoint",
    "classify_bifurcation",
    "compare_averaged",
    "persists",
    "sweep_g0",
]
