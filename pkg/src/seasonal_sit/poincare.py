"""Period map, its inverse and derivatives, and fixed-point enumeration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BackwardBlowup, NotConverged, OutOfRange, SuspectCount, ToleranceFailure
from .integrator import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    flow,
    flow_batch,
    flow_with_lloyd,
    ultimate_bound,
)
from .model import ModelSpec

N_SCAN = 2000
TOL_MULT = 1e-6
ROOT_REL = 1e-10
TOUCH_REL = 1e-8
CAP_FACTOR = 1.5
_ORIGIN_BAND = 1e3


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class PoincareEvaluation:
    w0: float
    P: float
    dP: float
    d2P: float
    d3P: float


@dataclass(frozen=True)
class FixedPoint:
    w_star: float
    multiplier: float
    stability: Stability


@dataclass(frozen=True)
class FixedPointSet:
    points: tuple[FixedPoint, ...]
    delta: float
    search_cap: float

    @property
    def positive(self) -> tuple[FixedPoint, ...]:
        return tuple(p for p in self.points if p.w_star > 0)

    def __len__(self):
        return len(self.points)


def _from_accumulators(w0, value, acc) -> PoincareEvaluation:
    d1 = math.exp(acc.A1)
    d2 = d1 * acc.A2
    d3 = d1 * (1.5 * acc.A2**2 + acc.A3)
    return PoincareEvaluation(float(w0), value, d1, d2, d3)


def poincare_eval(
    m: ModelSpec, w0: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> PoincareEvaluation:
    """``P(w0)`` and ``P', P'', P'''`` from the Lloyd accumulators."""
    value, acc = flow_with_lloyd(m, w0, m.period, rtol, atol)
    return _from_accumulators(w0, value, acc)


def poincare_inverse(
    m: ModelSpec, w0: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> float:
    """``P^{-1}(w0) = w(-period; w0)``; raises :class:`OutOfRange` outside the range of ``P``."""
    try:
        return flow(m, w0, 0.0, -m.period, rtol, atol)
    except BackwardBlowup as exc:
        raise OutOfRange(f"{w0} is not in the range of the Poincare map") from exc


def inverse_eval(
    m: ModelSpec, w0: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> PoincareEvaluation:
    """Value and derivatives of ``P^{-1}`` at ``w0``.

    The time-reversed equation ``y' = -F(-s, y)`` is integrated over one
    period; its Lloyd accumulators are the oriented integrals along
    ``t = -s``, so running the solver from 0 to ``-period`` yields them
    directly.
    """
    try:
        value, acc = flow_with_lloyd(m, w0, -m.period, rtol, atol)
    except BackwardBlowup as exc:
        raise OutOfRange(f"{w0} is not in the range of the Poincare map") from exc
    return _from_accumulators(w0, value, acc)


def inverse_third_derivative(
    m: ModelSpec, w0: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> float:
    return inverse_eval(m, w0, rtol, atol).d3P


def inverse_derivatives_from_forward(ev: PoincareEvaluation) -> tuple[float, float, float]:
    """Derivatives of ``P^{-1}`` at ``P(x)`` from those of ``P`` at ``x`` (inverse-function rule)."""
    p1, p2, p3 = ev.dP, ev.d2P, ev.d3P
    return 1.0 / p1, -p2 / p1**3, (3.0 * p2 * p2 - p1 * p3) / p1**5


def _classify(multiplier: float, tol_mult: float) -> Stability:
    if multiplier < 1.0 - tol_mult:
        return Stability.STABLE
    if multiplier > 1.0 + tol_mult:
        return Stability.UNSTABLE
    return Stability.DEGENERATE


class _Displacement:
    """``h(w) = P(w) - w`` and its slope ``P'(w) - 1``."""

    def __init__(self, m, rtol, atol):
        self.m, self.rtol, self.atol = m, rtol, atol

    def __call__(self, w: float) -> float:
        return flow(self.m, w, 0.0, self.m.period, self.rtol, self.atol) - w

    def slope(self, w: float) -> float:
        return poincare_eval(self.m, w, self.rtol, self.atol).dP - 1.0


def _bisect(fn, lo, hi, flo, width):
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _origin_side_sign(m, rtol, atol, tol_mult) -> float:
    """Sign of ``h`` just to the right of the origin."""
    ev = poincare_eval(m, 0.0, rtol, atol)
    if abs(ev.dP - 1.0) > tol_mult:
        return math.copysign(1.0, ev.dP - 1.0)
    if ev.d2P != 0.0:
        return math.copysign(1.0, ev.d2P)
    return math.copysign(1.0, ev.d3P) if ev.d3P != 0.0 else 0.0


def find_fixed_points(
    m: ModelSpec,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_scan: int = N_SCAN,
    tol_mult: float = TOL_MULT,
) -> FixedPointSet:
    """All fixed points of ``P`` in ``[0, 1.5 * ultimate_bound]`` with stability tags.

    Sign changes of ``h = P - w`` on a uniform scan are refined by bisection;
    interior local extrema of ``h`` are refined through ``P' = 1`` to catch
    tangential roots (tagged ``Degenerate``) and root pairs hidden inside
    one scan cell.
    """
    h = _Displacement(m, rtol, atol)
    cap = CAP_FACTOR * ultimate_bound(m)
    for _ in range(4):
        if h(cap) < 0:
            break
        cap *= 2.0
    else:
        raise ToleranceFailure(f"P(w) - w is not negative at the search cap {cap}")
    tol_root = ROOT_REL * cap
    tol_touch = TOUCH_REL * cap

    ws = np.linspace(0.0, cap, n_scan)
    hs = flow_batch(m, ws, rtol, atol) - ws
    if not np.all(np.isfinite(hs)):
        raise ToleranceFailure("integration failed during the fixed-point scan")
    hs[0] = 0.0

    roots: list[tuple[float, bool]] = []  # (location, tangential)
    s0 = _origin_side_sign(m, rtol, atol, tol_mult)
    if hs[1] != 0.0 and s0 != 0.0 and math.copysign(1.0, hs[1]) != s0:
        right, left = ws[1], None
        x = ws[1]
        for _ in range(14):
            x *= 0.1
            hx = h(x)
            if hx != 0.0 and math.copysign(1.0, hx) == s0:
                left = x
                break
            right = x
        if left is not None:
            roots.append((_bisect(h, left, right, h(left), tol_root), False))

    for i in range(1, n_scan - 1):
        if hs[i] == 0.0:
            roots.append((ws[i], False))
        elif hs[i + 1] != 0.0 and (hs[i] > 0) != (hs[i + 1] > 0):
            roots.append((_bisect(h, ws[i], ws[i + 1], hs[i], tol_root), False))

    for i in range(1, n_scan - 1):
        left_d, right_d = hs[i - 1] - hs[i], hs[i + 1] - hs[i]
        if hs[i] > 0 and left_d > 0 and right_d > 0 and hs[i - 1] > 0 and hs[i + 1] > 0:
            pass
        elif hs[i] < 0 and left_d < 0 and right_d < 0 and hs[i - 1] < 0 and hs[i + 1] < 0:
            pass
        else:
            continue
        lo, hi = ws[i - 1], ws[i + 1]
        slo, shi = h.slope(lo), h.slope(hi)
        if slo == 0.0:
            x_ext = lo
        elif shi == 0.0 or (slo > 0) == (shi > 0):
            x_ext = ws[i]
        else:
            x_ext = _bisect(h.slope, lo, hi, slo, tol_root)
        h_ext = h(x_ext)
        if abs(h_ext) < tol_touch:
            roots.append((x_ext, True))
        elif (h_ext > 0) != (hs[i] > 0):
            roots.append((_bisect(h, lo, x_ext, hs[i - 1], tol_root), False))
            roots.append((_bisect(h, x_ext, hi, h_ext, tol_root), False))

    roots.sort()
    merged: list[tuple[float, bool]] = []
    for x, tangential in roots:
        if x <= 10 * tol_root:
            continue
        if merged and x - merged[-1][0] <= 10 * tol_root:
            merged[-1] = (merged[-1][0], merged[-1][1] or tangential)
            continue
        merged.append((x, tangential))

    origin = poincare_eval(m, 0.0, rtol, atol)
    points = [FixedPoint(0.0, origin.dP, _classify(origin.dP, tol_mult))]
    for x, tangential in merged:
        mult = poincare_eval(m, x, rtol, atol).dP
        tag = Stability.DEGENERATE if tangential else _classify(mult, tol_mult)
        points.append(FixedPoint(float(x), mult, tag))
    if len(points) > 3:
        raise SuspectCount(
            f"found {len(points)} fixed points: {[round(p.w_star, 12) for p in points]}"
        )
    return FixedPointSet(tuple(points), points[-1].w_star, cap)


def omega_limit(
    m: ModelSpec,
    w0: float,
    max_periods: int = 20000,
    tol: float = 1e-10,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Limit of ``P^n(w0)``.

    Iterates until successive iterates differ by less than ``tol`` while
    the differences are shrinking (so a start next to an unstable point is
    not mistaken for convergence). Orbits that keep decreasing below
    ``1e3 * tol`` are followed until they drop under ``tol`` and reported as 0.
    """
    if w0 == 0.0:
        return 0.0
    x = float(w0)
    prev_step = math.inf
    for _ in range(max_periods):
        nxt = flow(m, x, 0.0, m.period, rtol, atol)
        step = abs(nxt - x)
        shrinking = nxt < x
        x = nxt
        if x < tol and shrinking:
            return 0.0
        # Geometric decay to the origin also has small steps; keep going until x < tol.
        if step < tol and step <= prev_step and not (shrinking and x < _ORIGIN_BAND * tol):
            return x
        prev_step = step
    raise NotConverged(x, max_periods)
