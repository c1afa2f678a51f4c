"""Stability integrals, origin and regime classification, basin bounds, g0 thresholds.

Everything linear in the coefficients (the stability integrals, the window
exponent of the basin bound, the g0 thresholds) is evaluated with the exact
antiderivatives of :class:`SeasonalFunction`, so the results are exact up to
rounding for every supported coefficient kind.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate as _quad

from . import _kernel
from .errors import Inconsistent, UnsupportedVariant
from .integrator import DEFAULT_ATOL, DEFAULT_RTOL, cell_bounds, flow
from .model import Kind, ModelSpec, SeasonalFunction, Variant, mesh, packed
from .poincare import (
    N_SCAN,
    TOL_MULT,
    FixedPointSet,
    Stability,
    find_fixed_points,
    poincare_eval,
)

EPS_CRIT = 1e-8
TOL_P2 = 1e-3
SCHEMA_VERSION = 1


class Origin(str, enum.Enum):
    UNSTABLE = "Unstable"
    STABLE = "Stable"
    CRITICAL = "Critical"


class Case(str, enum.Enum):
    GLOBAL_PERSISTENCE = "GlobalPersistence"
    GLOBAL_EXTINCTION = "GlobalExtinction"
    BISTABILITY = "BiStability"
    SEMISTABLE = "SemiStable"
    EXTINCTION_BY_I2 = "ExtinctionByI2"
    CRITICAL_PERSISTENCE = "CriticalPersistence"
    CRITICAL_EXTINCTION = "CriticalExtinction"


@dataclass(frozen=True)
class StabilityIntegrals:
    """``I1`` is always the period integral of ``dF/dw(t, 0)``, so ``exp(I1) = P'(0)``.

    For the Allee variant ``I2`` holds the single integral ``I`` that decides
    between extinction and bistability; ``I1 = -int mu`` there.
    """

    I1: float
    I2: float
    variant: Variant

    @property
    def I(self) -> float:
        if self.variant is not Variant.ALLEE:
            raise UnsupportedVariant("the single integral I is defined for the Allee variant only")
        return self.I2


# -- exact linear functionals -------------------------------------------------


def _total(f: SeasonalFunction, m: ModelSpec) -> float:
    return f.integral(0.0, m.period)


def _on_window(f: SeasonalFunction, m: ModelSpec) -> float:
    return math.fsum(f.integral(s, e) for s, e in m.schedule.windows(0.0, m.period))


def _off_window(f: SeasonalFunction, m: ModelSpec) -> float:
    return _total(f, m) - _on_window(f, m)


_RELEASE_DRIVEN = (Variant.BASE, Variant.COMPETITION_SURVIVAL, Variant.IMPERFECT_CI)


def compute_integrals(m: ModelSpec) -> StabilityIntegrals:
    """Variant-specific ``I1`` and ``I2`` over one full period ``n0*T``.

    With ``g0 = 0`` the release-driven variants reduce to the logistic
    equation on windows too, and ``I1`` becomes the full-period growth rate.
    """
    g0 = m.schedule.g0
    a_on, a_off, a_all = _on_window(m.a, m), _off_window(m.a, m), _total(m.a, m)
    mu = _total(m.mu, m)
    v = m.variant
    if g0 == 0.0 and v in _RELEASE_DRIVEN:
        # Without releases the window equation is the off-window one.
        half = 0.5 if v is Variant.IMPERFECT_CI else 1.0
        i1 = half * a_all - mu
        return StabilityIntegrals(float(i1), float(i1 + half * a_on), v)
    if v is Variant.BASE:
        release = -g0 * _on_window(m.xi, m)
        i1 = math.fsum([release, -mu, a_off])
        i2 = math.fsum([release, -mu, a_all])
    elif v is Variant.COMPETITION_SURVIVAL:
        i1 = a_off - mu
        i2 = a_all - mu
    elif v is Variant.IMPERFECT_CI:
        window = 0.5 * (1.0 - m.s_h) * a_on - g0 * _on_window(m.xi, m)
        i1 = math.fsum([window, 0.5 * a_off, -mu])
        i2 = math.fsum([window, 0.5 * a_all, -mu])
    elif v is Variant.SATURATED_RELEASE:
        window = a_on / (m.b + 1.0)
        i1 = math.fsum([a_off, window, -mu])
        i2 = math.fsum([a_all, window, -mu])
    else:
        i1 = -mu
        i2 = math.fsum([a_on / (m.alpha + 1.0), a_off, -mu])
    return StabilityIntegrals(float(i1), float(i2), v)


def origin_stability(m: ModelSpec, eps_crit: float = EPS_CRIT) -> Origin:
    """Sign of ``I1`` with a dead band of half-width ``eps_crit``."""
    i1 = compute_integrals(m).I1
    if i1 > eps_crit:
        return Origin.UNSTABLE
    if i1 < -eps_crit:
        return Origin.STABLE
    return Origin.CRITICAL


# -- second derivative of the period map at the origin ------------------------


def p2_zero_closed_form(m: ModelSpec) -> float:
    """``P''(0)`` for the base model from the linearisation at ``w = 0``.

    Along ``w = 0`` the first variation is ``exp(L(t))`` with
    ``L(t) = int_0^t dF/dw(s, 0) ds``, and

        P''(0) = exp(I1) * int_0^{n0 T} d2F/dw2(t, 0) exp(L(t)) dt,

    where ``d2F/dw2(t, 0) = 2 (a/g0 - xi)`` on release windows and
    ``-2 xi`` off them. ``L`` is evaluated exactly; the outer integral uses
    adaptive quadrature on each smooth segment.
    """
    if m.variant is not Variant.BASE:
        raise UnsupportedVariant(
            "closed-form P''(0) is available for the base model only; use poincare_eval(m, 0).d2P"
        )
    g0 = m.schedule.g0
    if not g0 > 0:
        raise UnsupportedVariant("closed-form P''(0) needs g0 > 0")
    nodes, on, _ = mesh(m, 0.0, m.period)

    # L at each node, then within a segment L(t) = L(node) + exact partial integral.
    def rate_integral(k: int, s: float, t: float) -> float:
        if on[k]:
            return -m.mu.integral(s, t) - g0 * m.xi.integral(s, t)
        return m.a.integral(s, t) - m.mu.integral(s, t)

    L_nodes = [0.0]
    for k in range(len(nodes) - 1):
        L_nodes.append(L_nodes[-1] + rate_integral(k, nodes[k], nodes[k + 1]))

    p = packed(m)
    pieces = []
    for k in range(len(nodes) - 1):
        s0, s1 = float(nodes[k]), float(nodes[k + 1])
        tmid = 0.5 * (s0 + s1)
        flag = int(on[k])

        def integrand(t, k=k, s0=s0, tmid=tmid, flag=flag):
            f2 = _kernel.rhs(p.prm, p.coefs, t, tmid, flag, 0.0)[2]
            return f2 * math.exp(L_nodes[k] + rate_integral(k, s0, t))

        val, _ = _quad.quad(integrand, s0, s1, epsabs=1e-13, epsrel=1e-12, limit=200)
        pieces.append(val)
    i1 = compute_integrals(m).I1
    return math.exp(i1) * math.fsum(pieces)


# -- pointwise conditions -----------------------------------------------------

_GRID_PER_SEGMENT = 512


def _has_cosine(m: ModelSpec) -> bool:
    return any(f.kind is Kind.COSINE for f in m.coefficients().values())


def check_persistence_condition(m: ModelSpec, K: float) -> bool:
    """True iff ``F(t, K) > 0`` for all ``t`` in one period.

    Exact for constant and piecewise-constant coefficients (``F`` is constant
    on each segment between switches and breakpoints); cosine coefficients
    add a fine grid inside every segment.
    """
    if not K > 0:
        raise ValueError(f"K must be > 0, got {K}")
    p = packed(m)
    nodes, on, _ = mesh(m, 0.0, m.period)
    n_inner = _GRID_PER_SEGMENT if _has_cosine(m) else 1
    for k in range(len(nodes) - 1):
        s0, s1 = float(nodes[k]), float(nodes[k + 1])
        tmid = 0.5 * (s0 + s1)
        for t in np.linspace(s0, s1, n_inner + 2):
            if _kernel.rhs(p.prm, p.coefs, float(t), tmid, int(on[k]), float(K))[0] <= 0.0:
                return False
    return True


def _window_cells(m: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cells covering ``[0, T_bar]`` that respect coefficient breakpoints."""
    nodes, _, _ = mesh(m, 0.0, m.schedule.T_bar)
    pieces = 4096 if _has_cosine(m) else 1
    e0, e1 = [], []
    for k in range(len(nodes) - 1):
        edges = np.linspace(nodes[k], nodes[k + 1], pieces + 1)
        e0.append(edges[:-1])
        e1.append(edges[1:])
    return np.concatenate(e0), np.concatenate(e1)


def _window_rate_positive(m: ModelSpec) -> bool:
    """The pointwise hypothesis of the basin bound, certified cell by cell."""
    e0, e1 = _window_cells(m)
    a_lo, _ = cell_bounds(m.a, e0, e1)
    _, mu_hi = cell_bounds(m.mu, e0, e1)
    v = m.variant
    if v is Variant.IMPERFECT_CI:
        _, xi_hi = cell_bounds(m.xi, e0, e1)
        lower = a_lo * (1.0 - 0.5 * m.s_h) - mu_hi - xi_hi * m.schedule.g0
    elif v is Variant.SATURATED_RELEASE:
        lower = a_lo * (1.0 + 1.0 / (m.b + 1.0)) - mu_hi
    else:
        lower = a_lo - mu_hi
    return bool(np.all(lower > 0.0))


def _window_exponent(m: ModelSpec) -> float:
    """``int_0^T_bar`` of the variant's window growth rate."""
    tb = m.schedule.T_bar
    a, mu = m.a.integral(0.0, tb), m.mu.integral(0.0, tb)
    v = m.variant
    if v is Variant.IMPERFECT_CI:
        return (1.0 - 0.5 * m.s_h) * a - mu - m.schedule.g0 * m.xi.integral(0.0, tb)
    if v is Variant.SATURATED_RELEASE:
        return a * (1.0 + 1.0 / (m.b + 1.0)) - mu
    if v is Variant.ALLEE:
        return a / (m.alpha + 1.0) - mu
    return a - mu


def basin_bound(m: ModelSpec) -> Optional[float]:
    """Explicit ``B`` such that every start in ``(0, B)`` goes extinct, or None.

    The bound is ``-I1 * c / (I2 * exp(E))`` with the variant's prefactor
    ``c`` (``g0``, ``2 g0``, ``1 + b`` or 1) and window exponent ``E``. It
    needs ``I1 < 0 < I2``, a positive window growth rate, and a single
    release period per coefficient period.
    """
    if m.schedule.n0 != 1:
        return None
    ints = compute_integrals(m)
    if not (ints.I1 < 0.0 and ints.I2 > 0.0):
        return None
    if not _window_rate_positive(m):
        return None
    g0 = m.schedule.g0
    prefactor = {
        Variant.BASE: g0,
        Variant.COMPETITION_SURVIVAL: g0,
        Variant.IMPERFECT_CI: 2.0 * g0,
        Variant.SATURATED_RELEASE: 1.0 + (m.b or 0.0),
        Variant.ALLEE: 1.0,
    }[m.variant]
    bound = -ints.I1 * prefactor / (ints.I2 * math.exp(_window_exponent(m)))
    return bound if bound > 0.0 else None


def g0_thresholds(m: ModelSpec) -> tuple[Optional[float], Optional[float]]:
    """``(g_lower, g_upper)``: the ``g0`` at which ``I1`` and ``I2`` vanish.

    Each is None when its numerator is not positive (the corresponding sign
    change never happens for ``g0 >= 0``). ``m.schedule.g0`` is ignored.
    """
    if m.variant is not Variant.BASE:
        raise UnsupportedVariant("g0 thresholds are linear in g0 only for the base model")
    xi_on = _on_window(m.xi, m)
    mu = _total(m.mu, m)
    lower_num = _off_window(m.a, m) - mu
    upper_num = _total(m.a, m) - mu
    g_lower = lower_num / xi_on if lower_num > 0 else None
    g_upper = upper_num / xi_on if upper_num > 0 else None
    return g_lower, g_upper


# -- regime classification ----------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    origin: Origin
    case: Case
    fixed_points: FixedPointSet
    integrals: StabilityIntegrals
    basin_bound: Optional[float] = None
    theorem_basis: tuple[str, ...] = ()
    thresholds: Optional[tuple[Optional[float], Optional[float]]] = None
    p2_origin: Optional[float] = None
    probes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "variant": self.integrals.variant.value,
            "I1": self.integrals.I1,
            "I2": self.integrals.I2,
            "origin": self.origin.value,
            "case": self.case.value,
            "fixed_points": [
                {"w_star": p.w_star, "multiplier": p.multiplier, "stability": p.stability.value}
                for p in self.fixed_points.points
            ],
            "search_cap": self.fixed_points.search_cap,
            "basin_bound": self.basin_bound,
            "theorem_basis": list(self.theorem_basis),
        }
        if self.thresholds is not None:
            out["thresholds"] = {"g_lower": self.thresholds[0], "g_upper": self.thresholds[1]}
        if self.p2_origin is not None:
            out["p2_origin"] = self.p2_origin
        if self.probes:
            out["probes"] = dict(self.probes)
        return out


# Citation tags per variant: (persistence, extinction by I2, dichotomy on the count).
_TAGS = {
    Variant.BASE: ("Thm3.2", "Lemma3.6", "Thm3.3"),
    Variant.COMPETITION_SURVIVAL: ("Thm4.1.i", "Thm4.1.ii", "Thm4.1.iii"),
    Variant.IMPERFECT_CI: ("Thm4.2.i", "Thm4.2.ii", "Thm4.2.iii"),
    Variant.SATURATED_RELEASE: ("Thm4.3.i", "Thm4.3.ii", "Thm4.3.iii"),
    Variant.ALLEE: (None, "Thm4.4.i", "Thm4.4.ii"),
}
_COUNT_SUFFIX = {Case.GLOBAL_EXTINCTION: ".i", Case.SEMISTABLE: ".ii", Case.BISTABILITY: ".iii"}


def _expect(cond: bool, message: str):
    if not cond:
        raise Inconsistent(message)


def _semistable_probes(m, w_star, rtol, atol, periods=200, rel=1e-3) -> dict:
    """Orbits just above ``w*`` decrease toward it; orbits just below drift away from it."""
    delta = rel * max(w_star, 1e-12)
    above = w_star + delta
    below = w_star - delta
    above_ok = below_ok = True
    for _ in range(periods):
        nxt = flow(m, above, 0.0, m.period, rtol, atol)
        above_ok = above_ok and w_star - 1e-9 * w_star <= nxt <= above
        above = nxt
        nxt = flow(m, below, 0.0, m.period, rtol, atol)
        below_ok = below_ok and nxt <= below
        below = nxt
    return {"above": "attracted" if above_ok else "not attracted",
            "below": "repelled" if below_ok else "not repelled"}


def classify_regime(
    m: ModelSpec,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    eps_crit: float = EPS_CRIT,
    tol_p2: float = TOL_P2,
    n_scan: int = N_SCAN,
    tol_mult: float = TOL_MULT,
    fixed_points: Optional[FixedPointSet] = None,
) -> RegimeReport:
    """Regime predicted by the stability integrals, cross-checked against the fixed points.

    ``fixed_points`` may be supplied when already computed for ``m``.
    Raises :class:`Inconsistent` when the numerically found fixed points
    contradict the predicted case.
    """
    ints = compute_integrals(m)
    fps = fixed_points
    if fps is None:
        fps = find_fixed_points(m, rtol, atol, n_scan=n_scan, tol_mult=tol_mult)
    pos = fps.positive
    n = len(pos)
    thresholds = g0_thresholds(m) if m.variant is Variant.BASE else None
    persist_tag, i2_tag, count_tag = _TAGS[m.variant]
    base = dict(fixed_points=fps, integrals=ints, thresholds=thresholds)

    if m.variant is Variant.ALLEE:
        origin = Origin.STABLE
        if ints.I2 <= 0.0:
            _expect(n == 0, f"I = {ints.I2:.6g} <= 0 but {n} positive fixed points")
            return RegimeReport(origin, Case.EXTINCTION_BY_I2, theorem_basis=(i2_tag,), **base)
        return _dispatch_count(m, origin, count_tag, base, rtol, atol, tol_mult)

    origin = origin_stability(m, eps_crit)
    if origin is Origin.UNSTABLE:
        _expect(n == 1, f"I1 = {ints.I1:.6g} > 0 but {n} positive fixed points")
        _expect(pos[0].stability is not Stability.UNSTABLE, "the positive fixed point is unstable")
        return RegimeReport(origin, Case.GLOBAL_PERSISTENCE, theorem_basis=(persist_tag,), **base)

    if origin is Origin.CRITICAL:
        if m.variant is Variant.BASE and m.schedule.g0 > 0:
            p2 = p2_zero_closed_form(m)
        else:
            p2 = poincare_eval(m, 0.0, rtol, atol).d2P
        if p2 > tol_p2:
            _expect(n == 1, f"critical origin with P''(0) > 0 but {n} positive fixed points")
            case, tag = Case.CRITICAL_PERSISTENCE, "Prop3.5.i"
        else:
            # A positive point within the integration noise of the origin is the origin itself.
            _expect(
                all(p.w_star < 1e-6 * fps.search_cap for p in pos),
                f"critical origin with P''(0) <= 0 but positive fixed points {[p.w_star for p in pos]}",
            )
            case, tag = Case.CRITICAL_EXTINCTION, "Prop3.5.ii"
        return RegimeReport(origin, case, theorem_basis=(tag,), p2_origin=p2, **base)

    if ints.I2 <= 0.0:
        _expect(n == 0, f"I2 = {ints.I2:.6g} <= 0 but {n} positive fixed points")
        return RegimeReport(origin, Case.EXTINCTION_BY_I2, theorem_basis=(i2_tag,), **base)
    return _dispatch_count(m, origin, count_tag, base, rtol, atol, tol_mult)


def _dispatch_count(m, origin, count_tag, base, rtol, atol, tol_mult) -> RegimeReport:
    fps: FixedPointSet = base["fixed_points"]
    pos = fps.positive
    n = len(pos)
    _expect(fps.points[0].stability is not Stability.UNSTABLE, "origin predicted stable but multiplier > 1")
    bound = basin_bound(m)
    probes: dict = {}
    if n == 0:
        case = Case.GLOBAL_EXTINCTION
    elif n == 1:
        _expect(
            pos[0].stability is Stability.DEGENERATE,
            f"single positive fixed point {pos[0].w_star:.10g} is not degenerate",
        )
        probes = _semistable_probes(m, pos[0].w_star, rtol, atol)
        _expect(
            probes == {"above": "attracted", "below": "repelled"},
            f"semi-stable probes disagree: {probes}",
        )
        case = Case.SEMISTABLE
    else:
        _expect(n == 2, f"{n} positive fixed points")
        _expect(
            pos[0].stability is not Stability.STABLE and pos[1].stability is not Stability.UNSTABLE,
            "bistable pair must be ordered unstable < stable",
        )
        case = Case.BISTABILITY
    if m.variant is Variant.ALLEE:
        tags = (count_tag,)
    else:
        tags = (count_tag + _COUNT_SUFFIX[case],)
    if case is Case.BISTABILITY and m.variant is Variant.BASE:
        tags += ("Cor3.4",)
    if bound is not None:
        tags += ("Prop3.8",) if m.variant is Variant.BASE else ()
    return RegimeReport(origin, case, basin_bound=bound, theorem_basis=tags, probes=probes, **base)


__all__ = [
    "Case",
    "EPS_CRIT",
    "Origin",
    "RegimeReport",
    "StabilityIntegrals",
    "basin_bound",
    "check_persistence_condition",
    "classify_regime",
    "compute_integrals",
    "g0_thresholds",
    "origin_stability",
    "p2_zero_closed_form",
]
