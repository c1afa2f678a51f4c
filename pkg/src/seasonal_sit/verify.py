"""Invariant battery: structural properties checked over many model configurations.

Each check takes a :class:`VerifyContext` and returns a list of failure
messages (empty means pass). ``run_checks`` times them and packages the
results for the CLI and for the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate as _quad

from . import _kernel
from .analysis import (
    Case,
    basin_bound,
    check_persistence_condition,
    classify_regime,
    compute_integrals,
    g0_thresholds,
    p2_zero_closed_form,
)
from .battery import battery
from .config import build_model, load_recipe, recipe_names
from .errors import NotConverged, OutOfRange, SeasonalSITError
from .integrator import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    flow,
    flow_with_lloyd,
    integrate,
    integrate_with_lloyd,
    ultimate_bound,
)
from .model import ModelSpec, Variant, eval_dF, eval_rhs, mesh, packed
from .poincare import (
    FixedPointSet,
    Stability,
    find_fixed_points,
    inverse_derivatives_from_forward,
    inverse_eval,
    inverse_third_derivative,
    omega_limit,
    poincare_eval,
)


@dataclass
class VerifyContext:
    models: list[tuple[str, ModelSpec]]
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    seed: int = 0
    skipped: int = 0
    _fps: dict = field(default_factory=dict, repr=False)

    def skip(self):
        """Record an instance left out because it is too ill-conditioned to test."""
        self.skipped += 1

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def fixed_points(self, m: ModelSpec) -> FixedPointSet:
        key = (m, self.rtol, self.atol)
        if key not in self._fps:
            self._fps[key] = find_fixed_points(m, self.rtol, self.atol)
        return self._fps[key]

    def flow(self, m, w0, t1, t0=0.0):
        return flow(m, w0, t0, t1, self.rtol, self.atol)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    failures: tuple[str, ...]
    seconds: float
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "skipped": self.skipped,
            "failures": list(self.failures),
            "seconds": round(self.seconds, 3),
        }


CheckFn = Callable[[VerifyContext], list]
CHECKS: dict[str, tuple[str, CheckFn]] = {}


def check(name: str, description: str):
    def register(fn: CheckFn) -> CheckFn:
        CHECKS[name] = (description, fn)
        return fn

    return register


def _rel(a: float, b: float, floor: float = 0.0) -> float:
    return abs(a - b) / max(abs(b), floor, 1e-300)


def _guarded(label: str, failures: list, fn, *args):
    """Run ``fn``; package errors as failures instead of aborting the check."""
    try:
        return fn(*args)
    except SeasonalSITError as exc:
        failures.append(f"{label}: {type(exc).__name__}: {exc}")
        return None


def _sample_tw(ctx, m, salt, n=20, w_lo=0.01, w_hi=10.0):
    rng = ctx.rng(salt)
    ts = rng.uniform(0.0, m.period, n)
    ws = rng.uniform(w_lo, w_hi, n)
    return zip(ts, ws)


# -- right-hand side ----------------------------------------------------------


@check("rhs_origin", "F(t, 0) = 0 exactly")
def _rhs_origin(ctx):
    out = []
    for label, m in ctx.models:
        for t in np.linspace(0.0, m.period, 37):
            v = eval_rhs(m, t, 0.0)
            if v != 0.0:
                out.append(f"{label}: F({t:.6g}, 0) = {v!r}")
    return out


@check("d_concavity", "d3F/dw3 <= 0 everywhere, < 0 where the release is active")
def _d_concavity(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        for t, w in _sample_tw(ctx, m, 100 + i, 40, 0.0, 20.0):
            f3 = eval_dF(m, t, w, 3)
            on = m.schedule.is_on(t)
            strict = (
                m.variant is Variant.ALLEE
                or (m.variant is Variant.SATURATED_RELEASE and on)
                or (m.variant in (Variant.BASE, Variant.COMPETITION_SURVIVAL) and on and m.schedule.g0 > 0)
                or (m.variant is Variant.IMPERFECT_CI and on and m.schedule.g0 > 0 and m.s_h > 0)
            )
            if f3 > 0.0 or (strict and not f3 < 0.0):
                out.append(f"{label}: d3F({t:.6g}, {w:.6g}) = {f3!r} (strict={strict})")
    return out


@check("rhs_derivatives_fd", "closed-form dF/dw orders 1-3 match central differences (rel 1e-6)")
def _rhs_derivatives_fd(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        p = packed(m)
        for t, w in _sample_tw(ctx, m, 200 + i, 10):
            on = 1 if m.schedule.is_on(t) else 0

            def d(order, x):
                return _kernel.rhs(p.prm, p.coefs, t, t, on, x)[order]

            for order in (1, 2, 3):
                h = 1e-5 * max(1.0, w)
                fd = (d(order - 1, w + h) - d(order - 1, w - h)) / (2 * h)
                exact = d(order, w)
                scale = max(abs(exact), abs(d(order - 1, w)) / max(w, 1.0), 1e-8)
                if abs(fd - exact) > 1e-6 * scale:
                    out.append(f"{label}: order {order} at ({t:.4g}, {w:.4g}): {exact!r} vs fd {fd!r}")
    return out


@check("rhs_periodic", "F(t + T, w) = F(t, w) when n0 = 1")
def _rhs_periodic(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        if m.schedule.n0 != 1:
            continue
        for t, w in _sample_tw(ctx, m, 300 + i, 10):
            a, b = eval_rhs(m, t, w), eval_rhs(m, t + m.schedule.T, w)
            if abs(a - b) > 1e-12 * max(1.0, abs(a)):
                out.append(f"{label}: F({t:.6g}) = {a!r}, F(t+T) = {b!r}")
    return out


def _majorant_rate(m: ModelSpec):
    """``(rate, crowding)`` with ``F(t, w) <= w (rate(t) - crowding(t) w)``."""
    if m.variant is Variant.COMPETITION_SURVIVAL:
        return (lambda t: _a_at(m, t) - _mu_at(m, t)), (lambda t: 0.0)
    return (lambda t: _a_at(m, t)), (lambda t: _xi_at(m, t))


def _a_at(m, t):
    return _kernel.coef(m.a.packed(), t, t)


def _mu_at(m, t):
    return _kernel.coef(m.mu.packed(), t, t)


def _xi_at(m, t):
    return _kernel.coef(m.xi.packed(), t, t)


@check("rhs_domination", "F(t, w) <= w (a - xi w), strict on active release windows")
def _rhs_domination(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        rate, crowd = _majorant_rate(m)
        for t, w in _sample_tw(ctx, m, 400 + i, 20):
            f = eval_rhs(m, t, w)
            bound = w * (rate(t) - crowd(t) * w)
            strict = m.variant is Variant.BASE and m.schedule.is_on(t) and m.schedule.g0 > 0
            if f > bound + 1e-12 * abs(bound) or (strict and not f < bound):
                out.append(f"{label}: F({t:.4g}, {w:.4g}) = {f!r} vs majorant {bound!r}")
    return out


# -- integrator ---------------------------------------------------------------


def _majorant_solution(m: ModelSpec, w0: float, ts: np.ndarray) -> np.ndarray:
    """Solution of ``w' = w (r(t) - c(t) w)`` at increasing times ``ts``.

    ``z = 1/w`` solves the linear equation ``z' = -r z + c``; it is advanced
    segment by segment with quadrature, independently of the ODE solver.
    """
    rate, crowd = _majorant_rate(m)
    nodes, _, _ = mesh(m, 0.0, float(ts[-1]))
    knots = np.union1d(nodes, ts)

    def R(s0, s1):
        return _quad.quad(rate, s0, s1, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    z = 1.0 / w0
    values = {0.0: w0}
    for s0, s1 in zip(knots[:-1], knots[1:]):
        if s1 <= s0:
            continue
        decay = R(s0, s1)
        inner = _quad.quad(lambda s: crowd(s) * math.exp(-R(s, s1)), s0, s1, epsabs=1e-14, epsrel=1e-12)[0]
        z = math.exp(-decay) * z + inner
        values[float(s1)] = 1.0 / z
    return np.array([values[float(t)] for t in ts])


@check("comparison_lemma", "trajectories stay below the logistic majorant from the same start")
def _comparison_lemma(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        rng = ctx.rng(500 + i)
        w0 = float(rng.uniform(0.05, 2.0) * ultimate_bound(m))
        traj = _guarded(label, out, integrate, m, w0, 0.0, 2 * m.period, ctx.rtol, ctx.atol)
        if traj is None:
            continue
        # Sample about 40 points so the quadrature oracle stays cheap.
        idx = np.unique(np.linspace(0, len(traj.t) - 1, 40).astype(int))
        ts, ws = traj.t[idx], traj.w[idx]
        keep = ts > 0
        upper = _majorant_solution(m, w0, ts[keep])
        excess = ws[keep] - upper
        if np.any(excess > 1e-9 * np.maximum(1.0, upper)):
            k = int(np.argmax(excess))
            out.append(f"{label}: w({ts[keep][k]:.6g}) = {ws[keep][k]!r} exceeds majorant {upper[k]!r}")
    return out


@check("ultimate_bound", "after 50 periods every trajectory from w0 <= 100 Gamma lies below Gamma (1 + 1e-3)")
def _ultimate_bound(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        gamma = ultimate_bound(m)
        for w0 in (100.0 * gamma, float(ctx.rng(600 + i).uniform(0.0, 100.0)) * gamma):
            w = _guarded(label, out, ctx.flow, m, w0, 50 * m.period)
            if w is not None and w > gamma * (1 + 1e-3):
                out.append(f"{label}: w0={w0:.6g} ends at {w!r} > Gamma={gamma!r}")
    return out


@check("forward_backward", "integrating forward then back recovers w0 (rel 10 rtol)")
def _forward_backward(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        rng = ctx.rng(700 + i)
        w0 = float(rng.uniform(0.1, 1.0) * ultimate_bound(m))
        t1 = float(rng.uniform(0.2, 1.0) * m.period)
        # Shorten the span until the flow contracts by at most 10x: the backward
        # run amplifies the forward error by the inverse contraction factor.
        for _ in range(30):
            res = _guarded(label, out, _flow_and_a1, m, w0, t1, ctx)
            if res is None or math.exp(-res[1]) <= 10.0:
                break
            t1 *= 0.5
        if res is None:
            continue
        w1, a1 = res
        if math.exp(-a1) > 10.0:
            ctx.skip()
            continue
        back = _guarded(label, out, flow, m, w1, t1, 0.0, ctx.rtol, ctx.atol)
        amp = max(1.0, math.exp(-a1))
        if back is not None and _rel(back, w0) > 10 * ctx.rtol * amp:
            out.append(f"{label}: w0={w0!r} -> w({t1:.6g}) = {w1!r} -> {back!r}")
    return out


def _flow_and_a1(m, w0, t1, ctx):
    w1, acc = flow_with_lloyd(m, w0, t1, ctx.rtol, ctx.atol)
    return w1, acc.A1


def _fd_resolvable(ctx, value: float, slope: float, h: float) -> bool:
    """Whether a central difference of width ``h`` can resolve ``slope``.

    The integration error in each value is taken as ``10 rtol |value|``; it
    must stay 1e-5 below the slope times the step.
    """
    noise = 10.0 * ctx.rtol * abs(value) / h
    return noise <= 1e-5 * abs(slope)


@check("mesh_contract", "every iT and iT + T_bar in the span is a mesh node")
def _mesh_contract(ctx):
    out = []
    for label, m in ctx.models:
        traj = _guarded(label, out, integrate, m, 1.0, 0.0, m.period, ctx.rtol, ctx.atol)
        if traj is None:
            continue
        s = m.schedule
        for i in range(s.n0 + 1):
            for t in (i * s.T, i * s.T + s.T_bar):
                if t > m.period:
                    continue
                if np.min(np.abs(traj.t - t)) > 4 * np.finfo(float).eps * max(1.0, t):
                    out.append(f"{label}: switch {t!r} missing from samples")
    return out


@check("lloyd_slope_fd", "exp(A1) matches the central-difference slope of the flow (rel 1e-4)")
def _lloyd_slope_fd(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        w0 = float(ctx.rng(800 + i).uniform(0.05, 1.5) * ultimate_bound(m))
        h = 1e-3 * w0
        # Strongly contracting periods cannot be resolved by differencing P;
        # use the longest span (period / 16 steps) whose slope still can be.
        chosen = None
        for k in range(16, 0, -1):
            t1 = m.period * k / 16
            res = _guarded(label, out, _flow_and_a1, m, w0, t1, ctx)
            if res is None:
                break
            if _fd_resolvable(ctx, res[0], math.exp(res[1]), h):
                chosen = (t1, math.exp(res[1]))
                break
        if chosen is None:
            ctx.skip()
            continue
        t1, slope = chosen
        fd = (ctx.flow(m, w0 + h, t1) - ctx.flow(m, w0 - h, t1)) / (2 * h)
        if _rel(slope, fd) > 1e-4:
            out.append(f"{label}: exp(A1) = {slope!r}, fd = {fd!r} at w0={w0:.6g}, t1={t1:.6g}")
    return out


# -- period map ---------------------------------------------------------------


@check("monotone_map", "P(u) < P(v) for u < v")
def _monotone_map(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is None:
            continue
        ws = np.sort(ctx.rng(900 + i).uniform(0.0, fps.search_cap, 30))
        ps = np.array([ctx.flow(m, w, m.period) for w in ws])
        # Strongly contracting maps give ties at double precision; only a drop
        # beyond the integration error is a violation.
        slack = 100.0 * ctx.rtol * np.maximum(np.abs(ps[:-1]), np.abs(ps[1:]))
        bad = np.flatnonzero(np.diff(ps) < -slack)
        for k in bad[:3]:
            out.append(f"{label}: P({ws[k]:.8g}) = {ps[k]!r} > P({ws[k + 1]:.8g}) = {ps[k + 1]!r}")
    return out


@check("fixed_point_count", "at most three fixed points")
def _fixed_point_count(ctx):
    out = []
    for label, m in ctx.models:
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is not None and len(fps) > 3:
            out.append(f"{label}: {len(fps)} fixed points")
    return out


@check("inverse_d3_positive", "(P^-1)''' > 0 on 20 points of [0, 1.2 Delta] with active release")
def _inverse_d3_positive(ctx):
    out = []
    for label, m in ctx.models:
        if not m.effective_release:
            continue
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is None:
            continue
        top = 1.2 * fps.delta if fps.delta > 0 else 0.5 * ultimate_bound(m)
        for w in np.linspace(0.0, top, 20):
            try:
                d3 = inverse_third_derivative(m, w, ctx.rtol, ctx.atol)
            except OutOfRange:
                continue
            except SeasonalSITError as exc:
                out.append(f"{label}: {type(exc).__name__} at w={w:.6g}: {exc}")
                continue
            if not d3 > 0.0:
                out.append(f"{label}: (P^-1)'''({w:.6g}) = {d3!r}")
    return out


@check("inverse_chain_rule", "backward-run inverse derivatives match the inverse-function rule")
def _inverse_chain_rule(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        x = float(ctx.rng(950 + i).uniform(0.05, 1.0) * ultimate_bound(m))
        fwd = _guarded(label, out, poincare_eval, m, x, ctx.rtol, ctx.atol)
        if fwd is None:
            continue
        if fwd.dP < 1e-3:
            # The backward run would amplify errors by more than 1e3.
            ctx.skip()
            continue
        inv = _guarded(label, out, inverse_eval, m, fwd.P, ctx.rtol, ctx.atol)
        if inv is None:
            continue
        q = inverse_derivatives_from_forward(fwd)
        for k, (direct, algebra) in enumerate(zip((inv.dP, inv.d2P, inv.d3P), q), start=1):
            if abs(direct - algebra) > 1e-5 * q[0] * max(abs(algebra), abs(q[0]), 1e-6):
                out.append(f"{label}: order {k} at {fwd.P:.6g}: {direct!r} vs {algebra!r}")
    return out


@check("decreasing_above_delta", "P(w) < w at 10 points of (Delta, search_cap]")
def _decreasing_above_delta(ctx):
    out = []
    for label, m in ctx.models:
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is None:
            continue
        lo = fps.delta
        for w in np.linspace(lo, fps.search_cap, 11)[1:]:
            if w <= lo * (1 + 1e-6) + 1e-12:
                continue
            if not ctx.flow(m, w, m.period) < w:
                out.append(f"{label}: P({w:.6g}) >= w above Delta={lo:.6g}")
    return out


def _fd_tolerance(order: int) -> float:
    return {1: 1e-4, 2: 1e-3, 3: 1e-2}[order]


@check("lloyd_fd", "Lloyd P', P'', P''' match finite differences (rel 1e-4, 1e-3, 1e-2)")
def _lloyd_fd(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        x = float(ctx.rng(1000 + i).uniform(0.1, 1.0) * ultimate_bound(m))
        ev = _guarded(label, out, poincare_eval, m, x, ctx.rtol, ctx.atol)
        if ev is None:
            continue
        for order, exact in ((1, ev.dP), (2, ev.d2P), (3, ev.d3P)):
            # Difference the next-lower Lloyd derivative once: only one order of FD error.
            h = 1e-4 * max(1.0, x) if order > 1 else 1e-3 * x
            if order == 1:
                if not _fd_resolvable(ctx, ev.P, ev.dP, h):
                    ctx.skip()
                    continue
                fd = (ctx.flow(m, x + h, m.period) - ctx.flow(m, x - h, m.period)) / (2 * h)
            else:
                lo = poincare_eval(m, x - h, ctx.rtol, ctx.atol)
                hi = poincare_eval(m, x + h, ctx.rtol, ctx.atol)
                prev = {2: lambda e: e.dP, 3: lambda e: e.d2P}[order]
                fd = (prev(hi) - prev(lo)) / (2 * h)
            scale = max(abs(exact), 1e-3 * abs(ev.dP))
            if abs(fd - exact) > _fd_tolerance(order) * scale:
                out.append(f"{label}: order {order} at {x:.6g}: Lloyd {exact!r}, fd {fd!r}")
    return out


@check("stability_predicts_dynamics", "stable points attract and unstable points repel nearby orbits")
def _stability_predicts(ctx):
    out = []
    for label, m in ctx.models:
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is None:
            continue
        delta = 1e-6 * fps.search_cap
        for fp in fps.points:
            if fp.stability is Stability.DEGENERATE or abs(fp.multiplier - 1.0) < 1e-3:
                continue
            for start in (fp.w_star - delta, fp.w_star + delta):
                if start < 0:
                    continue
                d0 = abs(start - fp.w_star)
                x = start
                for _ in range(5):
                    x = ctx.flow(m, x, m.period)
                d5 = abs(x - fp.w_star)
                if fp.stability is Stability.STABLE and not d5 < d0:
                    out.append(f"{label}: stable {fp.w_star:.8g} does not attract from {start:.8g}")
                if fp.stability is Stability.UNSTABLE and not d5 > d0:
                    out.append(f"{label}: unstable {fp.w_star:.8g} does not repel from {start:.8g}")
            if fp.stability is Stability.STABLE and fp.multiplier < 0.9:
                lim = _guarded(label, out, omega_limit, m, fp.w_star + delta, 5000, 1e-10, ctx.rtol, ctx.atol)
                if lim is not None and abs(lim - fp.w_star) > 1e-6 * max(1.0, fp.w_star):
                    out.append(f"{label}: orbit from {fp.w_star + delta:.8g} converges to {lim!r}")
    return out


# -- analysis -----------------------------------------------------------------


@check("origin_multiplier", "exp(I1) equals P'(0) (rel 1e-8)")
def _origin_multiplier(ctx):
    out = []
    for label, m in ctx.models:
        i1 = compute_integrals(m).I1
        ev = _guarded(label, out, poincare_eval, m, 0.0, ctx.rtol, ctx.atol)
        if ev is not None and _rel(math.exp(i1), ev.dP) > 1e-8:
            out.append(f"{label}: exp(I1) = {math.exp(i1)!r}, P'(0) = {ev.dP!r}")
    return out


@check("p2_closed_form", "closed-form P''(0) agrees with Lloyd (rel 1e-5, base model)")
def _p2_closed_form(ctx):
    out = []
    for label, m in ctx.models:
        if m.variant is not Variant.BASE or not m.schedule.g0 > 0:
            continue
        closed = p2_zero_closed_form(m)
        ev = _guarded(label, out, poincare_eval, m, 0.0, ctx.rtol, ctx.atol)
        if ev is not None and abs(closed - ev.d2P) > 1e-5 * max(abs(closed), 1e-4):
            out.append(f"{label}: closed form {closed!r}, Lloyd {ev.d2P!r}")
    return out


def _limits_consistent(report, limits: dict[float, float]) -> Optional[str]:
    pos = report.fixed_points.positive
    case = report.case
    for w0, lim in limits.items():
        if case in (Case.GLOBAL_EXTINCTION, Case.EXTINCTION_BY_I2, Case.CRITICAL_EXTINCTION):
            if lim > 1e-6:
                return f"{case.value} but w0={w0:.6g} -> {lim!r}"
        elif case in (Case.GLOBAL_PERSISTENCE, Case.CRITICAL_PERSISTENCE):
            if abs(lim - pos[-1].w_star) > 1e-6 * max(1.0, pos[-1].w_star):
                return f"{case.value} but w0={w0:.6g} -> {lim!r} (expected {pos[-1].w_star!r})"
        elif case is Case.BISTABILITY:
            target = 0.0 if w0 < pos[0].w_star else pos[1].w_star
            if abs(lim - target) > 1e-6 * max(1.0, target):
                return f"BiStability but w0={w0:.6g} -> {lim!r} (expected {target!r})"
    return None


@check("regime_dynamics", "omega-limits of 5 random starts agree with the classified regime")
def _regime_dynamics(ctx):
    out = []
    for i, (label, m) in enumerate(ctx.models):
        try:
            report = classify_regime(m, ctx.rtol, ctx.atol, fixed_points=ctx.fixed_points(m))
        except SeasonalSITError as exc:
            out.append(f"{label}: {type(exc).__name__}: {exc}")
            continue
        if report.case is Case.SEMISTABLE:
            continue
        rng = ctx.rng(1100 + i)
        limits = {}
        for w0 in rng.uniform(0.0, report.fixed_points.search_cap, 5):
            # Starts within a hair of the unstable point are left out: their fate is ill-conditioned.
            if report.case is Case.BISTABILITY and abs(w0 - report.fixed_points.positive[0].w_star) < 1e-6:
                continue
            try:
                limits[float(w0)] = omega_limit(m, w0, 20000, 1e-10, ctx.rtol, ctx.atol)
            except NotConverged as exc:
                out.append(f"{label}: {exc}")
        msg = _limits_consistent(report, limits)
        if msg:
            out.append(f"{label}: {msg}")
    return out


@check("basin_bound_sound", "10 starts inside (0, basin_bound) all go extinct")
def _basin_bound_sound(ctx):
    out = []
    for label, m in ctx.models:
        bound = basin_bound(m)
        if bound is None:
            continue
        for w0 in np.linspace(0.0, bound, 12)[1:-1]:
            lim = _guarded(label, out, omega_limit, m, w0, 20000, 1e-10, ctx.rtol, ctx.atol)
            if lim is not None and lim > 1e-8:
                out.append(f"{label}: w0={w0:.6g} < bound {bound:.6g} but limit {lim!r}")
    return out


@check("threshold_regimes", "persistence just below g_lower, extinction by I2 just above g_upper")
def _threshold_regimes(ctx):
    out = []
    for label, m in ctx.models:
        if m.variant is not Variant.BASE:
            continue
        g_lo, g_hi = g0_thresholds(m)
        cases = []
        if g_lo is not None:
            cases.append((0.9 * g_lo, Case.GLOBAL_PERSISTENCE))
        if g_hi is not None:
            cases.append((1.1 * g_hi, Case.EXTINCTION_BY_I2))
        for g0, expected in cases:
            try:
                got = classify_regime(m.with_g0(g0), ctx.rtol, ctx.atol).case
            except SeasonalSITError as exc:
                out.append(f"{label}: g0={g0:.6g}: {type(exc).__name__}: {exc}")
                continue
            if got is not expected:
                out.append(f"{label}: g0={g0:.6g} gives {got.value}, expected {expected.value}")
    return out


@check("persistence_condition_bistable", "on bistable instances P(K) > K between the positive points")
def _persistence_condition(ctx):
    out = []
    for label, m in ctx.models:
        fps = _guarded(label, out, ctx.fixed_points, m)
        if fps is None or len(fps.positive) != 2:
            continue
        lo, hi = fps.positive[0].w_star, fps.positive[1].w_star
        mid = 0.5 * (lo + hi)
        if not ctx.flow(m, mid, m.period) > mid:
            out.append(f"{label}: P({mid:.6g}) <= K between {lo:.6g} and {hi:.6g}")
        for K in np.linspace(lo, hi, 9)[1:-1]:
            if check_persistence_condition(m, float(K)) and len(fps.positive) != 2:
                out.append(f"{label}: persistence condition at K={K:.6g} without two positive points")
    return out


# -- runner -------------------------------------------------------------------


def recipe_models() -> list[tuple[str, ModelSpec]]:
    return [(f"recipe:{name}", build_model(load_recipe(name))) for name in recipe_names()]


def default_models(n_random: int = 20, seed: int = 0) -> list[tuple[str, ModelSpec]]:
    rand = [(f"random:{seed}:{i}:{m.variant.value}", m) for i, m in enumerate(battery(n_random, seed))]
    return recipe_models() + rand


def run_checks(
    names: Optional[Iterable[str]] = None,
    models: Optional[list[tuple[str, ModelSpec]]] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    seed: int = 0,
    n_random: int = 20,
) -> list[CheckResult]:
    selected = list(CHECKS) if names is None else list(names)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks {unknown}; available: {sorted(CHECKS)}")
    ctx = VerifyContext(models if models is not None else default_models(n_random, seed), rtol, atol, seed)
    results = []
    for name in selected:
        start = time.perf_counter()
        ctx.skipped = 0
        try:
            failures = CHECKS[name][1](ctx)
        except SeasonalSITError as exc:
            failures = [f"aborted: {type(exc).__name__}: {exc}"]
        results.append(
            CheckResult(
                name,
                not failures,
                len(ctx.models),
                tuple(failures[:20]),
                time.perf_counter() - start,
                ctx.skipped,
            )
        )
    return results
