"""Independent reference implementations used by the tests.

Right-hand sides are rebuilt symbolically with sympy from the model
formulas, and trajectories are recomputed with scipy's own DOP853 driver,
restarted at every switch instant and coefficient breakpoint.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from seasonal_sit.model import Kind, ModelSpec, SeasonalFunction, Variant

w, a, mu, xi, eta, g, s_h, b, alpha = sp.symbols("w a mu xi eta g s_h b alpha", real=True)


def symbolic_rhs(variant: Variant, on: bool) -> sp.Expr:
    """``F`` written out from the model definitions (g is the release density)."""
    gg = g if on else 0
    if variant is Variant.BASE:
        return w * (a * w / (w + gg) - mu - xi * (w + gg))
    if variant is Variant.COMPETITION_SURVIVAL:
        return a * w**2 / (w + gg) * (1 - eta * w**2 / (w + gg)) - mu * w
    if variant is Variant.IMPERFECT_CI:
        return w * (a * w / (2 * (w + 2 * gg)) + a * (1 - s_h) * gg / (w + 2 * gg) - mu - xi * (w + gg))
    if variant is Variant.SATURATED_RELEASE:
        if on:
            return a * w * (w + 1) / (w + 1 + b) - (mu + xi * w) * w
        return a * w - (mu + xi * w) * w
    # allee, rewritten with a~ and g~
    at = a / (1 + alpha) if on else a
    gt = 1 / (1 + alpha) if on else 1
    return w * (at * w / (w + gt) - xi * w - mu)


@lru_cache(maxsize=None)
def _lambdas(variant: Variant, on: bool):
    F = sp.simplify(symbolic_rhs(variant, on))
    args = (w, a, mu, xi, eta, g, s_h, b, alpha)
    return tuple(sp.lambdify(args, sp.diff(F, w, k), "math") for k in range(4))


def value(f: SeasonalFunction | None, t: float, tm: float | None = None) -> float:
    """Direct evaluation of a seasonal profile (no compiled kernel).

    Piecewise profiles are read at ``tm`` when given, so a segment endpoint
    sitting on a breakpoint still sees the segment's own value.
    """
    if f is None:
        return 1.0
    if f.kind is Kind.CONSTANT:
        return f.mean
    if f.kind is Kind.COSINE:
        return f.mean + f.amplitude * math.cos(2 * math.pi * (t - f.phase) / f.base_period)
    x = (t if tm is None else tm) % f.base_period
    out = f.values[0]
    for bp, v in zip(f.breakpoints, f.values):
        if x >= bp:
            out = v
    return out


def is_on(m: ModelSpec, t: float) -> bool:
    s = m.schedule
    return (t % s.T) < s.T_bar


_RELEASE_DRIVEN = (Variant.BASE, Variant.COMPETITION_SURVIVAL, Variant.IMPERFECT_CI)


def rhs(
    m: ModelSpec, t: float, state: float, order: int = 0, on: bool | None = None, tm: float | None = None
) -> float:
    on = is_on(m, t) if on is None else on
    if m.schedule.g0 == 0.0 and m.variant in _RELEASE_DRIVEN:
        on = False  # the window form's limit as g -> 0
    fn = _lambdas(m.variant, on)[order]
    return float(
        fn(
            state,
            value(m.a, t, tm),
            value(m.mu, t, tm),
            value(m.xi, t, tm),
            value(m.eta, t, tm),
            m.schedule.g0,
            m.s_h or 0.0,
            m.b or 0.0,
            m.alpha or 0.0,
        )
    )


def nodes(m: ModelSpec, t0: float, t1: float) -> list[float]:
    """Switch instants and coefficient breakpoints in ``[t0, t1]`` (forward)."""
    pts = {t0, t1}
    s = m.schedule
    k = 0
    while k * s.T <= t1:
        for t in (k * s.T, k * s.T + s.T_bar):
            if t0 < t < t1:
                pts.add(t)
        k += 1
    for f in m.coefficients().values():
        if f.kind is Kind.PIECEWISE:
            k = 0
            while k * f.base_period <= t1:
                for bp in f.breakpoints:
                    t = k * f.base_period + bp
                    if t0 < t < t1:
                        pts.add(t)
                k += 1
    return sorted(pts)


def reference_flow(m: ModelSpec, w0: float, t1: float | None = None, rtol: float = 1e-12) -> float:
    """``w(t1; 0, w0)`` with scipy's DOP853, restarted at every node."""
    t1 = m.period if t1 is None else t1
    pts = nodes(m, 0.0, t1)
    y = float(w0)
    for lo, hi in zip(pts[:-1], pts[1:]):
        on = is_on(m, 0.5 * (lo + hi))
        tm = 0.5 * (lo + hi)

        def f(t, y, on=on, tm=tm):
            return [rhs(m, t, max(y[0], 0.0), 0, on, tm)]

        sol = solve_ivp(f, (lo, hi), [y], method="DOP853", rtol=rtol, atol=1e-14)
        y = float(sol.y[0, -1])
    return y


def origin_exponent(m: ModelSpec) -> float:
    """``int_0^period dF/dw(t, 0) dt`` by adaptive quadrature per smooth segment."""
    pts = nodes(m, 0.0, m.period)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        tm = 0.5 * (lo + hi)
        on = is_on(m, tm)
        val, _ = quad(lambda t: rhs(m, t, 0.0, 1, on, tm), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total


def reference_fixed_points(m: ModelSpec, w_max: float, n: int = 400) -> list[float]:
    """Positive roots of ``P(w) - w`` by a scan plus brentq."""
    ws = np.linspace(w_max / n, w_max, n)
    hs = [reference_flow(m, x) - x for x in ws]
    roots = []
    for x0, x1, h0, h1 in zip(ws[:-1], ws[1:], hs[:-1], hs[1:]):
        if h0 == 0.0:
            roots.append(float(x0))
        elif h0 * h1 < 0:
            roots.append(brentq(lambda x: reference_flow(m, x) - x, x0, x1, xtol=1e-13))
    return roots
