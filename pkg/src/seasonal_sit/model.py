"""Seasonal coefficients, release schedules and the five model variants.

A model is ``w' = F(t, w)`` where ``F`` always carries a factor ``w`` (the
origin is an equilibrium) and switches between a release-window form and an
off-window form. The variants are:

``base``
    ``w (a w/(w+g) - mu - xi (w+g))``
``competition_survival``
    ``a w^2/(w+g) (1 - eta w^2/(w+g)) - mu w``
``imperfect_ci``
    ``w (a w/(2(w+2g)) + a(1-s_h) g/(w+2g) - mu - xi (w+g))``
``saturated_release``
    ``a w (w+1)/(w+1+b) - (mu + xi w) w`` on windows, logistic off-window
``allee``
    ``w (a~ w/(w+g~) - xi w - mu)`` with ``a~ = a/(1+alpha)``, ``g~ = 1/(1+alpha)``
    on windows and ``a~ = a``, ``g~ = 1`` off-window
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .errors import ModelError

_PERIOD_RTOL = 1e-12


class Variant(str, enum.Enum):
    BASE = "base"
    COMPETITION_SURVIVAL = "competition_survival"
    IMPERFECT_CI = "imperfect_ci"
    SATURATED_RELEASE = "saturated_release"
    ALLEE = "allee"


_VARIANT_CODE = {
    Variant.BASE: _kernel.BASE,
    Variant.COMPETITION_SURVIVAL: _kernel.COMPETITION_SURVIVAL,
    Variant.IMPERFECT_CI: _kernel.IMPERFECT_CI,
    Variant.SATURATED_RELEASE: _kernel.SATURATED_RELEASE,
    Variant.ALLEE: _kernel.ALLEE,
}

# extras each variant requires (everything else must be absent)
_EXTRAS = {
    Variant.BASE: frozenset(),
    Variant.COMPETITION_SURVIVAL: frozenset({"eta"}),
    Variant.IMPERFECT_CI: frozenset({"s_h"}),
    Variant.SATURATED_RELEASE: frozenset({"b"}),
    Variant.ALLEE: frozenset({"alpha"}),
}


class Kind(str, enum.Enum):
    CONSTANT = "constant"
    PIECEWISE = "piecewise"
    COSINE = "cosine"


@dataclass(frozen=True)
class SeasonalFunction:
    """A strictly positive periodic rate profile.

    Use the :meth:`constant`, :meth:`piecewise` and :meth:`cosine`
    constructors rather than the raw initializer. Piecewise segments are
    right-open: ``breakpoints[j] <= t mod base_period < breakpoints[j+1]``
    maps to ``values[j]``.
    """

    kind: Kind
    base_period: Optional[float] = None
    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    mean: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.CONSTANT:
            if not (math.isfinite(self.mean) and self.mean > 0):
                raise ModelError(f"constant rate must be finite and > 0, got {self.mean}")
            return
        if self.base_period is None or not self.base_period > 0 or not math.isfinite(self.base_period):
            raise ModelError(f"base_period must be a positive number, got {self.base_period}")
        if self.kind is Kind.PIECEWISE:
            bps = tuple(float(b) for b in self.breakpoints)
            vals = tuple(float(v) for v in self.values)
            object.__setattr__(self, "breakpoints", bps)
            object.__setattr__(self, "values", vals)
            if len(bps) == 0 or len(bps) != len(vals):
                raise ModelError("piecewise profile needs as many breakpoints as values (at least one)")
            if bps[0] != 0.0:
                raise ModelError("first breakpoint must be 0")
            if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
                raise ModelError("breakpoints must be strictly increasing")
            if bps[-1] >= self.base_period:
                raise ModelError("breakpoints must lie in [0, base_period)")
            if min(vals) <= 0 or not all(math.isfinite(v) for v in vals):
                raise ModelError(f"piecewise values must be finite and > 0, got {vals}")
        else:
            if self.mean - abs(self.amplitude) <= 0:
                raise ModelError(
                    f"cosine profile must stay positive: mean {self.mean} <= |amplitude| {self.amplitude}"
                )

    @classmethod
    def constant(cls, value: float) -> "SeasonalFunction":
        return cls(Kind.CONSTANT, mean=float(value))

    @classmethod
    def piecewise(
        cls, base_period: float, breakpoints: Sequence[float], values: Sequence[float]
    ) -> "SeasonalFunction":
        return cls(
            Kind.PIECEWISE,
            base_period=float(base_period),
            breakpoints=tuple(breakpoints),
            values=tuple(values),
        )

    @classmethod
    def cosine(
        cls, mean: float, amplitude: float, base_period: float, phase: float = 0.0
    ) -> "SeasonalFunction":
        """``mean + amplitude * cos(2 pi (t - phase) / base_period)``."""
        return cls(
            Kind.COSINE,
            base_period=float(base_period),
            mean=float(mean),
            amplitude=float(amplitude),
            phase=float(phase),
        )

    @property
    def is_constant(self) -> bool:
        return self.kind is Kind.CONSTANT

    def average(self) -> float:
        """Mean value over one base period."""
        if self.kind is Kind.CONSTANT or self.kind is Kind.COSINE:
            return self.mean
        return self._period_integral() / self.base_period

    def _period_integral(self) -> float:
        edges = self.breakpoints + (self.base_period,)
        return math.fsum(v * (e1 - e0) for v, e0, e1 in zip(self.values, edges, edges[1:]))

    def antiderivative(self, t: float) -> float:
        """``int_0^t f(s) ds`` in closed form."""
        if self.kind is Kind.CONSTANT:
            return self.mean * t
        P = self.base_period
        if self.kind is Kind.COSINE:
            return self.mean * t + self.amplitude * P / (2 * math.pi) * (
                math.sin(2 * math.pi * (t - self.phase) / P) - math.sin(-2 * math.pi * self.phase / P)
            )
        cycles = math.floor(t / P)
        x = t - cycles * P
        edges = self.breakpoints + (P,)
        partial = math.fsum(
            v * (min(e1, x) - e0) for v, e0, e1 in zip(self.values, edges, edges[1:]) if x > e0
        )
        return cycles * self._period_integral() + partial

    def integral(self, t0: float, t1: float) -> float:
        return self.antiderivative(t1) - self.antiderivative(t0)

    def breakpoints_in(self, lo: float, hi: float) -> list[float]:
        """Discontinuities of the profile strictly inside ``(lo, hi)``."""
        if self.kind is not Kind.PIECEWISE or len(self.breakpoints) == 0:
            return []
        P = self.base_period
        out = []
        k0 = math.floor(lo / P) - 1
        k1 = math.ceil(hi / P) + 1
        for k in range(k0, k1 + 1):
            for b in self.breakpoints:
                t = k * P + b
                if lo < t < hi:
                    out.append(t)
        return out

    def lipschitz(self) -> float:
        if self.kind is Kind.COSINE:
            return abs(self.amplitude) * 2 * math.pi / self.base_period
        return 0.0

    def packed(self) -> np.ndarray:
        return _pack(self)


@lru_cache(maxsize=512)
def _pack(f: SeasonalFunction) -> np.ndarray:
    n = len(f.breakpoints)
    arr = np.zeros(6 + 2 * n)
    if f.kind is Kind.CONSTANT:
        arr[0] = _kernel.KIND_CONSTANT
        arr[1] = 1.0
    elif f.kind is Kind.COSINE:
        arr[0] = _kernel.KIND_COSINE
        arr[1] = f.base_period
    else:
        arr[0] = _kernel.KIND_PIECEWISE
        arr[1] = f.base_period
        arr[5] = n
        arr[6 : 6 + n] = f.breakpoints
        arr[6 + n :] = f.values
    arr[2] = f.mean
    arr[3] = f.amplitude
    arr[4] = f.phase
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ReleaseSchedule:
    """Piecewise-constant sterile release: ``g0`` on ``[iT, iT+T_bar)``, 0 otherwise.

    ``n0`` is the number of release periods in one coefficient period, so the
    Poincare map advances time by ``period = n0 * T``.
    """

    g0: float
    T_bar: float
    T: float
    n0: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.g0) and self.g0 >= 0):
            raise ModelError(f"g0 must be finite and >= 0, got {self.g0}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ModelError(f"T must be > 0, got {self.T}")
        if not (0 < self.T_bar < self.T):
            raise ModelError(f"need 0 < T_bar < T, got T_bar={self.T_bar}, T={self.T}")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ModelError(f"n0 must be a positive integer, got {self.n0}")
        object.__setattr__(self, "n0", int(self.n0))

    @property
    def period(self) -> float:
        return self.n0 * self.T

    def is_on(self, t: float) -> bool:
        x = t - math.floor(t / self.T) * self.T
        return x < self.T_bar

    def windows(self, lo: float, hi: float) -> list[tuple[float, float]]:
        """Release windows clipped to ``[lo, hi]``."""
        out = []
        for i in range(math.floor(lo / self.T) - 1, math.ceil(hi / self.T) + 1):
            s, e = max(lo, i * self.T), min(hi, i * self.T + self.T_bar)
            if e > s:
                out.append((s, e))
        return out

    def switch_times(self, lo: float, hi: float) -> list[float]:
        """Switch instants ``iT`` and ``iT + T_bar`` strictly inside ``(lo, hi)``."""
        out = []
        for i in range(math.floor(lo / self.T) - 1, math.ceil(hi / self.T) + 2):
            for t in (i * self.T, i * self.T + self.T_bar):
                if lo < t < hi:
                    out.append(t)
        return sorted(out)


@dataclass(frozen=True)
class ModelSpec:
    """Variant tag plus coefficients.

    ``xi`` is absent for ``competition_survival`` (that model has no
    density-dependent mortality term) and required otherwise.
    """

    variant: Variant
    a: SeasonalFunction
    mu: SeasonalFunction
    xi: Optional[SeasonalFunction]
    schedule: ReleaseSchedule
    eta: Optional[SeasonalFunction] = None
    s_h: Optional[float] = None
    b: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        need = _EXTRAS[self.variant]
        present = {k for k in ("eta", "s_h", "b", "alpha") if getattr(self, k) is not None}
        if present != need:
            missing = sorted(need - present)
            extra = sorted(present - need)
            raise ModelError(
                f"variant {self.variant.value!r}: missing extras {missing}, unexpected extras {extra}"
            )
        if self.variant is Variant.COMPETITION_SURVIVAL:
            if self.xi is not None:
                raise ModelError("competition_survival has no xi coefficient")
        elif self.xi is None:
            raise ModelError(f"variant {self.variant.value!r} requires xi")
        if self.s_h is not None and not (0.0 <= self.s_h <= 1.0):
            raise ModelError(f"s_h must lie in [0, 1], got {self.s_h}")
        if self.b is not None and not (math.isfinite(self.b) and self.b > 0):
            raise ModelError(f"b must be > 0, got {self.b}")
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ModelError(f"alpha must be > 0, got {self.alpha}")
        period = self.schedule.period
        for name, f in self.coefficients().items():
            if f.kind is Kind.CONSTANT:
                continue
            ratio = period / f.base_period
            if abs(ratio - round(ratio)) > _PERIOD_RTOL * max(1.0, ratio) or round(ratio) < 1:
                raise ModelError(
                    f"base_period {f.base_period} of {name} does not divide the period n0*T = {period}"
                )

    def coefficients(self) -> dict[str, SeasonalFunction]:
        out = {"a": self.a, "mu": self.mu}
        if self.xi is not None:
            out["xi"] = self.xi
        if self.eta is not None:
            out["eta"] = self.eta
        return out

    @property
    def period(self) -> float:
        return self.schedule.period

    def with_g0(self, g0: float) -> "ModelSpec":
        return replace(self, schedule=replace(self.schedule, g0=float(g0)))

    @property
    def effective_release(self) -> bool:
        """True when some release window produces a strictly d-concave vector field."""
        if self.variant is Variant.ALLEE or self.variant is Variant.SATURATED_RELEASE:
            return True
        if self.variant is Variant.IMPERFECT_CI:
            return self.schedule.g0 > 0 and self.s_h > 0
        return self.schedule.g0 > 0


@dataclass(frozen=True)
class _Packed:
    prm: np.ndarray
    coefs: np.ndarray
    breakpoint_sources: tuple[SeasonalFunction, ...] = field(default=())


@lru_cache(maxsize=2048)
def packed(m: ModelSpec) -> _Packed:
    """Flat arrays consumed by the compiled kernel."""
    funcs = [m.a, m.mu, m.xi or SeasonalFunction.constant(1.0), m.eta or SeasonalFunction.constant(1.0)]
    arrs = [f.packed() for f in funcs]
    width = max(len(x) for x in arrs)
    coefs = np.zeros((4, width))
    for i, x in enumerate(arrs):
        coefs[i, : len(x)] = x
    prm = np.array(
        [
            _VARIANT_CODE[m.variant],
            m.schedule.g0,
            m.schedule.T_bar,
            m.schedule.T,
            m.s_h if m.s_h is not None else 0.0,
            m.b if m.b is not None else 0.0,
            m.alpha if m.alpha is not None else 0.0,
        ]
    )
    prm.setflags(write=False)
    coefs.setflags(write=False)
    sources = tuple(f for f in funcs if f.kind is Kind.PIECEWISE)
    return _Packed(prm, coefs, sources)


def mesh(m: ModelSpec, t0: float, t1: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integration nodes from ``t0`` to ``t1`` (either direction).

    Returns ``(nodes, on_flags, is_switch)``: nodes include every switch
    instant and every coefficient breakpoint inside the span; ``on_flags[k]``
    tells whether segment ``k`` lies in a release window; ``is_switch`` marks
    nodes that are switch instants of the release schedule.
    """
    lo, hi = min(t0, t1), max(t0, t1)
    switches = m.schedule.switch_times(lo, hi)
    pts = {t: True for t in switches}
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    extra = []
    for f in packed(m).breakpoint_sources:
        extra.extend(f.breakpoints_in(lo, hi))
    sw = np.array(sorted(switches))
    for t in extra:
        if sw.size and np.min(np.abs(sw - t)) <= tol:
            continue
        pts.setdefault(t, False)
    inner = sorted(pts)
    # merge breakpoints that coincide with one another up to rounding
    merged: list[float] = []
    for t in inner:
        if merged and t - merged[-1] <= tol:
            if pts[t] and not pts[merged[-1]]:
                merged[-1] = t
            continue
        merged.append(t)
    merged = [t for t in merged if t - lo > tol and hi - t > tol]
    nodes = [lo] + merged + [hi]
    flags = [pts.get(t, False) for t in nodes]
    flags[0] = bool(m.schedule.switch_times(lo - tol, lo + tol))
    flags[-1] = bool(m.schedule.switch_times(hi - tol, hi + tol))
    if t1 < t0:
        nodes = nodes[::-1]
        flags = flags[::-1]
    nodes_arr = np.array(nodes, dtype=float)
    nodes_arr[0], nodes_arr[-1] = t0, t1
    mids = 0.5 * (nodes_arr[:-1] + nodes_arr[1:])
    on = np.array([1 if m.schedule.is_on(x) else 0 for x in mids], dtype=np.int64)
    return nodes_arr, on, np.array(flags, dtype=bool)


def eval_seasonal(f: SeasonalFunction, t: float) -> float:
    """Value of ``f`` at ``t`` (periodic, right-open piecewise segments)."""
    return float(_kernel.coef(f.packed(), float(t), float(t)))


def eval_g(s: ReleaseSchedule, t: float) -> float:
    """Release density at ``t``: ``g0`` on windows, 0 off-window."""
    return s.g0 if s.is_on(t) else 0.0


def _derivatives(m: ModelSpec, t: float, w: float) -> tuple[float, float, float, float]:
    if not w >= 0:
        raise ModelError(f"state must be >= 0, got {w}")
    p = packed(m)
    on = 1 if m.schedule.is_on(t) else 0
    return _kernel.rhs(p.prm, p.coefs, float(t), float(t), on, float(w))


def eval_rhs(m: ModelSpec, t: float, w: float) -> float:
    """``F(t, w)``; rejects ``w < 0``."""
    return _derivatives(m, t, w)[0]


def eval_dF(m: ModelSpec, t: float, w: float, order: int) -> float:
    """Closed-form ``d^order F / dw^order`` for ``order`` in 1..3."""
    if order not in (1, 2, 3):
        raise ModelError(f"order must be 1, 2 or 3, got {order}")
    return _derivatives(m, t, w)[order]


def averaged_model(m: ModelSpec) -> ModelSpec:
    """Replace every seasonal coefficient by its mean over one base period."""

    def avg(f):
        return None if f is None else SeasonalFunction.constant(f.average())

    return replace(m, a=avg(m.a), mu=avg(m.mu), xi=avg(m.xi), eta=avg(m.eta))
