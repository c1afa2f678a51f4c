"""Switch-aware initial value solver with Lloyd quadrature accumulators.

The right-hand side is smooth between release switches and coefficient
breakpoints, so the solver restarts on every such node; no step straddles a
discontinuity. Along with ``w`` it can carry

    A1 = int F_w dt,   A2 = int F_ww exp(A1) dt,   A3 = int F_www exp(2 A1) dt,

from which the first three derivatives of the period map follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernel
from .errors import BackwardBlowup, ToleranceFailure
from .model import Kind, ModelSpec, Variant, mesh, packed

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
BLOWUP_FACTOR = 1e6
MIN_STEP_FRACTION = 1e-14


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejected: int
    rtol: float
    atol: float


@dataclass(frozen=True)
class Trajectory:
    """Accepted-step samples of one solution.

    ``t`` is strictly increasing for forward runs and strictly decreasing for
    backward runs. Every switch instant in the span is a sample.
    """

    t0: float
    t: np.ndarray
    w: np.ndarray
    switch_times_hit: np.ndarray
    stats: IntegratorStats

    @property
    def terminal(self) -> float:
        return float(self.w[-1])

    def is_switch(self) -> np.ndarray:
        """Boolean mask over samples flagging switch instants."""
        if self.switch_times_hit.size == 0:
            return np.zeros(self.t.shape, dtype=bool)
        return np.isin(self.t, self.switch_times_hit)


@dataclass(frozen=True)
class LloydAccumulators:
    A1: float = 0.0
    A2: float = 0.0
    A3: float = 0.0


@dataclass(frozen=True)
class _Grid:
    nodes: np.ndarray
    on: np.ndarray
    switch_nodes: np.ndarray = field(repr=False)


@lru_cache(maxsize=4096)
def _grid(m: ModelSpec, t0: float, t1: float) -> _Grid:
    nodes, on, is_switch = mesh(m, t0, t1)
    nodes.setflags(write=False)
    on.setflags(write=False)
    return _Grid(nodes, on, nodes[is_switch])


def _blowup_guard(m: ModelSpec) -> float:
    return BLOWUP_FACTOR * ultimate_bound(m)


def _raise_for(status: int, t_reached: float, backward: bool, w: float):
    if status == _kernel.STATUS_OK:
        return
    if backward and status in (_kernel.STATUS_BLOWUP, _kernel.STATUS_UNDERFLOW):
        raise BackwardBlowup(t_reached)
    if status == _kernel.STATUS_UNDERFLOW:
        raise ToleranceFailure(f"step size underflow at t={t_reached:.6g}")
    if status == _kernel.STATUS_BLOWUP:
        raise ToleranceFailure(f"forward solution exceeded the blowup guard at t={t_reached:.6g}")
    raise ToleranceFailure(f"persistent step rejection at t={t_reached:.6g}")


def _run(m, w0, t0, t1, lloyd, rtol, atol, record):
    if not w0 >= 0:
        raise ValueError(f"initial value must be >= 0, got {w0}")
    if t1 == t0:
        raise ValueError("t1 must differ from t0")
    grid = _grid(m, float(t0), float(t1))
    p = packed(m)
    backward = t1 < t0
    wmax = _blowup_guard(m) if backward else math.inf
    if backward and w0 > wmax:
        raise BackwardBlowup(t0)
    h_min = MIN_STEP_FRACTION * abs(t1 - t0)
    y0 = np.zeros(4)
    y0[0] = w0
    cap = 64 + 64 * len(grid.nodes) if record else 0
    while True:
        out_t = np.empty(cap)
        out_w = np.empty(cap)
        status, t_reached, y, n_rec, n_steps, n_rej = _kernel.solve(
            p.prm, p.coefs, grid.nodes, grid.on, y0, lloyd, rtol, atol, wmax, h_min, record, out_t, out_w
        )
        if status != _kernel.STATUS_CAPACITY:
            break
        cap *= 4
    _raise_for(status, t_reached, backward, y[0])
    stats = IntegratorStats(int(n_steps), int(n_rej), rtol, atol)
    return y, out_t[:n_rec], out_w[:n_rec], grid, stats


def integrate(
    m: ModelSpec,
    w0: float,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Solve ``w' = F(t, w)``, ``w(t0) = w0`` up to ``t1`` (``t1 < t0`` runs backward).

    Raises :class:`BackwardBlowup` when a backward solution escapes
    ``1e6 * ultimate_bound(m)`` or the step size underflows, and
    :class:`ToleranceFailure` on persistent step rejection.
    """
    _, ts, ws, grid, stats = _run(m, float(w0), float(t0), float(t1), False, rtol, atol, True)
    return Trajectory(float(t0), ts, ws, grid.switch_nodes.copy(), stats)


def integrate_with_lloyd(
    m: ModelSpec, w0: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL
) -> tuple[Trajectory, LloydAccumulators]:
    """Integrate over one full period ``[0, n0*T]`` carrying the Lloyd accumulators."""
    y, ts, ws, grid, stats = _run(m, float(w0), 0.0, m.period, True, rtol, atol, True)
    traj = Trajectory(0.0, ts, ws, grid.switch_nodes.copy(), stats)
    return traj, LloydAccumulators(float(y[1]), float(y[2]), float(y[3]))


def flow(m: ModelSpec, w0: float, t0: float, t1: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> float:
    """Terminal value ``w(t1; t0, w0)`` without recording samples."""
    y, *_ = _run(m, float(w0), float(t0), float(t1), False, rtol, atol, False)
    return float(y[0])


def flow_with_lloyd(
    m: ModelSpec, w0: float, t1: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL
) -> tuple[float, LloydAccumulators]:
    """Terminal value and accumulators from ``t = 0`` to ``t1`` (either sign)."""
    y, *_ = _run(m, float(w0), 0.0, float(t1), True, rtol, atol, False)
    return float(y[0]), LloydAccumulators(float(y[1]), float(y[2]), float(y[3]))


def flow_batch(m: ModelSpec, w0s, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> np.ndarray:
    """``w(n0*T; w0)`` for an array of starting values (NaN where integration fails)."""
    grid = _grid(m, 0.0, m.period)
    p = packed(m)
    w0s = np.ascontiguousarray(w0s, dtype=float)
    h_min = MIN_STEP_FRACTION * m.period
    return _kernel.poincare_batch(p.prm, p.coefs, grid.nodes, grid.on, w0s, rtol, atol, math.inf, h_min)


# -- ultimate bound -----------------------------------------------------------

_CELLS_PER_PERIOD = 4096


def cell_bounds(f, e0: np.ndarray, e1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Certified lower/upper bounds of ``f`` on each cell ``[e0, e1]``."""
    if f.kind is Kind.CONSTANT:
        v = np.full(e0.shape, f.mean)
        return v, v
    if f.kind is Kind.PIECEWISE:
        mids = 0.5 * (e0 + e1)
        pk = f.packed()
        v = np.array([_kernel.coef(pk, x, x) for x in mids])
        return v, v
    pk = f.packed()
    v0 = np.array([_kernel.coef(pk, x, x) for x in e0])
    v1 = np.array([_kernel.coef(pk, x, x) for x in e1])
    slack = 0.5 * f.lipschitz() * (e1 - e0)
    centre = 0.5 * (v0 + v1)
    floor = f.mean - abs(f.amplitude)
    ceil = f.mean + abs(f.amplitude)
    return np.maximum(centre - slack, floor), np.minimum(centre + slack, ceil)


@lru_cache(maxsize=1024)
def ultimate_bound(m: ModelSpec) -> float:
    """A level ``Gamma`` with ``F(t, w) < 0`` for every ``w > Gamma`` and every ``t``.

    Base, saturated-release and Allee variants use ``max a/xi`` (the
    births never exceed ``a w``); imperfect CI uses ``max a/(2 xi)``;
    competition-survival uses ``max g + 1/eta`` (beyond it the survival
    factor is negative).
    """
    nodes, on, _ = mesh(m, 0.0, m.period)
    smooth = any(f.kind is Kind.COSINE for f in m.coefficients().values())
    e0_list, e1_list, on_list = [], [], []
    for k in range(len(nodes) - 1):
        pieces = 1
        if smooth:
            pieces = max(1, math.ceil(_CELLS_PER_PERIOD * (nodes[k + 1] - nodes[k]) / m.period))
        edges = np.linspace(nodes[k], nodes[k + 1], pieces + 1)
        e0_list.append(edges[:-1])
        e1_list.append(edges[1:])
        on_list.append(np.full(pieces, on[k]))
    e0 = np.concatenate(e0_list)
    e1 = np.concatenate(e1_list)
    on_c = np.concatenate(on_list)

    _, a_hi = cell_bounds(m.a, e0, e1)
    if m.variant is Variant.COMPETITION_SURVIVAL:
        eta_lo, _ = cell_bounds(m.eta, e0, e1)
        g = np.where(on_c == 1, m.schedule.g0, 0.0)
        return float(np.max(g + 1.0 / eta_lo))
    xi_lo, _ = cell_bounds(m.xi, e0, e1)
    if m.variant is Variant.IMPERFECT_CI:
        return float(np.max(a_hi / (2.0 * xi_lo)))
    return float(np.max(a_hi / xi_lo))
