from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import oracles
from seasonal_sit.battery import random_model
from seasonal_sit.errors import ModelError
from seasonal_sit.model import (
    ModelSpec,
    ReleaseSchedule,
    SeasonalFunction,
    Variant,
    averaged_model,
    eval_dF,
    eval_g,
    eval_rhs,
    eval_seasonal,
    mesh,
)

C = SeasonalFunction.constant


def _base(**kw):
    return ModelSpec(Variant.BASE, C(2.0), C(1.0), C(0.5), ReleaseSchedule(0.1, 0.75, 1.0), **kw)


# -- closed-form derivatives --------------------------------------------------


def test_competition_survival_third_derivative_matches_closed_form():
    F = oracles.symbolic_rhs(Variant.COMPETITION_SURVIVAL, on=True)
    w, a, g, eta = oracles.w, oracles.a, oracles.g, oracles.eta
    closed = -6 * a * g**2 * (g + w + 4 * eta * g * w) / (g + w) ** 5
    assert sp.simplify(sp.diff(F, w, 3) - closed) == 0


def test_imperfect_ci_third_derivative_matches_closed_form():
    F = oracles.symbolic_rhs(Variant.IMPERFECT_CI, on=True)
    w, a, g, s_h = oracles.w, oracles.a, oracles.g, oracles.s_h
    assert sp.simplify(sp.diff(F, w, 3) + 12 * a * g**2 * s_h / (2 * g + w) ** 4) == 0


def test_saturated_release_third_derivative_matches_closed_form():
    F = oracles.symbolic_rhs(Variant.SATURATED_RELEASE, on=True)
    w, a, b = oracles.w, oracles.a, oracles.b
    assert sp.simplify(sp.diff(F, w, 3) + 6 * a * b * (b + 1) / (b + w + 1) ** 4) == 0


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    variant=st.sampled_from(list(Variant)),
    frac=st.floats(0.0, 1.0),
    state=st.floats(0.0, 20.0),
)
def test_kernel_rhs_and_derivatives_match_symbolic(seed, variant, frac, state):
    m = random_model(np.random.default_rng(seed), variant)
    t = frac * m.period
    if any(abs(t - x) < 1e-9 for x in oracles.nodes(m, -1.0, m.period + 1.0)):
        return  # avoid evaluating exactly on a switch
    for order in range(4):
        ref = oracles.rhs(m, t, state, order)
        got = eval_rhs(m, t, state) if order == 0 else eval_dF(m, t, state, order)
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), variant=st.sampled_from(list(Variant)), frac=st.floats(0.0, 1.0))
def test_origin_is_equilibrium_and_d_concave(seed, variant, frac):
    m = random_model(np.random.default_rng(seed), variant)
    t = frac * m.period
    assert eval_rhs(m, t, 0.0) == 0.0
    for state in (0.0, 0.1, 1.0, 10.0):
        assert eval_dF(m, t, state, 3) <= 0.0


def test_negative_state_rejected():
    with pytest.raises(ModelError):
        eval_rhs(_base(), 0.1, -1e-3)


def test_derivative_order_validated():
    with pytest.raises(ModelError):
        eval_dF(_base(), 0.1, 1.0, 4)


# -- seasonal profiles --------------------------------------------------------


def test_piecewise_segments_are_right_open():
    f = SeasonalFunction.piecewise(1.0, [0.0, 0.5], [4.0, 1.0])
    assert eval_seasonal(f, 0.0) == 4.0
    assert eval_seasonal(f, 0.4999) == 4.0
    assert eval_seasonal(f, 0.5) == 1.0
    assert eval_seasonal(f, 1.25) == 4.0
    assert f.average() == pytest.approx(2.5)


def test_cosine_profile_values_and_mean():
    f = SeasonalFunction.cosine(2.0, 0.5, 4.0, phase=1.0)
    assert eval_seasonal(f, 1.0) == pytest.approx(2.5)
    assert eval_seasonal(f, 3.0) == pytest.approx(1.5)
    assert f.average() == 2.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), t0=st.floats(0.0, 30.0), span=st.floats(0.0, 30.0))
def test_antiderivative_matches_quadrature(seed, t0, span):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    for f in m.coefficients().values():
        pts = [t0] + f.breakpoints_in(t0, t0 + span) + [t0 + span]
        ref = sum(quad(lambda t: oracles.value(f, t, 0.5 * (lo + hi)), lo, hi)[0] for lo, hi in zip(pts, pts[1:]))
        assert f.integral(t0, t0 + span) == pytest.approx(ref, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize(
    "make",
    [
        lambda: SeasonalFunction.constant(0.0),
        lambda: SeasonalFunction.constant(float("nan")),
        lambda: SeasonalFunction.piecewise(1.0, [0.1], [1.0]),
        lambda: SeasonalFunction.piecewise(1.0, [0.0, 0.5], [1.0]),
        lambda: SeasonalFunction.piecewise(1.0, [0.0, 0.5, 0.4], [1.0, 2.0, 3.0]),
        lambda: SeasonalFunction.piecewise(1.0, [0.0, 1.0], [1.0, 2.0]),
        lambda: SeasonalFunction.piecewise(1.0, [0.0], [-1.0]),
        lambda: SeasonalFunction.cosine(1.0, 1.0, 1.0),
        lambda: SeasonalFunction.cosine(2.0, 1.0, 0.0),
    ],
)
def test_invalid_profiles_rejected(make):
    with pytest.raises(ModelError):
        make()


# -- schedules and model validation -------------------------------------------


def test_release_schedule_windows_and_g():
    s = ReleaseSchedule(0.3, 2.0, 5.0)
    assert eval_g(s, 0.0) == 0.3
    assert eval_g(s, 1.999) == 0.3
    assert eval_g(s, 2.0) == 0.0
    assert eval_g(s, 5.0) == 0.3
    assert s.windows(0.0, 11.0) == [(0.0, 2.0), (5.0, 7.0), (10.0, 11.0)]
    assert s.switch_times(0.0, 10.0) == [2.0, 5.0, 7.0]


@pytest.mark.parametrize(
    "kw",
    [
        dict(g0=-0.1, T_bar=1.0, T=2.0),
        dict(g0=0.1, T_bar=2.0, T=2.0),
        dict(g0=0.1, T_bar=0.0, T=2.0),
        dict(g0=0.1, T_bar=1.0, T=2.0, n0=0),
        dict(g0=float("inf"), T_bar=1.0, T=2.0),
    ],
)
def test_invalid_schedules_rejected(kw):
    with pytest.raises(ModelError):
        ReleaseSchedule(**kw)


def test_variant_extras_enforced():
    sched = ReleaseSchedule(0.1, 0.5, 1.0)
    with pytest.raises(ModelError):
        ModelSpec(Variant.IMPERFECT_CI, C(2.0), C(1.0), C(0.5), sched)
    with pytest.raises(ModelError):
        ModelSpec(Variant.BASE, C(2.0), C(1.0), C(0.5), sched, b=1.0)
    with pytest.raises(ModelError):
        ModelSpec(Variant.COMPETITION_SURVIVAL, C(2.0), C(1.0), C(0.5), sched, eta=C(1.0))
    with pytest.raises(ModelError):
        ModelSpec(Variant.IMPERFECT_CI, C(2.0), C(1.0), C(0.5), sched, s_h=1.5)
    with pytest.raises(ModelError):
        ModelSpec(Variant.ALLEE, C(2.0), C(1.0), C(0.5), sched, alpha=-1.0)
    ModelSpec(Variant.COMPETITION_SURVIVAL, C(2.0), C(1.0), None, sched, eta=C(1.0))


def test_base_period_must_divide_the_period():
    sched = ReleaseSchedule(0.1, 1.0, 3.0)
    with pytest.raises(ModelError):
        ModelSpec(Variant.BASE, SeasonalFunction.piecewise(2.0, [0.0, 1.0], [1.0, 2.0]), C(1.0), C(1.0), sched)
    ModelSpec(Variant.BASE, SeasonalFunction.piecewise(1.5, [0.0, 1.0], [1.0, 2.0]), C(1.0), C(1.0), sched)
    ModelSpec(
        Variant.BASE,
        SeasonalFunction.piecewise(6.0, [0.0, 1.0], [1.0, 2.0]),
        C(1.0),
        C(1.0),
        ReleaseSchedule(0.1, 1.0, 3.0, n0=2),
    )


def test_mesh_contains_switches_and_breakpoints():
    m = ModelSpec(
        Variant.BASE,
        SeasonalFunction.piecewise(1.0, [0.0, 0.5], [4.0, 1.0]),
        C(1.0),
        C(1.0),
        ReleaseSchedule(0.5, 1.25, 3.0),
    )
    nodes, on, is_switch = mesh(m, 0.0, 3.0)
    expected = [0.0, 0.5, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0]
    np.testing.assert_allclose(nodes, expected)
    assert list(on) == [1, 1, 1, 0, 0, 0, 0]
    assert is_switch[list(nodes).index(1.25)]
    back, _, _ = mesh(m, 3.0, 0.0)
    np.testing.assert_allclose(back, expected[::-1])


def test_averaged_model_replaces_profiles_by_means():
    m = ModelSpec(
        Variant.COMPETITION_SURVIVAL,
        SeasonalFunction.piecewise(10.0, [0.0, 5.0], [4.0, 1.0]),
        C(2.0),
        None,
        ReleaseSchedule(0.03, 7.0, 10.0),
        eta=SeasonalFunction.piecewise(10.0, [0.0, 5.0], [1.0, 0.25]),
    )
    avg = averaged_model(m)
    assert avg.a == C(2.5) and avg.mu == C(2.0) and avg.eta == C(0.625) and avg.xi is None
    assert avg.schedule == m.schedule


def test_models_are_hashable_values():
    assert _base() == _base()
    assert hash(_base()) == hash(_base())
    assert _base().with_g0(0.2).schedule.g0 == 0.2
    assert math.isclose(_base().period, 1.0)
