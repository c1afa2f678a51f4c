from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from seasonal_sit.analysis import (
    Case,
    Origin,
    basin_bound,
    check_persistence_condition,
    classify_regime,
    compute_integrals,
    g0_thresholds,
    origin_stability,
    p2_zero_closed_form,
)
from seasonal_sit.battery import random_model
from seasonal_sit.errors import UnsupportedVariant
from seasonal_sit.model import ModelSpec, ReleaseSchedule, SeasonalFunction, Variant
from seasonal_sit.poincare import omega_limit, poincare_eval

C = SeasonalFunction.constant


def _worked(g0=0.1):
    return ModelSpec(Variant.BASE, C(2.0), C(1.0), C(0.5), ReleaseSchedule(g0, 0.75, 1.0))


# -- stability integrals ------------------------------------------------------


def test_worked_example_integrals_exact():
    ints = compute_integrals(_worked())
    # by hand: I1 = 0.75 (-1 - 0.5*0.1) + 0.25 (2 - 1), I2 = I1 + 0.75*2
    assert ints.I1 == pytest.approx(-0.5375, abs=1e-12)
    assert ints.I2 == pytest.approx(0.9625, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), variant=st.sampled_from(list(Variant)))
def test_i1_is_the_origin_exponent(seed, variant):
    m = random_model(np.random.default_rng(seed), variant)
    assert compute_integrals(m).I1 == pytest.approx(oracles.origin_exponent(m), rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), variant=st.sampled_from(list(Variant)))
def test_exp_i1_is_the_origin_multiplier(seed, variant):
    m = random_model(np.random.default_rng(seed), variant)
    i1 = compute_integrals(m).I1
    assert poincare_eval(m, 0.0).dP == pytest.approx(math.exp(i1), rel=1e-8)


def test_allee_integrals_by_hand():
    m = ModelSpec(Variant.ALLEE, C(3.0), C(0.5), C(1.0), ReleaseSchedule(0.0, 2.0, 5.0), alpha=2.0)
    ints = compute_integrals(m)
    assert ints.I1 == pytest.approx(-2.5)
    assert ints.I == ints.I2 == pytest.approx(2.0 * 3.0 / 3.0 + 3.0 * 3.0 - 2.5)
    with pytest.raises(UnsupportedVariant):
        _ = compute_integrals(_worked()).I


def test_variant_integrals_by_hand():
    sched = ReleaseSchedule(0.4, 2.0, 5.0)
    ci = ModelSpec(Variant.IMPERFECT_CI, C(3.0), C(0.5), C(1.0), sched, s_h=0.6)
    ints = compute_integrals(ci)
    assert ints.I1 == pytest.approx(2.0 * (1.5 * 0.4 - 0.4) + 1.5 * 3.0 - 2.5)
    assert ints.I2 == pytest.approx(2.0 * (1.5 * 0.4 - 0.4) + 1.5 * 5.0 - 2.5)
    sat = ModelSpec(Variant.SATURATED_RELEASE, C(3.0), C(0.5), C(1.0), sched, b=2.0)
    ints = compute_integrals(sat)
    assert ints.I1 == pytest.approx(9.0 + 2.0 - 2.5)
    assert ints.I2 == pytest.approx(15.0 + 2.0 - 2.5)
    cs = ModelSpec(Variant.COMPETITION_SURVIVAL, C(3.0), C(0.5), None, sched, eta=C(1.0))
    ints = compute_integrals(cs)
    assert (ints.I1, ints.I2) == (pytest.approx(6.5), pytest.approx(12.5))


def test_origin_stability_dead_band():
    assert origin_stability(_worked()) is Origin.STABLE
    assert origin_stability(_worked(0.0)) is Origin.UNSTABLE
    # constant coefficients at the critical g0 = 16/6.5
    m = ModelSpec(Variant.BASE, C(4.0), C(1.0), C(1.0), ReleaseSchedule(16.0 / 6.5, 6.5, 14.0))
    assert abs(compute_integrals(m).I1) < 1e-12
    assert origin_stability(m) is Origin.CRITICAL


# -- thresholds, basin bound, persistence condition ---------------------------


@pytest.mark.parametrize(
    "name, lower, upper",
    [("fig2a", 5.0 / 6.0, 5.0), ("fig2b", 2.0, 6.0), ("fig2c", 16.0 / 6.5, 42.0 / 6.5)],
)
def test_g0_thresholds(recipe_model, name, lower, upper):
    g_lower, g_upper = g0_thresholds(recipe_model(name))
    assert g_lower == pytest.approx(lower, rel=1e-12)
    assert g_upper == pytest.approx(upper, rel=1e-12)
    assert abs(compute_integrals(recipe_model(name).with_g0(g_lower)).I1) < 1e-12
    assert abs(compute_integrals(recipe_model(name).with_g0(g_upper)).I2) < 1e-12


def test_thresholds_need_positive_numerators():
    m = ModelSpec(Variant.BASE, C(1.0), C(2.0), C(1.0), ReleaseSchedule(0.1, 0.5, 1.0))
    assert g0_thresholds(m) == (None, None)
    with pytest.raises(UnsupportedVariant):
        g0_thresholds(random_model(np.random.default_rng(0), Variant.ALLEE))


def test_basin_bound_worked_example():
    # -I1 g0 / (I2 exp(int_0^Tbar (a - mu)))
    expected = 0.5375 * 0.1 / (0.9625 * math.exp(0.75))
    bound = basin_bound(_worked())
    assert bound == pytest.approx(expected, rel=1e-12)
    assert bound == pytest.approx(0.026380, abs=1e-5)
    for w0 in np.linspace(0.05, 0.95, 5) * bound:
        assert omega_limit(_worked(), float(w0)) == 0.0


def test_basin_bound_absent_outside_bistable_integral_signs():
    assert basin_bound(_worked(0.0)) is None  # I1 > 0
    assert basin_bound(_worked(10.0)) is None  # I2 < 0
    m = ModelSpec(Variant.BASE, C(2.0), C(1.0), C(0.5), ReleaseSchedule(0.1, 0.75, 1.0, n0=2))
    assert basin_bound(m) is None


def test_persistence_condition():
    assert check_persistence_condition(_worked(), 1.0)
    # F(t, 1) on the window: 1 * (2/1.1 - 1 - 0.5*1.1) > 0; at g0 = 2 it is negative
    assert not check_persistence_condition(_worked(2.0), 1.0)
    cosine = ModelSpec(
        Variant.BASE, SeasonalFunction.cosine(2.0, 1.5, 1.0), C(1.0), C(0.5), ReleaseSchedule(0.1, 0.75, 1.0)
    )
    # a dips to 0.5 < mu, so F(t, K) < 0 somewhere
    assert not check_persistence_condition(cosine, 1.0)


# -- P''(0) ---------------------------------------------------------------------


def _p2_constant(a, mu, xi, g0, tbar, T):
    """Hand integration of int F_ww(t, 0) exp(L(t)) dt for constant coefficients."""
    r1 = -mu - xi * g0
    r2 = a - mu
    c1 = 2 * a / g0 - 2 * xi
    c2 = -2 * xi
    win = (math.exp(r1 * tbar) - 1) / r1
    off = math.exp(r1 * tbar) * (math.exp(r2 * (T - tbar)) - 1) / r2
    i1 = r1 * tbar + r2 * (T - tbar)
    return math.exp(i1) * (c1 * win + c2 * off)


def test_p2_closed_form_matches_hand_integration():
    g = 16.0 / 6.5
    m = ModelSpec(Variant.BASE, C(4.0), C(1.0), C(1.0), ReleaseSchedule(g, 6.5, 14.0))
    expected = _p2_constant(4.0, 1.0, 1.0, g, 6.5, 14.0)
    assert expected == pytest.approx(-0.30556, abs=1e-5)
    assert p2_zero_closed_form(m) == pytest.approx(expected, rel=1e-10)
    assert poincare_eval(m, 0.0).d2P == pytest.approx(expected, rel=1e-7)


@pytest.mark.parametrize("g0", [0.05, 0.3, 1.0])
def test_p2_closed_form_off_criticality(g0):
    m = _worked(g0)
    expected = _p2_constant(2.0, 1.0, 0.5, g0, 0.75, 1.0)
    assert p2_zero_closed_form(m) == pytest.approx(expected, rel=1e-10)
    assert poincare_eval(m, 0.0).d2P == pytest.approx(expected, rel=1e-7)


def test_p2_closed_form_base_only():
    with pytest.raises(UnsupportedVariant):
        p2_zero_closed_form(random_model(np.random.default_rng(1), Variant.ALLEE))


# -- classification -------------------------------------------------------------


@pytest.mark.parametrize(
    "g0, case",
    [
        (0.5, Case.GLOBAL_PERSISTENCE),
        (0.9, Case.BISTABILITY),
        (1.0, Case.GLOBAL_EXTINCTION),
        (6.0, Case.EXTINCTION_BY_I2),
        (5.0 / 6.0, Case.CRITICAL_PERSISTENCE),
    ],
)
def test_fig2a_family_regimes(recipe_model, g0, case):
    report = classify_regime(recipe_model("fig2a").with_g0(g0))
    assert report.case is case


def test_worked_example_report(recipe_model):
    report = classify_regime(recipe_model("worked_example"))
    assert report.case is Case.BISTABILITY
    assert report.origin is Origin.STABLE
    assert report.theorem_basis == ("Thm3.3.iii", "Cor3.4", "Prop3.8")
    assert len(report.fixed_points.positive) == 2
    doc = report.to_dict()
    assert doc["schema_version"] == 1
    assert json.loads(json.dumps(doc)) == doc


def test_fig5_reports(recipe_model):
    from seasonal_sit.model import averaged_model

    m = recipe_model("fig5")
    assert classify_regime(m).case is Case.GLOBAL_EXTINCTION
    avg = classify_regime(averaged_model(m))
    assert avg.case is Case.BISTABILITY
    assert avg.theorem_basis[0].startswith("Thm4.1")


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), variant=st.sampled_from(list(Variant)))
def test_classification_never_inconsistent_on_battery(seed, variant):
    m = random_model(np.random.default_rng(seed), variant)
    report = classify_regime(m, n_scan=600)
    n_pos = len(report.fixed_points.positive)
    if report.case is Case.GLOBAL_PERSISTENCE:
        assert report.origin is Origin.UNSTABLE and n_pos == 1
    if report.case in (Case.GLOBAL_EXTINCTION, Case.EXTINCTION_BY_I2):
        assert n_pos == 0
    if report.case is Case.BISTABILITY:
        assert n_pos == 2
