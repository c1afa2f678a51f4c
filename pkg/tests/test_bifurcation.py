from __future__ import annotations

import math

import pytest

from seasonal_sit.analysis import Case
from seasonal_sit.bifurcation import (
    BifurcationType,
    classify_bifurcation,
    compare_averaged,
    persists,
    sweep_g0,
)
from seasonal_sit.poincare import Stability


@pytest.mark.parametrize(
    "name, label, critical",
    [("fig2a", "Backward", 5.0 / 6.0), ("fig2b", "Transcritical(boundary)", 2.0), ("fig2c", "Transcritical", 16.0 / 6.5)],
)
def test_bifurcation_type_at_critical_g0(recipe_model, name, label, critical):
    bif = classify_bifurcation(recipe_model(name))
    assert bif.label == label
    assert bif.critical_g0 == pytest.approx(critical, rel=1e-12)


def test_bifurcation_none_for_other_variants(recipe_model):
    assert classify_bifurcation(recipe_model("fig5")).kind is BifurcationType.NONE


@pytest.fixture(scope="module")
def small_sweep(recipe_model):
    return sweep_g0(recipe_model("fig2c"), 1.0, 4.0, n_points=13, n_scan=200)


def test_sweep_structure(small_sweep):
    d = small_sweep
    assert list(d.grid) == sorted(d.grid)
    assert d.grid[0] == 1.0 and d.grid[-1] == 4.0
    # refinement adds points around the critical value
    assert len(d.grid) > 13
    assert d.bifurcation_type is BifurcationType.TRANSCRITICAL
    assert d.fold_g0 is None
    for pt, ids in zip(d.points, d.branch_ids):
        assert pt.fixed_points.points[0].w_star == 0.0 and ids[0] == 0
        assert not pt.flagged
    rows = d.rows()
    assert {r[4] for r in rows} == {0, 1}
    assert all(len(r) == 5 for r in rows)


def test_sweep_transcritical_exchange(small_sweep):
    crit = 16.0 / 6.5
    for pt in small_sweep.points:
        origin = pt.fixed_points.points[0]
        if pt.g0 < crit - 1e-6:
            assert origin.stability is Stability.UNSTABLE
            assert pt.n_positive == 1
            assert pt.case == Case.GLOBAL_PERSISTENCE.value
        elif pt.g0 > crit + 1e-6:
            assert origin.stability is Stability.STABLE
            assert pt.n_positive == 0


def test_sweep_threads_identical(recipe_model, small_sweep):
    again = sweep_g0(recipe_model("fig2c"), 1.0, 4.0, n_points=13, n_scan=200, threads=2)
    assert again.rows() == small_sweep.rows()
    assert again.summary() == small_sweep.summary()


def test_sweep_backward_fold(recipe_model):
    d = sweep_g0(recipe_model("fig2a"), 0.7, 1.0, n_points=16, n_scan=200)
    assert d.bifurcation_type is BifurcationType.BACKWARD
    assert d.fold_g0 is not None and 5.0 / 6.0 < d.fold_g0 < 1.0
    bistable = [p for p in d.points if p.case == Case.BISTABILITY.value]
    assert bistable and all(5.0 / 6.0 < p.g0 < d.fold_g0 for p in bistable)


def test_sweep_rejects_bad_ranges(recipe_model):
    with pytest.raises(ValueError):
        sweep_g0(recipe_model("fig2a"), 1.0, 0.5)
    with pytest.raises(ValueError):
        sweep_g0(recipe_model("fig2a"), 0.0, 1.0, n_points=1)


def test_compare_averaged_fig5(recipe_model):
    comp = compare_averaged(recipe_model("fig5"), [1.0])
    assert comp.seasonal.regime.case is Case.GLOBAL_EXTINCTION
    assert comp.averaged.regime.case is Case.BISTABILITY
    assert comp.seasonal.limits[1.0] == 0.0
    assert comp.averaged.limits[1.0] == pytest.approx(0.264098, abs=1e-6)
    doc = comp.to_dict()
    assert doc["seasonal"]["limits"] == [{"w0": 1.0, "limit": 0.0}]


def test_persists():
    assert persists(0.3) and not persists(0.0) and not persists(None) and not persists(math.nan)
