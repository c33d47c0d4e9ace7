import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selbounds.bounds_functions import BoundingSpec
from selbounds.core_data import PerformanceSpec, ValidationError, split_folds
from selbounds.nuisance import LearnerConfig, bundle_from_functions, cross_fit_nuisances
from selbounds.positive_class import (InfeasibleDenominator, LfpInstance, auc_from_curve,
                                      estimate_class_bounds, estimate_negative_class_bounds,
                                      estimate_positive_class_bounds, negative_instance,
                                      positive_class_disparity_bounds, roc_bounds, solve_fold_lfp)
from selbounds.simulation import DgpConfig, generate_dgp

from oracles import brute_force_lfp, mann_whitney_auc

NP = BoundingSpec.nonparametric(2 / 3, 3 / 2)
TPR = PerformanceSpec.threshold_tpr(0.5)


@st.composite
def lfp_instances(draw):
    n = draw(st.integers(1, 9))
    unit = st.floats(0.2, 0.8)
    a = np.array(draw(st.lists(unit, min_size=n, max_size=n)))
    w = np.array(draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=n, max_size=n)))
    c1 = np.array(draw(st.lists(st.floats(-0.15, 0.15), min_size=n, max_size=n)))
    c2 = np.array(draw(st.lists(st.floats(-0.15, 0.15), min_size=n, max_size=n)))
    b0 = np.array(draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0]), min_size=n, max_size=n)))
    return LfpInstance(a, w, np.minimum(c1, c2), np.maximum(c1, c2), b0)


@settings(max_examples=150, deadline=None)
@given(lfp_instances(), st.sampled_from(["max", "min"]), st.booleans())
def test_matches_vertex_enumeration(inst, direction, negative):
    ref = brute_force_lfp(inst.a, inst.w, inst.lo, inst.hi, inst.beta0, direction,
                          negative=negative)
    prog = negative_instance(inst) if negative else inst
    sol = solve_fold_lfp(prog, direction)
    assert sol.value == pytest.approx(ref, abs=1e-10)
    # the returned assignment attains the value
    assert prog.ratio(sol.chosen_delta) == pytest.approx(sol.value, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(lfp_instances())
def test_max_above_min(inst):
    assert solve_fold_lfp(inst, "max").value >= solve_fold_lfp(inst, "min").value - 1e-12


@settings(max_examples=100, deadline=None)
@given(lfp_instances(), st.floats(0, 0.5))
def test_monotone_in_beta0(inst, bump):
    raised = LfpInstance(inst.a, inst.w, inst.lo, inst.hi, inst.beta0 + bump)
    for direction in ("max", "min"):
        assert (solve_fold_lfp(raised, direction).value
                >= solve_fold_lfp(inst, direction).value - 1e-12)


def test_point_box_gives_plugin_ratio():
    a = np.array([0.3, 0.6, 0.5])
    w = np.array([1.0, 0.0, 1.0])
    t = np.array([0.1, -0.2, 0.05])
    b0 = np.array([1.0, 0.0, 1.0])
    inst = LfpInstance(a, w, t, t, b0)
    expected = inst.ratio(t)
    assert solve_fold_lfp(inst, "max").value == pytest.approx(expected)
    assert solve_fold_lfp(inst, "min").value == pytest.approx(expected)


def test_constant_beta0():
    rng = np.random.default_rng(0)
    inst = LfpInstance(rng.uniform(0.2, 0.8, 8), np.ones(8), -0.1 * np.ones(8), 0.1 * np.ones(8),
                       np.full(8, 0.37))
    assert solve_fold_lfp(inst, "max").value == pytest.approx(0.37)
    assert solve_fold_lfp(inst, "min").value == pytest.approx(0.37)


def test_negative_class_of_constant_one():
    inst = LfpInstance(np.array([0.3, 0.4]), np.array([1.0, 0.0]), np.array([-0.1, 0.0]),
                       np.array([0.1, 0.0]), np.ones(2))
    neg = negative_instance(inst)
    assert solve_fold_lfp(neg, "max").value == pytest.approx(1.0)
    assert solve_fold_lfp(neg, "min").value == pytest.approx(1.0)


def test_inverted_box_is_swapped_and_counted():
    inst = LfpInstance(np.array([0.5, 0.5]), np.ones(2), np.array([0.1, -0.1]),
                       np.array([-0.1, 0.1]), np.array([1.0, 0.0]))
    sol = solve_fold_lfp(inst, "max")
    assert sol.swapped == 1
    assert sol.value == pytest.approx(0.6 / 1.0)


def test_infeasible_denominator():
    inst = LfpInstance(np.zeros(2), np.ones(2), np.array([-0.1, -0.1]), np.array([0.0, 0.0]),
                       np.ones(2))
    with pytest.raises(InfeasibleDenominator, match="denominator condition violated"):
        solve_fold_lfp(inst)


def test_empty_instance():
    empty = np.zeros(0)
    with pytest.raises(ValidationError):
        solve_fold_lfp(LfpInstance(empty, empty, empty, empty, empty))


def test_mismatched_lengths():
    with pytest.raises(ValidationError):
        LfpInstance(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), np.zeros(2))


def test_step_form_of_maximiser():
    # the maximiser takes the upper end above a beta0 cut and the lower end below it
    inst = LfpInstance(np.full(4, 0.5), np.ones(4), np.full(4, -0.2), np.full(4, 0.2),
                       np.array([0.0, 0.2, 0.8, 1.0]))
    sol = solve_fold_lfp(inst, "max")
    order = np.argsort(inst.beta0)
    d = sol.chosen_delta[order]
    assert np.all(np.diff((d == inst.hi[order]).astype(int)) >= 0)


@pytest.fixture(scope="module")
def fitted():
    sim = generate_dgp(DgpConfig(n=2000, seed=5, group=True))
    data = sim.dataset
    bundle = cross_fit_nuisances(data, split_folds(data.n, 2, 0), LearnerConfig())
    score = lambda x: sim.truth.mu1(x)
    return data, bundle, score


def test_unconfounded_collapse(fitted):
    data, bundle, score = fitted
    for spec in (TPR, PerformanceSpec.threshold_fpr(0.5), PerformanceSpec.generalized_tpr()):
        est = estimate_class_bounds(data, score, spec, BoundingSpec.unconfounded(), bundle)
        assert est.upper == pytest.approx(est.lower, abs=1e-12)
        assert len(est.fold_values[0]) == 2


def test_class_bounds_order_and_nesting(fitted):
    data, bundle, score = fitted
    prev = None
    for spec in (BoundingSpec.unconfounded(), NP, BoundingSpec.worst_case()):
        est = estimate_positive_class_bounds(data, score, TPR, spec, bundle)
        assert est.lower <= est.upper + 1e-12
        if prev is not None:
            assert est.lower <= prev.lower + 1e-12 and est.upper >= prev.upper - 1e-12
        prev = est


def test_wrong_class_rejected(fitted):
    data, bundle, score = fitted
    with pytest.raises(ValidationError):
        estimate_positive_class_bounds(data, score, PerformanceSpec.mse(), NP, bundle)
    with pytest.raises(ValidationError):
        estimate_negative_class_bounds(data, score, TPR, NP, bundle)


def test_negative_class_constant(fitted):
    data, bundle, _ = fitted
    # every score above a zero threshold: FPR is one
    est = estimate_negative_class_bounds(data, lambda x: np.ones(x.shape[0]),
                                         PerformanceSpec.threshold_fpr(0.0), NP, bundle)
    assert est.lower == pytest.approx(1.0) and est.upper == pytest.approx(1.0)


def test_extreme_thresholds(fitted):
    data, bundle, score = fitted
    rows = roc_bounds(data, score, [0.0, 1.0], NP, bundle)
    assert rows[0]["tpr_lo"] == pytest.approx(1.0) and rows[0]["fpr_hi"] == pytest.approx(1.0)
    assert rows[1]["tpr_hi"] == pytest.approx(0.0, abs=1e-12)
    assert rows[1]["fpr_lo"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        roc_bounds(data, score, [0.5, 0.2], NP, bundle)


def test_auc_matches_rank_statistic():
    cfg = DgpConfig(n=40000, seed=9, gamma_true=1.0)
    sim = generate_dgp(cfg)
    data, truth = sim.dataset, sim.truth
    bundle = bundle_from_functions(data, split_folds(data.n, 2, 0),
                                   truth.nuisance_functions(), eps=1e-6)
    score = truth.outcome_prob
    grid = np.linspace(0, 1, 201)
    rows = roc_bounds(data, score, grid, BoundingSpec.unconfounded(), bundle)
    ref = mann_whitney_auc(score(data.x), sim.y_star)
    assert auc_from_curve(rows, "lo") == pytest.approx(ref, abs=0.01)
    assert auc_from_curve(rows, "hi") == pytest.approx(ref, abs=0.01)
    wide = roc_bounds(data, score, grid[::10], NP, bundle)
    assert auc_from_curve(wide, "lo") <= auc_from_curve(wide, "hi")


def test_disparity_width_identity(fitted):
    data, bundle, score = fitted
    est = positive_class_disparity_bounds(data, score, TPR, NP, bundle)
    g0, g1 = est.fold_values
    lo0, up0 = np.mean(g0[0]), np.mean(g0[1])
    lo1, up1 = np.mean(g1[0]), np.mean(g1[1])
    assert est.upper - est.lower == pytest.approx((up1 - lo1) + (up0 - lo0))


def test_disparity_unconfounded_collapses(fitted):
    data, bundle, score = fitted
    est = positive_class_disparity_bounds(data, score, TPR, BoundingSpec.unconfounded(), bundle)
    assert est.upper == pytest.approx(est.lower, abs=1e-12)
