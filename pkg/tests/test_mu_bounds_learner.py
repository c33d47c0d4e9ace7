import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selbounds.bounds_functions import BoundingSpec, eif_mu
from selbounds.core_data import Dataset, ValidationError
from selbounds.mu_bounds_learner import (BoundRegressors, SmootherConfig, _two_fold,
                                         build_pseudo_outcomes, fit_bound_regressors,
                                         fit_smoother, imse, learn_mu_bounds, oracle_fit,
                                         plugin_fit)
from selbounds.nuisance import AnalyticModel, LearnerConfig, bundle_from_models
from selbounds.simulation import DgpConfig, Truth, generate_dgp

NP = BoundingSpec.nonparametric(2 / 3, 3 / 2)
SMOOTHERS = [SmootherConfig("ridge"), SmootherConfig("series", degree=3), SmootherConfig("knn", k=5)]


@pytest.fixture(scope="module")
def sim():
    return generate_dgp(DgpConfig(n=600, d=6, d_pi=3, d_mu=4, seed=1))


def _truth_bundle(data, truth, bounding=NP):
    models = {k: AnalyticModel(f) for k, f in truth.nuisance_functions(bounding).items()}
    return bundle_from_models(data, models, 1e-6)


def test_unconfounded_pseudo_outcomes(sim):
    data = sim.dataset
    b = _truth_bundle(data, sim.truth)
    lo, hi = build_pseudo_outcomes(data, b, BoundingSpec.unconfounded())
    phi = eif_mu(data, b)
    assert np.array_equal(lo, phi) and np.array_equal(hi, phi)


def test_upper_pseudo_outcome_conditional_mean():
    # many draws of (D, Y) at one fixed x; the average of psi_hi is its conditional mean
    truth = Truth(DgpConfig(d=6, d_pi=3, d_mu=4))
    rng = np.random.default_rng(4)
    for x0 in rng.normal(size=(3, 6)):
        m = 200_000
        x = np.tile(x0, (m, 1))
        pi1, mu1 = truth.pi1(x0[None])[0], truth.mu1(x0[None])[0]
        d = (rng.random(m) < pi1).astype(int)
        d[:2] = [0, 1]
        y = d * (rng.random(m) < mu1)
        data = Dataset.from_arrays(x, d, y)
        _, hi = build_pseudo_outcomes(data, _truth_bundle(data, truth), NP)
        target = mu1 + 0.5 * (1 - pi1) * mu1
        assert abs(hi.mean() - target) < 3 * hi.std() / np.sqrt(m)


@pytest.mark.parametrize("config", SMOOTHERS)
def test_constants_reproduced(config):
    x = np.random.default_rng(0).normal(size=(40, 3))
    reg = fit_smoother(x, np.full(40, 0.42), config)
    assert np.allclose(reg.predict(np.random.default_rng(1).normal(size=(10, 3))), 0.42)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 10))
def test_knn_preserves_order(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(30, 2))
    lo = rng.normal(size=30)
    hi = lo + rng.random(30)
    regs = fit_bound_regressors(x, lo, hi, SmootherConfig("knn", k=k))
    assert np.all(regs.predict_hi(x) >= regs.predict_lo(x) - 1e-12)


def test_series_degenerate_design():
    with pytest.raises(ValidationError, match="degenerate"):
        fit_smoother(np.ones((10, 2)), np.arange(10.0), SmootherConfig("series"))


def test_unknown_smoother():
    with pytest.raises(ValidationError, match="supported"):
        SmootherConfig("spline")


def test_loo_penalty_shrinks_noise():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(80, 40))
    y = rng.normal(size=80)
    chosen = fit_smoother(x, y, SmootherConfig())
    assert np.max(np.abs(chosen.predict(x) - y.mean())) < np.max(np.abs(y - y.mean()))


def test_imse_examples():
    x = np.random.default_rng(0).normal(size=(50, 2))
    f = lambda z: z[:, 0] ** 2
    assert imse(f, f, x) == 0.0
    assert imse(lambda z: f(z) + 0.1, f, x) == pytest.approx(0.01)
    with pytest.raises(ValidationError):
        imse(f, f, np.zeros((0, 2)))


@pytest.mark.parametrize("config", SMOOTHERS)
def test_json_round_trip(config):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(30, 2))
    a = fit_bound_regressors(x, rng.random(30), rng.random(30) + 1, config)
    b = BoundRegressors.from_json(a.to_json())
    xe = rng.normal(size=(7, 2))
    assert np.allclose(a.predict_lo(xe), b.predict_lo(xe), atol=1e-12)
    assert np.allclose(a.predict_hi(xe), b.predict_hi(xe), atol=1e-12)


def test_json_round_trip_averaged(sim):
    regs = oracle_fit(sim.dataset, sim.truth.nuisance_functions(NP), NP)
    back = BoundRegressors.from_json(regs.to_json())
    x = sim.dataset.x[:20]
    assert np.allclose(regs.predict_hi(x), back.predict_hi(x), atol=1e-12)


def test_clip_flag(sim):
    regs = oracle_fit(sim.dataset, sim.truth.nuisance_functions(NP), BoundingSpec.worst_case())
    x = np.random.default_rng(0).normal(size=(200, 6)) * 4
    c = regs.clipped()
    assert np.all((c.predict_lo(x) >= 0) & (c.predict_hi(x) <= 1))


def test_oracle_equals_feasible_path_with_truth(sim):
    data, truth = sim.dataset, sim.truth
    fns = truth.nuisance_functions(NP)
    models = {k: AnalyticModel(f) for k, f in fns.items()}
    smoother = SmootherConfig()
    via_models = _two_fold(data, lambda train, est: bundle_from_models(est, models, 0.01),
                           NP, smoother, seed=3, swap=True)
    oracle = oracle_fit(data, fns, NP, smoother, seed=3)
    x = data.x
    assert np.array_equal(via_models.predict_lo(x), oracle.predict_lo(x))
    assert np.array_equal(via_models.predict_hi(x), oracle.predict_hi(x))


def test_oracle_needs_truth(sim):
    with pytest.raises(ValidationError):
        oracle_fit(sim.dataset, {}, NP)


def test_proxy_family_needs_proxy(sim):
    with pytest.raises(ValidationError, match="proxy"):
        learn_mu_bounds(sim.dataset, BoundingSpec.proxy_simple())


def test_feasible_and_plugin_track_truth(sim):
    data, truth = sim.dataset, sim.truth
    x_eval = np.random.default_rng(8).normal(size=(500, 6))
    true_hi = lambda x: truth.mu_bounds(x, NP)[1]
    feasible = learn_mu_bounds(data, NP, LearnerConfig())
    plug = plugin_fit(data, NP, LearnerConfig())
    baseline = imse(lambda x: np.full(x.shape[0], true_hi(x_eval).mean()), true_hi, x_eval)
    assert imse(feasible.predict_hi, true_hi, x_eval) < baseline
    assert imse(plug.predict_hi, true_hi, x_eval) < baseline
