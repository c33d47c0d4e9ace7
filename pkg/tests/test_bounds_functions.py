import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from selbounds.bounds_functions import (BoundingSpec, confounding_bounds_at, default_alpha,
                                        eif_iv_bounds, eif_kappa, eif_lambda, eif_mu,
                                        eif_pi_mu, lse, lse_grad, positive_class_box,
                                        pseudo_bound_terms)
from selbounds.core_data import Dataset, ValidationError, split_folds
from selbounds.nuisance import NuisanceBundle
from selbounds.simulation import DgpConfig, draw_covariates, generate_dgp

from oracles import base_functionals, iv_functionals, proxy_lp_bounds


def _bundle(n, **values):
    vals = {k: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy() for k, v in values.items()}
    zs = tuple(sorted(int(k[4:-1]) for k in vals if k.startswith("lam[")))
    return NuisanceBundle(split_folds(n, 2, 0), 0.01, vals, z_values=zs)


def _pair(**extra):
    # record 0 selected with Y=1, record 1 unselected
    return Dataset.from_arrays(np.zeros((2, 1)), [1, 0], [1, 0], **extra)


def test_eif_mu_arithmetic():
    data = _pair()
    phi = eif_mu(data, _bundle(2, mu1=0.5, pi1=0.5))
    assert phi[0] == pytest.approx(1.5)
    assert phi[1] == pytest.approx(0.5)


def test_eif_pi_mu_arithmetic():
    data = Dataset.from_arrays(np.zeros((2, 1)), [1, 0], [0, 0])
    b = _bundle(2, mu1=0.5, pi1=0.6)
    phi = eif_pi_mu(data, b)
    assert phi[1] == pytest.approx(0.5)
    # selected record with Y equal to mu1 contributes nothing
    d = Dataset.from_arrays(np.zeros((2, 1)), [1, 0], [1, 0])
    assert eif_pi_mu(d, _bundle(2, mu1=1.0, pi1=0.6))[0] == pytest.approx(0.0)


@pytest.mark.parametrize("spec,nuis,expected", [
    (BoundingSpec.nonparametric(1, 1), dict(mu1=0.3), (0.0, 0.0)),
    (BoundingSpec.worst_case(), dict(mu1=0.3), (-0.3, 0.7)),
    (BoundingSpec.nonparametric(0.5, 2), dict(mu1=0.4), (-0.2, 0.4)),
    (BoundingSpec.proxy_general(), dict(mu1=0.3, gamma1=0.9, mu_tilde0=0.2), (-0.2, 0.0)),
    (BoundingSpec.proxy_simple(), dict(mu1=0.3, gamma1=0.7, mu_tilde0=0.2), (-0.2, 0.2)),
])
def test_confounding_bounds_examples(spec, nuis, expected):
    lo, hi = confounding_bounds_at(spec, nuis)
    assert (float(lo), float(hi)) == pytest.approx(expected, abs=1e-12)


def test_proxy_general_matches_lp():
    lo, hi = proxy_lp_bounds(0.9, 0.2)
    dlo, dhi = confounding_bounds_at(BoundingSpec.proxy_general(),
                                     dict(mu1=0.3, gamma1=0.9, mu_tilde0=0.2))
    assert float(dlo) == pytest.approx(lo - 0.3, abs=1e-9)
    assert float(dhi) == pytest.approx(hi - 0.3, abs=1e-9)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_proxy_general_is_the_lp_range(g1, mt, mu1):
    lo, hi = proxy_lp_bounds(g1, mt)
    dlo, dhi = confounding_bounds_at(BoundingSpec.proxy_general(),
                                     dict(mu1=mu1, gamma1=g1, mu_tilde0=mt))
    assert float(dlo) == pytest.approx(lo - mu1, abs=1e-7)
    assert float(dhi) == pytest.approx(hi - mu1, abs=1e-7)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_proxy_simple_matches_general_under_its_conditions(g1, mt, mu1):
    if not (mt <= g1 and mt + g1 <= 1):
        return
    simple = confounding_bounds_at(BoundingSpec.proxy_simple(), dict(mu1=mu1, gamma1=g1, mu_tilde0=mt))
    general = confounding_bounds_at(BoundingSpec.proxy_general(), dict(mu1=mu1, gamma1=g1, mu_tilde0=mt))
    assert np.allclose(simple, general, atol=1e-12)


@settings(max_examples=100)
@given(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.05, 0.95))
def test_iv_fixed_width(lam, kap, pi1):
    lo, hi = confounding_bounds_at(BoundingSpec.iv_fixed(1),
                                   {"mu1": 0.5, "pi1": pi1, "lam[1]": lam, "kappa[1]": kap})
    assert float(hi - lo) == pytest.approx(kap / (1 - pi1))


def test_missing_nuisance():
    with pytest.raises(ValidationError, match="gamma1"):
        confounding_bounds_at(BoundingSpec.proxy_simple(), dict(mu1=0.3, mu_tilde0=0.1))


def test_lse_examples():
    assert lse([0.7], 3.0) == pytest.approx(0.7)
    assert lse([0.7], -3.0) == pytest.approx(0.7)
    assert lse([0.0, 0.0], 1.0) == pytest.approx(np.log(2))
    assert lse([1e6, 0.0], 50.0) == pytest.approx(1e6)
    with pytest.raises(ValidationError):
        lse([1.0], 0.0)


@settings(max_examples=200)
@given(arrays(float, st.integers(1, 8), elements=st.floats(-50, 50)), st.floats(0.1, 100))
def test_lse_sandwich(v, alpha):
    p = v.size
    up = lse(v, alpha)
    assert v.max() - 1e-9 <= up <= v.max() + np.log(p) / alpha + 1e-9
    down = lse(v, -alpha)
    assert v.min() - np.log(p) / alpha - 1e-9 <= down <= v.min() + 1e-9


@settings(max_examples=100)
@given(arrays(float, st.integers(1, 6), elements=st.floats(-2, 2)),
       st.floats(0.5, 20), st.sampled_from([1.0, -1.0]))
def test_lse_gradient(v, alpha, sign):
    a = sign * alpha
    g = lse_grad(v, a)
    assert np.all(g >= 0) and g.sum() == pytest.approx(1.0)
    h = 1e-6
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        num = (lse(v + e, a) - lse(v - e, a)) / (2 * h)
        assert num == pytest.approx(g[j], abs=1e-5)


def test_softmax_equal_arguments():
    assert np.allclose(lse_grad([0.2, 0.2, 0.2], 7.0), 1 / 3)


def test_default_alpha():
    assert default_alpha([0.0, 0.5]) == pytest.approx(40.0)
    assert default_alpha([0.3, 0.3]) == 20.0


def _iv_data(n=50, seed=0, zs=(1, 2, 3)):
    rng = np.random.default_rng(seed)
    d = np.tile([1, 0], n // 2)
    y = d * (rng.random(n) < 0.5)
    z = rng.choice(zs, size=n)
    return Dataset.from_arrays(rng.normal(size=(n, 2)), d, y, z=z)


def test_iv_single_instrument_reduces_to_fixed():
    data = _iv_data(zs=(1,))
    b = _bundle(data.n, mu1=0.4, pi1=0.6, **{"lam[1]": 0.3, "kappa[1]": 0.35, "pz[1]": 1.0})
    lo, hi = eif_iv_bounds(data, b, alpha=5.0)
    flo, fhi = pseudo_bound_terms(data, BoundingSpec.iv_fixed(1), b)
    assert np.allclose(lo, flo, atol=1e-12) and np.allclose(hi, fhi, atol=1e-12)


def test_iv_pseudo_terms_with_exact_nuisances_are_unbiased():
    # residuals vanish in expectation, so averaging the terms over one fixed x recovers lse
    data = _iv_data(n=60000, seed=3)
    vals = {"mu1": 0.5, "pi1": 0.5}
    for z in (1, 2, 3):
        vals[f"lam[{z}]"] = 0.25
        vals[f"kappa[{z}]"] = 0.5
        vals[f"pz[{z}]"] = 1 / 3
    b = _bundle(data.n, **vals)
    lo, hi = eif_iv_bounds(data, b, alpha=10.0)
    assert np.mean(lo) == pytest.approx(lse([-0.25] * 3, 10.0), abs=4 * lo.std() / np.sqrt(data.n))
    assert np.mean(hi) == pytest.approx(lse([0.25] * 3, -10.0), abs=4 * hi.std() / np.sqrt(data.n))


def test_instrument_eifs_arithmetic():
    data = Dataset.from_arrays(np.zeros((2, 1)), [1, 0], [1, 0], z=[1, 2])
    b = _bundle(2, **{"lam[1]": 0.3, "kappa[1]": 0.4, "pz[1]": 0.5})
    assert eif_lambda(data, b, 1) == pytest.approx([0.3 + 2 * 0.7, 0.3])
    assert eif_kappa(data, b, 1) == pytest.approx([0.4 - 2 * 0.4, 0.4])


def test_iv_requires_instrument():
    data = _pair()
    b = _bundle(2, mu1=0.5, pi1=0.5)
    with pytest.raises(ValidationError, match="instrument"):
        eif_iv_bounds(data, b)


def test_unconfounded_terms_are_zero():
    data = generate_dgp(DgpConfig(n=200, seed=0)).dataset
    b = _bundle(data.n, mu1=0.4, pi1=0.5)
    lo, hi = pseudo_bound_terms(data, BoundingSpec.unconfounded(), b)
    assert np.all(lo == 0) and np.all(hi == 0)
    lo, hi = pseudo_bound_terms(data, BoundingSpec.nonparametric(1, 1), b)
    assert np.all(lo == 0) and np.all(hi == 0)


def test_nonparametric_upper_is_scaled_pi_mu():
    data = generate_dgp(DgpConfig(n=200, seed=0)).dataset
    b = _bundle(data.n, mu1=0.4, pi1=0.5)
    _, hi = pseudo_bound_terms(data, BoundingSpec.nonparametric(1, 2), b)
    assert np.allclose(hi, eif_pi_mu(data, b))


@pytest.mark.parametrize("spec", [BoundingSpec.worst_case(), BoundingSpec.nonparametric(0.5, 2),
                                  BoundingSpec.proxy_general()])
def test_pseudo_terms_average_to_plugin(spec):
    # with true nuisances the mean pseudo term estimates E[pi0 delta_bound]
    sim = generate_dgp(DgpConfig(n=40000, seed=8, proxy_q=0.8))
    data, truth = sim.dataset, sim.truth
    b = _bundle(data.n, **truth.nuisance_values(data.x))
    lo, hi = pseudo_bound_terms(data, spec, b)
    plo, phi = confounding_bounds_at(spec, truth.nuisance_values(data.x))
    pi0 = 1 - truth.pi1(data.x)
    for term, plug in ((lo, plo), (hi, phi)):
        se = np.std(term) / np.sqrt(data.n)
        # the proxy family smooths |.|, allow its small level shift
        assert abs(np.mean(term) - np.mean(pi0 * plug)) < 4 * se + 0.01


def test_box_weights():
    data = generate_dgp(DgpConfig(n=100, seed=0, instrument=True)).dataset
    vals = {"mu1": 0.4, "pi1": 0.5}
    for z in (1, 2, 3):
        vals.update({f"lam[{z}]": 0.2, f"kappa[{z}]": 0.4, f"pz[{z}]": 1 / 3})
    b = _bundle(data.n, **vals)
    _, w, _, _ = positive_class_box(data, BoundingSpec.nonparametric(0.5, 2), b)
    assert np.array_equal(w, 1 - data.d_sel)
    _, w, _, _ = positive_class_box(data, BoundingSpec.iv_smoothed(), b)
    assert np.all(w == 1)


def test_quadrature_oracle_agrees_with_sampling():
    # the quadrature oracle itself, checked against direct draws from the design
    sim = generate_dgp(DgpConfig(n=200000, seed=21))
    x, t = sim.dataset.x, sim.truth
    ref = base_functionals()
    assert np.mean(t.mu1(x)) == pytest.approx(ref["mu1"], abs=2e-3)
    assert np.mean((1 - t.pi1(x)) * t.mu1(x)) == pytest.approx(ref["pi0_mu1"], abs=2e-3)
    cfg = DgpConfig(n=200, seed=22, instrument=True)
    tiv = generate_dgp(cfg).truth
    xi = draw_covariates(200000, cfg.d, np.random.default_rng(5))
    ref = iv_functionals()
    assert np.mean(tiv.lam(xi, 2)) == pytest.approx(ref["lam[2]"], abs=2e-3)
    assert np.mean(tiv.kappa(xi, 3)) == pytest.approx(ref["kappa[3]"], abs=2e-3)
