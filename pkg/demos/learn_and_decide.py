"""Learn bounds on P(Y*=1 | x) and act on them with the max-min rule.

Fits the two-stage bound regressors, turns them into a threshold rule for a
given payoff table, and reports the rule's regret against the rule built
from the true bound functions.

    python demos/learn_and_decide.py
"""
import numpy as np

from selbounds.bounds_functions import BoundingSpec
from selbounds.decisions import UtilitySpec, maxmin_rule, regret, welfare_bounds
from selbounds.mu_bounds_learner import SmootherConfig, learn_mu_bounds
from selbounds.nuisance import LearnerConfig
from selbounds.simulation import DgpConfig, Truth, draw_covariates, generate_dgp

cfg = DgpConfig(n=3000, d=10, d_pi=4, d_mu=5, seed=3)
bnd = BoundingSpec.nonparametric(2 / 3, 3 / 2)
data = generate_dgp(cfg).dataset

fit = learn_mu_bounds(data, bnd, LearnerConfig(penalty_grid=None), SmootherConfig("ridge"), seed=0)
fit = fit.clipped()

# approving a defaulter costs more than rejecting a good applicant
util = UtilitySpec(u11=0.1, u10=0.4, u00=0.2, u01=0.3)
rule = maxmin_rule(fit.predict_lo, fit.predict_hi, util)

truth = Truth(cfg)
x_eval = draw_covariates(20_000, cfg.d, np.random.default_rng(99))
true_lo = lambda x: truth.mu_bounds(x, bnd)[0]
true_hi = lambda x: truth.mu_bounds(x, bnd)[1]

w_lo, w_hi = welfare_bounds(rule, true_lo, true_hi, util, x_eval)
print(f"share acted on:      {rule(x_eval).mean():.3f}")
print(f"welfare bounds:      [{w_lo:.4f}, {w_hi:.4f}]")
print(f"regret vs true rule: {regret(rule, true_lo, true_hi, util, x_eval):.5f}")
print(f"regret of acting on everyone: "
      f"{regret(lambda x: np.ones(x.shape[0]), true_lo, true_hi, util, x_eval):.5f}")
