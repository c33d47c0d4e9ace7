"""Bounds on the performance of a fixed score as unmeasured confounding grows.

Simulates a lending-style dataset where outcomes are only seen for approved
applicants, then reports MSE and TPR bounds over a grid of confounding
strengths, along with the strength at which the TPR can no longer be
distinguished from 0.8.

    python demos/sensitivity_sweep.py
"""
import numpy as np

from selbounds.bounds_functions import BoundingSpec
from selbounds.core_data import PerformanceSpec, split_folds
from selbounds.nuisance import LearnerConfig, cross_fit_nuisances
from selbounds.overall_perf import estimate_overall_bounds
from selbounds.positive_class import estimate_class_bounds
from selbounds.simulation import DgpConfig, generate_dgp, train_score
from selbounds.cli_io import breakdown_gamma

cfg = DgpConfig(n=4000, d=10, d_pi=4, d_mu=5, seed=11)
data = generate_dgp(cfg).dataset
score = train_score(cfg)

folds = split_folds(data.n, 2, seed=0)
bundle = cross_fit_nuisances(data, folds, LearnerConfig(penalty_grid=None))

mse, tpr = PerformanceSpec.mse(), PerformanceSpec.threshold_tpr(0.5)
print(f"{'gamma':>6} {'mse lo':>8} {'mse hi':>8} {'tpr lo':>8} {'tpr hi':>8}")
for gamma in (1.0, 1.25, 1.5, 2.0, 3.0):
    bnd = BoundingSpec.nonparametric(1 / gamma, gamma)
    m = estimate_overall_bounds(data, score, mse, bnd, bundle)
    t = estimate_class_bounds(data, score, tpr, bnd, bundle)
    print(f"{gamma:6.2f} {m.lower:8.4f} {m.upper:8.4f} {t.lower:8.4f} {t.upper:8.4f}")


def tpr_interval(gamma):
    e = estimate_class_bounds(data, score, tpr, BoundingSpec.nonparametric(1 / gamma, gamma), bundle)
    return e.lower, e.upper


g = breakdown_gamma(tpr_interval, lambda _: (0.8, 0.8), hi=10.0)
print("TPR interval reaches 0.8 at gamma =", "never (<= 10)" if g is None else f"{g:.3f}")

# the worst-case family needs no assumption at all
wc = estimate_overall_bounds(data, score, mse, BoundingSpec.worst_case(), bundle)
print(f"worst-case MSE bounds: [{wc.lower:.4f}, {wc.upper:.4f}], "
      f"95% CI [{wc.ci_lower[0]:.4f}, {wc.ci_upper[1]:.4f}]")
