"""Assumption-light bounds from an outcome proxy or an instrument.

Compares the width of MSE bounds under the proxy family, the fixed-value
instrument family and its smoothed version that combines all instrument
values.

    python demos/proxy_and_instrument.py
"""
from selbounds.bounds_functions import BoundingSpec
from selbounds.core_data import PerformanceSpec, split_folds
from selbounds.nuisance import LearnerConfig, cross_fit_nuisances
from selbounds.overall_perf import estimate_overall_bounds
from selbounds.simulation import DgpConfig, generate_dgp, train_score

learner = LearnerConfig(penalty_grid=None)
mse = PerformanceSpec.mse()


def report(label, cfg, bnd):
    data = generate_dgp(cfg).dataset
    score = train_score(cfg)
    bundle = cross_fit_nuisances(data, split_folds(data.n, 2, seed=0), learner, bnd)
    e = estimate_overall_bounds(data, score, mse, bnd, bundle)
    print(f"{label:<22} [{e.lower:.4f}, {e.upper:.4f}]  width {e.upper - e.lower:.4f}")


base = dict(n=5000, d=10, d_pi=4, d_mu=5, seed=21)
for q in (0.7, 0.9):
    report(f"proxy, agreement {q}", DgpConfig(proxy_q=q, **base), BoundingSpec.proxy_general())
iv = DgpConfig(instrument=True, **base)
for z in (1, 2, 3):
    report(f"instrument z={z}", iv, BoundingSpec.iv_fixed(z))
report("instrument, smoothed", iv, BoundingSpec.iv_smoothed())
