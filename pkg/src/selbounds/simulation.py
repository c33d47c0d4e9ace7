"""Synthetic selective-labels design, ground truth and replication studies.

Covariates are standard normal. Selection and the selected-group outcome
follow logistic indices on the first ``d_pi`` and ``d_mu`` covariates; among
unselected records the outcome probability is ``gamma_true`` times the
selected-group probability, so the confounding function is
``(gamma_true - 1) * mu1(x)``.

Optional mechanisms add a proxy outcome (equal to Y* with probability ``q``,
independently of selection), a group flag ``g = 1{x_1 > 0}`` and a
three-valued instrument. With the instrument switched on the outcome is
drawn first from P(Y*=1 | x) = sigma(mu-index) and selection depends on the
instrument and on Y*, so Y* is independent of Z given X while selection is
still confounded.
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .bounds_functions import BoundingSpec, confounding_bounds_at
from .core_data import (NEGATIVE, OVERALL, POSITIVE, Dataset, PerformanceSpec, ValidationError,
                        beta_arrays, split_folds)
from .nuisance import LearnerConfig, cross_fit_nuisances, fit_learner, kappa_key, lam_key, pz_key
from .overall_perf import estimate_overall_bounds, estimate_overall_disparity_bounds
from .positive_class import LfpInstance, estimate_class_bounds, negative_instance, solve_fold_lfp

Z_VALUES = (1, 2, 3)
TRUTH_DRAWS = 1_000_000
# tree-ensemble first stage for the replication studies
STUDY_LEARNER = LearnerConfig(family="boosting")


@dataclass(frozen=True)
class DgpConfig:
    n: int = 1000
    d: int = 50
    d_pi: int = 20
    d_mu: int = 25
    gamma_true: float = 0.75
    seed: int = 0
    proxy_q: Optional[float] = None
    group: bool = False
    instrument: bool = False
    iv_strength: float = 1.0
    iv_outcome_shift: float = 0.5

    def __post_init__(self):
        if not (1 <= self.d_pi <= self.d and 1 <= self.d_mu <= self.d):
            raise ValidationError("need 1 <= d_pi, d_mu <= d")
        if not 0 < self.gamma_true <= 1:
            raise ValidationError("gamma_true must lie in (0, 1]")
        if self.proxy_q is not None and not 0 <= self.proxy_q <= 1:
            raise ValidationError("proxy_q must lie in [0, 1]")
        if self.n < 2:
            raise ValidationError("n must be at least 2")


@dataclass(frozen=True)
class Truth:
    """Analytic nuisance and bound functions of the design (functions of x)."""

    config: DgpConfig

    def _idx_pi(self, x):
        c = self.config
        return x[:, :c.d_pi].sum(axis=1) / (2 * np.sqrt(c.d_pi))

    def _idx_mu(self, x):
        c = self.config
        return x[:, :c.d_mu].sum(axis=1) / (2 * np.sqrt(c.d_mu))

    # instrument design ---------------------------------------------------
    def _sel_prob(self, x, z, y):
        c = self.config
        return expit(self._idx_pi(x) + c.iv_strength * (z - 2) + c.iv_outcome_shift * (y - 0.5))

    def outcome_prob(self, x):
        """P(Y*=1 | x)."""
        x = np.atleast_2d(x)
        if self.config.instrument:
            return expit(self._idx_mu(x))
        return self.mu1(x) * (self.pi1(x) + self.config.gamma_true * (1 - self.pi1(x)))

    def lam(self, x, z):
        x = np.atleast_2d(x)
        m = expit(self._idx_mu(x))
        return m * self._sel_prob(x, z, 1.0)

    def kappa(self, x, z):
        x = np.atleast_2d(x)
        m = expit(self._idx_mu(x))
        return 1 - (m * self._sel_prob(x, z, 1.0) + (1 - m) * self._sel_prob(x, z, 0.0))

    # base design ---------------------------------------------------------
    def pi1(self, x):
        x = np.atleast_2d(x)
        if self.config.instrument:
            return np.mean([1 - self.kappa(x, z) for z in Z_VALUES], axis=0)
        return expit(self._idx_pi(x))

    def mu1(self, x):
        x = np.atleast_2d(x)
        if self.config.instrument:
            return np.mean([self.lam(x, z) for z in Z_VALUES], axis=0) / self.pi1(x)
        return expit(self._idx_mu(x))

    def mu0(self, x):
        """P(Y*=1 | D=0, x)."""
        x = np.atleast_2d(x)
        if self.config.instrument:
            pi1 = self.pi1(x)
            return (self.outcome_prob(x) - pi1 * self.mu1(x)) / (1 - pi1)
        return self.config.gamma_true * self.mu1(x)

    def delta(self, x):
        return self.mu0(x) - self.mu1(x)

    def mu_tilde0(self, x):
        q = self._q()
        m0 = self.mu0(x)
        return q * m0 + (1 - q) * (1 - m0)

    def gamma1(self, x):
        return np.full(np.atleast_2d(x).shape[0], self._q())

    def _q(self):
        if self.config.proxy_q is None:
            raise ValidationError("design has no proxy outcome")
        return self.config.proxy_q

    def nuisance_functions(self, bounding: Optional[BoundingSpec] = None) -> dict:
        """Named nuisance functions in the form ``bundle_from_functions`` expects."""
        out = {"pi1": self.pi1, "mu1": self.mu1}
        if self.config.proxy_q is not None:
            out.update(mu_tilde0=self.mu_tilde0, gamma1=self.gamma1)
        if self.config.instrument:
            for z in Z_VALUES:
                out[lam_key(z)] = functools.partial(lambda x, z: self.lam(x, z), z=z)
                out[kappa_key(z)] = functools.partial(lambda x, z: self.kappa(x, z), z=z)
                out[pz_key(z)] = lambda x: np.full(np.atleast_2d(x).shape[0], 1 / len(Z_VALUES))
        if bounding is not None and bounding.family == "iv_fixed":
            keep = {"pi1", "mu1", lam_key(bounding.z), kappa_key(bounding.z), pz_key(bounding.z)}
            out = {k: v for k, v in out.items() if k in keep}
        return out

    def nuisance_values(self, x, bounding: Optional[BoundingSpec] = None) -> dict:
        return {k: f(x) for k, f in self.nuisance_functions(bounding).items()}

    def delta_bounds(self, x, bounding: BoundingSpec):
        """True ``(delta_lo, delta_hi)`` implied by the bound family at ``x``."""
        return confounding_bounds_at(bounding, self.nuisance_values(np.atleast_2d(x), bounding))

    def mu_bounds(self, x, bounding: BoundingSpec):
        """True bounds ``(mu_lo, mu_hi)`` on P(Y*=1 | x)."""
        x = np.atleast_2d(x)
        lo, hi = self.delta_bounds(x, bounding)
        mu1, pi0 = self.mu1(x), 1 - self.pi1(x)
        return mu1 + pi0 * lo, mu1 + pi0 * hi


@dataclass(frozen=True, eq=False)
class SimulatedData:
    dataset: Dataset
    y_star: np.ndarray
    truth: Truth


def draw_covariates(n, d, rng):
    return rng.standard_normal((n, d))


def generate_dgp(config: DgpConfig) -> SimulatedData:
    rng = np.random.default_rng(config.seed)
    truth = Truth(config)
    n = config.n
    x = draw_covariates(n, config.d, rng)
    z = None
    if config.instrument:
        z = rng.choice(np.array(Z_VALUES), size=n)
        y_star = (rng.random(n) < truth.outcome_prob(x)).astype(np.int8)
        d = (rng.random(n) < truth._sel_prob(x, z, y_star)).astype(np.int8)
    else:
        d = (rng.random(n) < truth.pi1(x)).astype(np.int8)
        p_y = np.where(d == 1, truth.mu1(x), truth.mu0(x))
        y_star = (rng.random(n) < p_y).astype(np.int8)
    y_proxy = None
    if config.proxy_q is not None:
        agree = rng.random(n) < config.proxy_q
        y_proxy = np.where(agree, y_star, 1 - y_star)
    g = (x[:, 0] > 0).astype(np.int8) if config.group else None
    data = Dataset.from_arrays(x, d, d * y_star, z=z, y_proxy=y_proxy, g=g)
    return SimulatedData(data, y_star, truth)


# ---------------------------------------------------------------------------
# scores

@dataclass(frozen=True)
class LogisticScore:
    """``s(x) = sigmoid(intercept + x . coef)``; hashable so truths can be cached."""

    intercept: float
    coef: tuple

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return expit(self.intercept + x @ np.asarray(self.coef))


def train_score(config: DgpConfig, n_train: int = 2000, seed: int = 12345,
                penalty: float = 1.0) -> LogisticScore:
    """Fit a logistic score on the selected records of an independent training sample."""
    sim = generate_dgp(replace(config, n=n_train, seed=seed))
    data = sim.dataset
    sel = data.d_sel == 1
    fixed = LearnerConfig("logistic", penalty=penalty, penalty_grid=None)
    model = fit_learner(data.x[sel], data.y_obs[sel], fixed)
    coef = model.coef[1:] / model.sd
    intercept = model.coef[0] - float(np.sum(model.mean * coef))
    return LogisticScore(float(intercept), tuple(float(c) for c in coef))


# ---------------------------------------------------------------------------
# ground truth by numeric integration

def _truth_config(config: DgpConfig) -> DgpConfig:
    return replace(config, n=2, seed=0)


@functools.lru_cache(maxsize=8)
def _population_columns(config: DgpConfig, bounding: BoundingSpec, score, draws: int, seed: int,
                        chunk: int = 100_000):
    """Per-draw (score, mu1, pi0, delta_lo, delta_hi) over a large covariate sample."""
    truth = Truth(config)
    rng = np.random.default_rng(seed)
    cols = {k: [] for k in ("s", "mu1", "pi0", "lo", "hi", "g")}
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        x = draw_covariates(m, config.d, rng)
        lo, hi = truth.delta_bounds(x, bounding)
        cols["s"].append(score(x))
        cols["mu1"].append(truth.mu1(x))
        cols["pi0"].append(1 - truth.pi1(x))
        cols["lo"].append(lo)
        cols["hi"].append(hi)
        cols["g"].append((x[:, 0] > 0).astype(float))
        done += m
    return {k: np.concatenate(v) for k, v in cols.items()}


def true_bounds(spec: PerformanceSpec, bounding: BoundingSpec, score, config: DgpConfig,
                draws: int = TRUTH_DRAWS, seed: int = 20240601, group: Optional[int] = None):
    """Population ``(lower, upper, se_lower, se_upper)`` of a measure's bounds.

    Overall measures average the sign-selected bound terms over ``draws``
    covariate draws (standard errors reported). Class-conditional measures
    solve the population fractional program on the same draws (standard
    errors reported as ``nan``). ``group`` restricts to ``g = group``.
    """
    cols = _population_columns(_truth_config(config), bounding, score, int(draws), int(seed))
    keep = slice(None) if group is None else cols["g"] == group
    s, mu1, pi0 = cols["s"][keep], cols["mu1"][keep], cols["pi0"][keep]
    lo, hi = cols["lo"][keep], cols["hi"][keep]
    b0, b1 = beta_arrays(spec, s)
    if spec.estimand_class == OVERALL:
        base = b0 + b1 * mu1
        up = base + b1 * pi0 * np.where(b1 > 0, hi, lo)
        dn = base + b1 * pi0 * np.where(b1 > 0, lo, hi)
        m = up.size
        return (float(dn.mean()), float(up.mean()),
                float(dn.std() / np.sqrt(m)), float(up.std() / np.sqrt(m)))
    inst = LfpInstance(mu1, pi0, lo, hi, b0)
    if spec.estimand_class == NEGATIVE:
        inst = negative_instance(inst)
    return (solve_fold_lfp(inst, "min").value, solve_fold_lfp(inst, "max").value,
            float("nan"), float("nan"))


def true_disparity_bounds(spec, bounding, score, config, draws=TRUTH_DRAWS, seed=20240601):
    """Population bounds on the group-1 minus group-0 measure (g = 1{x_1 > 0}).

    Overall measures use the sharp sign-selected form; class-conditional
    measures use the difference of group-wise bounds.
    """
    if spec.estimand_class == OVERALL:
        cols = _population_columns(_truth_config(config), bounding, score, int(draws), int(seed))
        g = cols["g"]
        p1 = g.mean()
        b0 = np.empty_like(g)
        b1 = np.empty_like(g)
        for grp in (0, 1):
            at = g == grp
            b0[at], b1[at] = beta_arrays(spec, cols["s"][at])
        wt = g / p1 - (1 - g) / (1 - p1)
        t0, t1 = wt * b0, wt * b1
        base = t0 + t1 * cols["mu1"]
        pi0 = cols["pi0"]
        up = base + t1 * pi0 * np.where(t1 > 0, cols["hi"], cols["lo"])
        dn = base + t1 * pi0 * np.where(t1 > 0, cols["lo"], cols["hi"])
        return float(dn.mean()), float(up.mean())
    l1, u1, _, _ = true_bounds(spec, bounding, score, config, draws, seed, group=1)
    l0, u0, _, _ = true_bounds(spec, bounding, score, config, draws, seed, group=0)
    return l1 - u0, u1 - l0


# ---------------------------------------------------------------------------
# replication studies

@dataclass(frozen=True)
class ExperimentConfig:
    estimands: tuple = (PerformanceSpec.threshold_tpr(0.5),)
    boundings: tuple = (BoundingSpec.nonparametric(2 / 3, 3 / 2),)
    n_grid: tuple = (1000,)
    reps: int = 200
    folds: int = 2
    level: float = 0.95
    learner: LearnerConfig = STUDY_LEARNER
    dgp: DgpConfig = DgpConfig()
    seed: int = 0
    eps: float = 0.01
    truth_draws: int = TRUTH_DRAWS
    score_seed: int = 12345
    n_train: int = 2000

    def __post_init__(self):
        if self.reps < 2:
            raise ValidationError("reps must be at least 2")


def replication_seed(seed: int, rep: int) -> int:
    """Per-replication seed; shared across sample sizes so designs are paired."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1)[0])


def _bounding_label(b: BoundingSpec) -> str:
    parts = [b.family]
    if b.family == "nonparametric":
        parts.append(f"{b.gamma_lo:.6g}-{b.gamma_hi:.6g}")
    if b.z is not None:
        parts.append(f"z{b.z}")
    if b.alpha is not None:
        parts.append(f"a{b.alpha:g}")
    return ":".join(parts)


def _union_bounding(boundings):
    for b in boundings:
        if b.is_iv:
            return BoundingSpec.iv_smoothed()
    for b in boundings:
        if b.is_proxy:
            return b
    return None


def run_replications(exp: ExperimentConfig, max_fail_share: float = 0.10) -> list:
    """Bias / SD / SE / coverage rows per (estimand, bounding, n, side).

    Nuisances are cross-fitted once per replication and reused for all
    estimands and bound families. Failed replications are counted; the run
    aborts if more than ``max_fail_share`` of them fail.
    """
    score = train_score(exp.dgp, exp.n_train, exp.score_seed)
    cells = [(spec, b) for spec in exp.estimands for b in exp.boundings]
    truths = {(spec, b): true_bounds(spec, b, score, exp.dgp, exp.truth_draws) for spec, b in cells}
    union = _union_bounding(exp.boundings)
    rows = []
    for n in exp.n_grid:
        results = {cell: [] for cell in cells}
        failures = 0
        for rep in range(exp.reps):
            rseed = replication_seed(exp.seed, rep)
            sim = generate_dgp(replace(exp.dgp, n=n, seed=rseed))
            data = sim.dataset
            try:
                folds = split_folds(data.n, exp.folds, rseed)
                bundle = cross_fit_nuisances(data, folds, replace(exp.learner, seed=rseed), union,
                                             eps=exp.eps)
                out = {}
                for spec, b in cells:
                    if spec.estimand_class == OVERALL:
                        est = estimate_overall_bounds(data, score, spec, b, bundle, exp.level)
                    else:
                        est = estimate_class_bounds(data, score, spec, b, bundle)
                    out[(spec, b)] = est
            except (ValueError, np.linalg.LinAlgError):
                failures += 1
                if failures > max_fail_share * exp.reps:
                    raise RuntimeError(f"more than {max_fail_share:.0%} of replications failed")
                continue
            for cell, est in out.items():
                results[cell].append(est)
        for spec, b in cells:
            t_lo, t_hi, _, _ = truths[(spec, b)]
            ests = results[(spec, b)]
            for side, truth_val in (("lower", t_lo), ("upper", t_hi)):
                vals = np.array([getattr(e, side) for e in ests])
                row = {"estimand": spec.label, "bounding": _bounding_label(b), "n": n,
                       "side": side, "reps": len(ests), "failures": failures,
                       "truth": truth_val, "mean_estimate": float(vals.mean()),
                       "mean_bias": float(vals.mean() - truth_val),
                       "sd": float(vals.std(ddof=1))}
                if spec.estimand_class == OVERALL:
                    ses = np.array([getattr(e, "se_" + side) for e in ests])
                    cis = np.array([getattr(e, "ci_" + side) for e in ests])
                    row["mean_se"] = float(ses.mean())
                    row["coverage"] = float(np.mean((cis[:, 0] <= truth_val) & (truth_val <= cis[:, 1])))
                else:
                    row["mean_se"] = float("nan")
                    row["coverage"] = float("nan")
                rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# learner study (feasible vs oracle vs plug-in) and decision regret

@dataclass(frozen=True)
class LearnerStudyConfig:
    n_grid: tuple = (1000, 2500, 5000)
    reps: int = 20
    bounding: BoundingSpec = BoundingSpec.nonparametric(2 / 3, 3 / 2)
    dgp: DgpConfig = DgpConfig(d=100)
    learner: LearnerConfig = STUDY_LEARNER
    smoother: object = None
    n_eval: int = 10_000
    seed: int = 0
    eps: float = 0.01
    swap: bool = True


def run_learner_study(cfg: LearnerStudyConfig) -> list:
    """Average IMSE of the feasible, oracle and plug-in upper/lower bound learners."""
    from .mu_bounds_learner import SmootherConfig, imse, learn_mu_bounds, oracle_fit, plugin_fit

    smoother = cfg.smoother or SmootherConfig()
    truth = Truth(cfg.dgp)
    x_eval = draw_covariates(cfg.n_eval, cfg.dgp.d, np.random.default_rng([cfg.seed, 999]))
    true_lo, true_hi = truth.mu_bounds(x_eval, cfg.bounding)
    true_fns = truth.nuisance_functions(cfg.bounding)
    rows = []
    for n in cfg.n_grid:
        acc = {m: {"lo": [], "hi": []} for m in ("feasible", "oracle", "plugin")}
        for rep in range(cfg.reps):
            rseed = replication_seed(cfg.seed, rep)
            data = generate_dgp(replace(cfg.dgp, n=n, seed=rseed)).dataset
            fits = {
                "feasible": learn_mu_bounds(data, cfg.bounding, replace(cfg.learner, seed=rseed),
                                            smoother, seed=rseed, swap=cfg.swap, eps=cfg.eps),
                "oracle": oracle_fit(data, true_fns, cfg.bounding, smoother, seed=rseed,
                                     swap=cfg.swap, eps=cfg.eps),
                "plugin": plugin_fit(data, cfg.bounding, replace(cfg.learner, seed=rseed), cfg.eps),
            }
            for m, f in fits.items():
                acc[m]["lo"].append(imse(f.predict_lo, lambda _: true_lo, x_eval))
                acc[m]["hi"].append(imse(f.predict_hi, lambda _: true_hi, x_eval))
        for side in ("hi", "lo"):
            oracle_mean = float(np.mean(acc["oracle"][side]))
            for m in ("feasible", "oracle", "plugin"):
                v = np.array(acc[m][side])
                rows.append({"n": n, "side": "upper" if side == "hi" else "lower", "method": m,
                             "reps": cfg.reps, "imse": float(v.mean()),
                             "imse_se": float(v.std(ddof=1) / np.sqrt(v.size)),
                             "ratio_to_oracle": float(v.mean() / oracle_mean),
                             "per_rep": tuple(float(t) for t in v)})
    return rows


def run_regret_study(cfg: LearnerStudyConfig, utilities=None) -> list:
    """Regret of the plug-in max-min rule and the squared-regret comparison per replication."""
    from .decisions import UtilitySpec, maxmin_rule, regret
    from .mu_bounds_learner import SmootherConfig, learn_mu_bounds

    utilities = utilities or UtilitySpec.uniform()
    smoother = cfg.smoother or SmootherConfig()
    truth = Truth(cfg.dgp)
    x_eval = draw_covariates(cfg.n_eval, cfg.dgp.d, np.random.default_rng([cfg.seed, 999]))
    true_lo, true_hi = truth.mu_bounds(x_eval, cfg.bounding)
    rows = []
    for n in cfg.n_grid:
        for rep in range(cfg.reps):
            rseed = replication_seed(cfg.seed, rep)
            data = generate_dgp(replace(cfg.dgp, n=n, seed=rseed)).dataset
            fit = learn_mu_bounds(data, cfg.bounding, replace(cfg.learner, seed=rseed), smoother,
                                  seed=rseed, swap=cfg.swap, eps=cfg.eps).clipped()
            est_lo, est_hi = fit.predict_lo(x_eval), fit.predict_hi(x_eval)
            rule = maxmin_rule(est_lo, est_hi, utilities)
            r = regret(rule(x_eval), true_lo, true_hi, utilities, x_eval)
            l2 = 2 * np.mean((true_hi - est_hi) ** 2) + 2 * np.mean((true_lo - est_lo) ** 2)
            rows.append({"n": n, "rep": rep, "regret": float(r), "l2_bound": float(l2)})
    return rows
