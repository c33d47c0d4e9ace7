"""Second-stage regression of influence-function pseudo-outcomes.

Nuisances are fit on one half of the data; on the other half each record
gets ``psi_lo = phi_mu + ell`` and ``psi_hi = phi_mu + u`` whose conditional
means are the lower and upper bounds on P(Y*=1 | X). A linear smoother
regresses them on X. By default the halves then swap roles and the two
fits are averaged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds_functions import BoundingSpec, confounding_bounds_at, eif_mu, pseudo_bound_terms
from .core_data import Dataset, FoldAssignment, ValidationError, split_folds
from .nuisance import (DEFAULT_EPS, LearnerConfig, bundle_from_functions, bundle_from_models,
                       fit_full_sample, knn_indices, predict_nuisances)

SMOOTHERS = ("ridge", "series", "knn")
DEFAULT_RIDGE_GRID = (0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)


@dataclass(frozen=True)
class SmootherConfig:
    """``ridge``: linear features; ``series``: per-feature powers up to ``degree``;
    ``knn``: k-nearest-neighbour average. ``penalty`` is added to the diagonal
    of the standardised Gram matrix (intercept unpenalised); when
    ``penalty_grid`` is set the penalty is chosen from it by exact
    leave-one-out error."""

    kind: str = "ridge"
    penalty: float = 1.0
    degree: int = 2
    k: int = 50
    penalty_grid: Optional[tuple] = DEFAULT_RIDGE_GRID

    def __post_init__(self):
        if self.kind not in SMOOTHERS:
            raise ValidationError(
                f"unknown smoother '{self.kind}'; supported: {', '.join(SMOOTHERS)}")
        if self.penalty < 0 or self.degree < 1 or self.k < 1:
            raise ValidationError("smoother hyperparameters out of range")
        if self.penalty_grid is not None:
            object.__setattr__(self, "penalty_grid", tuple(float(v) for v in self.penalty_grid))
            if not self.penalty_grid or min(self.penalty_grid) < 0:
                raise ValidationError("smoother penalty_grid must hold nonnegative values")


def _features(x, degree):
    if degree == 1:
        return x
    return np.hstack([x ** p for p in range(1, degree + 1)])


class Regressor:
    def predict(self, x) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class RidgeRegressor(Regressor):
    mean: np.ndarray
    sd: np.ndarray
    coef: np.ndarray  # intercept first
    degree: int = 1

    def predict(self, x):
        f = (_features(np.atleast_2d(np.asarray(x, dtype=float)), self.degree) - self.mean) / self.sd
        return self.coef[0] + f @ self.coef[1:]

    def to_dict(self):
        return {"kind": "ridge", "degree": self.degree, "mean": self.mean.tolist(),
                "sd": self.sd.tolist(), "coef": self.coef.tolist()}


@dataclass(frozen=True, eq=False)
class KnnRegressor(Regressor):
    x_train: np.ndarray
    y_train: np.ndarray
    k: int

    def predict(self, x):
        idx = knn_indices(self.x_train, np.atleast_2d(np.asarray(x, dtype=float)), self.k)
        return self.y_train[idx].mean(axis=1)

    def to_dict(self):
        return {"kind": "knn", "k": self.k, "x_train": self.x_train.tolist(),
                "y_train": self.y_train.tolist()}


@dataclass(frozen=True, eq=False)
class AverageRegressor(Regressor):
    parts: tuple

    def predict(self, x):
        return np.mean([p.predict(x) for p in self.parts], axis=0)

    def to_dict(self):
        return {"kind": "average", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class FunctionRegressor(Regressor):
    """Wraps an arbitrary prediction function (not serialisable)."""

    fn: Callable

    def predict(self, x):
        return np.asarray(self.fn(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)

    def to_dict(self):
        raise ValidationError("function-backed regressors cannot be serialised")


def regressor_from_dict(obj: dict) -> Regressor:
    kind = obj.get("kind")
    if kind == "ridge":
        return RidgeRegressor(np.asarray(obj["mean"]), np.asarray(obj["sd"]),
                              np.asarray(obj["coef"]), int(obj.get("degree", 1)))
    if kind == "knn":
        return KnnRegressor(np.asarray(obj["x_train"], dtype=float),
                            np.asarray(obj["y_train"], dtype=float), int(obj["k"]))
    if kind == "average":
        return AverageRegressor(tuple(regressor_from_dict(p) for p in obj["parts"]))
    raise ValidationError(f"unknown regressor kind '{kind}'")


def fit_smoother(x, y, config: SmootherConfig = SmootherConfig()) -> Regressor:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValidationError("smoother needs equal-length, nonempty inputs")
    if config.kind == "knn":
        return KnnRegressor(x.copy(), y.copy(), int(config.k))
    degree = config.degree if config.kind == "series" else 1
    f = _features(x, degree)
    mean = f.mean(axis=0)
    sd = f.std(axis=0)
    if config.kind == "series" and np.all(sd < 1e-12):
        raise ValidationError("degenerate design: covariates are constant")
    sd[sd < 1e-12] = 1.0
    fs = (f - mean) / sd
    yc = y - y.mean()
    penalty = config.penalty
    if config.penalty_grid is not None and len(config.penalty_grid) > 1:
        penalty = _loo_penalty(fs, yc, config.penalty_grid)
    gram = fs.T @ fs + penalty * np.eye(fs.shape[1])
    beta = np.linalg.solve(gram, fs.T @ yc)
    return RidgeRegressor(mean, sd, np.concatenate([[y.mean()], beta]), degree)


def _loo_penalty(fs, yc, grid):
    """Ridge penalty with the smallest leave-one-out squared error (via one SVD).

    The centring intercept adds ``1/n`` to every leverage.
    """
    n = fs.shape[0]
    u, sv, _ = np.linalg.svd(fs, full_matrices=False)
    uty = u.T @ yc
    best, best_err = grid[0], np.inf
    for lam in grid:
        shrink = sv ** 2 / (sv ** 2 + lam)
        fitted = u @ (shrink * uty)
        lev = (u ** 2) @ shrink + 1.0 / n
        err = np.mean(((yc - fitted) / np.maximum(1.0 - lev, 1e-12)) ** 2)
        if err < best_err:
            best, best_err = lam, err
    return float(best)


@dataclass(frozen=True, eq=False)
class BoundRegressors:
    mu_lo: Regressor
    mu_hi: Regressor
    smoother: Optional[SmootherConfig] = None
    clip: bool = False

    def predict_lo(self, x):
        v = self.mu_lo.predict(x)
        return np.clip(v, 0, 1) if self.clip else v

    def predict_hi(self, x):
        v = self.mu_hi.predict(x)
        return np.clip(v, 0, 1) if self.clip else v

    def clipped(self) -> "BoundRegressors":
        return BoundRegressors(self.mu_lo, self.mu_hi, self.smoother, True)

    def to_json(self) -> str:
        sm = None if self.smoother is None else dict(vars(self.smoother))
        if sm is not None and sm.get("penalty_grid") is not None:
            sm["penalty_grid"] = list(sm["penalty_grid"])
        return json.dumps({"mu_lo": self.mu_lo.to_dict(), "mu_hi": self.mu_hi.to_dict(),
                           "smoother": sm, "clip": self.clip}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BoundRegressors":
        obj = json.loads(text)
        sm = None if obj.get("smoother") is None else SmootherConfig(**obj["smoother"])
        return cls(regressor_from_dict(obj["mu_lo"]), regressor_from_dict(obj["mu_hi"]),
                   sm, bool(obj.get("clip", False)))


def build_pseudo_outcomes(data: Dataset, bundle, bounding: BoundingSpec):
    """``(psi_lo, psi_hi)`` for the records in ``data`` under ``bundle``'s nuisances."""
    ell, u = pseudo_bound_terms(data, bounding, bundle)
    phi = eif_mu(data, bundle)
    return phi + ell, phi + u


def fit_bound_regressors(x, psi_lo, psi_hi, config: SmootherConfig = SmootherConfig(),
                         clip: bool = False) -> BoundRegressors:
    return BoundRegressors(fit_smoother(x, psi_lo, config), fit_smoother(x, psi_hi, config),
                           config, clip)


def _one_split(data, train_idx, est_idx, make_bundle, bounding, smoother):
    """Nuisances from ``train_idx``, pseudo-outcomes and regression on ``est_idx``."""
    est = data.subset(est_idx)
    bundle = make_bundle(data.subset(train_idx), est)
    lo, hi = build_pseudo_outcomes(est, bundle, bounding)
    return fit_bound_regressors(est.x, lo, hi, smoother)


def _two_fold(data, make_bundle, bounding, smoother, seed, swap):
    folds = split_folds(data.n, 2, seed)
    a, b = folds.indices(0), folds.indices(1)
    first = _one_split(data, a, b, make_bundle, bounding, smoother)
    if not swap:
        return first
    second = _one_split(data, b, a, make_bundle, bounding, smoother)
    return BoundRegressors(AverageRegressor((first.mu_lo, second.mu_lo)),
                           AverageRegressor((first.mu_hi, second.mu_hi)), smoother)


def learn_mu_bounds(data: Dataset, bounding: BoundingSpec,
                    learner: LearnerConfig = LearnerConfig(),
                    smoother: SmootherConfig = SmootherConfig(), seed=0, swap: bool = True,
                    eps: float = DEFAULT_EPS) -> BoundRegressors:
    """Feasible two-stage estimator of the bound functions on P(Y*=1 | X)."""
    def make(train, est):
        # nuisances fit on ``train`` only, predicted on ``est``
        full = fit_full_sample(train, learner, bounding, eps)
        return bundle_from_models(est, full, eps)
    return _two_fold(data, make, bounding, smoother, seed, swap)


def oracle_fit(data: Dataset, true_nuisances: dict, bounding: BoundingSpec,
               smoother: SmootherConfig = SmootherConfig(), seed=0, swap: bool = True,
               eps: float = DEFAULT_EPS) -> BoundRegressors:
    """Same procedure with the true nuisance functions injected."""
    if not true_nuisances:
        raise ValidationError("oracle fit needs the true nuisance functions")

    def make(train, est):
        fold = FoldAssignment(np.zeros(est.n, dtype=np.int64), 1, None)
        return bundle_from_functions(est, fold, true_nuisances, eps)
    return _two_fold(data, make, bounding, smoother, seed, swap)


def plugin_fit(data: Dataset, bounding: BoundingSpec, learner: LearnerConfig = LearnerConfig(),
               eps: float = DEFAULT_EPS) -> BoundRegressors:
    """Baseline without sample splitting or influence corrections.

    Nuisances are fit once on all records and plugged into the bound
    formulas, e.g. ``mu1 + (gamma_hi - 1) * pi0 * mu1`` for outcome bounds.
    """
    models = fit_full_sample(data, learner, bounding, eps)

    def side(which):
        def fn(x):
            nuis = predict_nuisances(models, x, eps)
            lo, hi = confounding_bounds_at(bounding, nuis)
            delta = lo if which == "lo" else hi
            return nuis["mu1"] + (1 - nuis["pi1"]) * delta
        return FunctionRegressor(fn)
    return BoundRegressors(side("lo"), side("hi"), None)


def imse(predict: Callable, truth: Callable, x_eval) -> float:
    """Mean squared deviation of ``predict`` from ``truth`` over ``x_eval``."""
    x = np.atleast_2d(np.asarray(x_eval, dtype=float))
    if x.shape[0] == 0:
        raise ValidationError("evaluation sample is empty")
    diff = np.asarray(predict(x), dtype=float) - np.asarray(truth(x), dtype=float)
    return float(np.mean(diff ** 2))
