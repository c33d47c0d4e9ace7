"""Supervised learners and cross-fitted nuisance estimation.

Three learner families are implemented with numpy only: L2-regularised
logistic regression (Newton iterations, optional penalty grid chosen by
held-out log loss), k-nearest-neighbour averaging and gradient-boosted
stumps on quantile bins. Every fitted model maps covariates to [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.special import expit

from .core_data import Dataset, FoldAssignment, ValidationError

FAMILIES = ("logistic", "knn", "boosting")
DEFAULT_EPS = 0.01
DEFAULT_PENALTY_GRID = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class LearnerConfig:
    """Learner settings. Logistic models pick their L2 penalty from
    ``penalty_grid`` by cross-validated log loss; set ``penalty_grid=None``
    to use the fixed ``penalty``."""

    family: str = "logistic"
    penalty: float = 1.0
    penalty_grid: Optional[tuple] = DEFAULT_PENALTY_GRID
    cv_folds: int = 3
    k: int = 25
    n_trees: int = 100
    learning_rate: float = 0.1
    max_bins: int = 32
    leaf_reg: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown learner family '{self.family}'; supported: {', '.join(FAMILIES)}")
        positive = dict(penalty=self.penalty, k=self.k, n_trees=self.n_trees,
                        learning_rate=self.learning_rate, max_bins=self.max_bins,
                        cv_folds=self.cv_folds)
        for name, val in positive.items():
            if not val > 0:
                raise ValidationError(f"learner hyperparameter '{name}' must be positive")
        if self.penalty_grid is not None:
            object.__setattr__(self, "penalty_grid", tuple(float(v) for v in self.penalty_grid))
            if not self.penalty_grid or min(self.penalty_grid) <= 0:
                raise ValidationError("penalty_grid must hold positive values")
        if self.leaf_reg < 0:
            raise ValidationError("leaf_reg must be nonnegative")


class FittedModel:
    def predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantModel(FittedModel):
    p: float

    def predict(self, x):
        return np.full(np.asarray(x).shape[0], self.p)


@dataclass(frozen=True, eq=False)
class AnalyticModel(FittedModel):
    """Wraps a known function of covariates; used to inject true nuisances."""

    fn: Callable

    def predict(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


# ---------------------------------------------------------------------------
# logistic

def _standardize(x):
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd < 1e-12] = 1.0
    return mean, sd


def _logistic_newton(xs, y, penalty, max_iter=50, tol=1e-8):
    """Minimise sum log-loss + penalty/2 * |w|^2 (intercept unpenalised)."""
    n, d = xs.shape
    A = np.hstack([np.ones((n, 1)), xs])
    ridge = np.full(d + 1, penalty)
    ridge[0] = 0.0
    rate = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    w = np.zeros(d + 1)
    w[0] = np.log(rate / (1 - rate))

    def objective(w):
        eta = A @ w
        return np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * np.sum(ridge * w * w)

    obj = objective(w)
    for _ in range(max_iter):
        p = expit(A @ w)
        grad = A.T @ (p - y) + ridge * w
        h = p * (1 - p)
        H = (A * h[:, None]).T @ A + np.diag(ridge + 1e-10)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            w_new = w - t * step
            obj_new = objective(w_new)
            if obj_new <= obj + 1e-12 or t < 1e-8:
                break
            t *= 0.5
        converged = abs(obj - obj_new) < tol * (1 + abs(obj))
        w, obj = w_new, obj_new
        if converged:
            break
    return w


@dataclass(frozen=True, eq=False)
class LogisticModel(FittedModel):
    mean: np.ndarray
    sd: np.ndarray
    coef: np.ndarray  # intercept first
    penalty: float

    def predict(self, x):
        xs = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return expit(self.coef[0] + xs @ self.coef[1:])


def _fit_logistic(x, y, config: LearnerConfig, rng) -> LogisticModel:
    mean, sd = _standardize(x)
    xs = (x - mean) / sd
    penalty = config.penalty
    if config.penalty_grid is not None and len(config.penalty_grid) > 1:
        n = len(y)
        k = min(config.cv_folds, n)
        fold = rng.permutation(n) % k
        losses = []
        for lam in config.penalty_grid:
            loss = 0.0
            for j in range(k):
                tr, te = fold != j, fold == j
                if y[tr].min() == y[tr].max():
                    continue
                w = _logistic_newton(xs[tr], y[tr], lam)
                eta = w[0] + xs[te] @ w[1:]
                loss += np.sum(np.logaddexp(0.0, eta) - y[te] * eta)
            losses.append(loss)
        penalty = config.penalty_grid[int(np.argmin(losses))]
    coef = _logistic_newton(xs, y, penalty)
    return LogisticModel(mean, sd, coef, float(penalty))


# ---------------------------------------------------------------------------
# k nearest neighbours

def knn_indices(train: np.ndarray, query: np.ndarray, k: int, chunk: int = 2048) -> np.ndarray:
    """Indices of the ``k`` nearest training rows for each query row (Euclidean).

    Ties are broken by training index so results are deterministic.
    """
    k = min(k, train.shape[0])
    sq_train = np.sum(train * train, axis=1)
    out = np.empty((query.shape[0], k), dtype=np.int64)
    for start in range(0, query.shape[0], chunk):
        q = query[start:start + chunk]
        dist = sq_train[None, :] - 2.0 * q @ train.T + np.sum(q * q, axis=1)[:, None]
        np.maximum(dist, 0.0, out=dist)
        if k < train.shape[0]:
            part = np.argpartition(dist, k - 1, axis=1)[:, :k]
        else:
            part = np.tile(np.arange(train.shape[0]), (q.shape[0], 1))
        pd = np.take_along_axis(dist, part, axis=1)
        order = np.lexsort((part, pd), axis=1)
        out[start:start + chunk] = np.take_along_axis(part, order, axis=1)
    return out


@dataclass(frozen=True, eq=False)
class KnnModel(FittedModel):
    x_train: np.ndarray
    y_train: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    k: int

    def predict(self, x):
        xs = (np.asarray(x, dtype=float) - self.mean) / self.sd
        idx = knn_indices(self.x_train, xs, self.k)
        return self.y_train[idx].mean(axis=1)


def _fit_knn(x, y, config: LearnerConfig) -> KnnModel:
    mean, sd = _standardize(x)
    return KnnModel((x - mean) / sd, y.astype(float), mean, sd, int(config.k))


# ---------------------------------------------------------------------------
# gradient boosted stumps

def _bin_edges(x, max_bins):
    qs = np.linspace(0, 1, max_bins + 1)[1:-1]
    edges = np.full((x.shape[1], max_bins - 1), np.inf)
    for j in range(x.shape[1]):
        e = np.unique(np.quantile(x[:, j], qs))
        edges[j, :len(e)] = e
    return edges


def _bin(x, edges):
    out = np.empty(x.shape, dtype=np.int64)
    for j in range(x.shape[1]):
        out[:, j] = np.searchsorted(edges[j], x[:, j], side="left")
    return out


@dataclass(frozen=True, eq=False)
class StumpsModel(FittedModel):
    base: float
    features: np.ndarray
    thresholds: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        eta = np.full(x.shape[0], self.base)
        for j, t, lv, rv in zip(self.features, self.thresholds, self.left, self.right):
            eta += np.where(x[:, j] <= t, lv, rv)
        return expit(eta)


def _fit_stumps(x, y, config: LearnerConfig) -> StumpsModel:
    n, d = x.shape
    nb = config.max_bins
    edges = _bin_edges(x, nb)
    bins = _bin(x, edges)
    flat = (bins + np.arange(d)[None, :] * nb).ravel()
    rate = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    base = float(np.log(rate / (1 - rate)))
    eta = np.full(n, base)
    lam = config.leaf_reg
    feats, thr, lvals, rvals = [], [], [], []
    for _ in range(config.n_trees):
        p = expit(eta)
        g = p - y
        h = p * (1 - p)
        G = np.bincount(flat, weights=np.repeat(g, d), minlength=d * nb).reshape(d, nb)
        H = np.bincount(flat, weights=np.repeat(h, d), minlength=d * nb).reshape(d, nb)
        GL = np.cumsum(G, axis=1)[:, :-1]
        HL = np.cumsum(H, axis=1)[:, :-1]
        Gt, Ht = g.sum(), h.sum()
        GR, HR = Gt - GL, Ht - HL
        gain = GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam)
        gain[~np.isfinite(edges)] = -np.inf
        j, b = np.unravel_index(int(np.argmax(gain)), gain.shape)
        if not np.isfinite(gain[j, b]):
            break
        lv = -config.learning_rate * GL[j, b] / (HL[j, b] + lam)
        rv = -config.learning_rate * GR[j, b] / (HR[j, b] + lam)
        eta += np.where(bins[:, j] <= b, lv, rv)
        feats.append(j)
        thr.append(edges[j, b])
        lvals.append(lv)
        rvals.append(rv)
    return StumpsModel(base, np.array(feats, dtype=np.int64), np.array(thr),
                       np.array(lvals), np.array(rvals))


# ---------------------------------------------------------------------------

def fit_learner(features, labels, config: LearnerConfig = LearnerConfig(),
                eps: float = DEFAULT_EPS, seed=None) -> FittedModel:
    """Fit a probability model of binary ``labels`` on ``features``.

    Single-class labels give a constant model at the class rate clipped to
    ``[eps, 1 - eps]`` and a warning.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=float)
    if x.shape[0] == 0:
        raise ValidationError("cannot fit a learner on empty input")
    if x.shape[0] != y.shape[0]:
        raise ValidationError("features and labels differ in length")
    if y.min() == y.max():
        warnings.warn("single-class training labels; using a constant model", RuntimeWarning,
                      stacklevel=2)
        return ConstantModel(float(np.clip(y[0], eps, 1 - eps)))
    rng = np.random.default_rng(config.seed if seed is None else seed)
    if config.family == "logistic":
        return _fit_logistic(x, y, config, rng)
    if config.family == "knn":
        return _fit_knn(x, y, config)
    return _fit_stumps(x, y, config)


def predict_clipped(model: FittedModel, x, eps: float = DEFAULT_EPS) -> np.ndarray:
    if not 0 < eps < 0.5:
        raise ValidationError("clip eps must lie in (0, 0.5)")
    return np.clip(model.predict(np.atleast_2d(np.asarray(x, dtype=float))), eps, 1 - eps)


# ---------------------------------------------------------------------------
# cross fitting

# nuisances whose predictions are clipped into [eps, 1 - eps]
_CLIPPED = ("pi1", "mu_tilde0", "gamma1", "pz")


def lam_key(z) -> str:
    return f"lam[{z}]"


def kappa_key(z) -> str:
    return f"kappa[{z}]"


def pz_key(z) -> str:
    return f"pz[{z}]"


def _is_clipped(name: str) -> bool:
    return name.split("[")[0] in _CLIPPED


@dataclass(frozen=True, eq=False)
class NuisanceBundle:
    """Cross-fitted nuisance predictions.

    ``values[name][i]`` is the prediction for record ``i`` from the model
    trained without record ``i``'s fold; ``models[k][name]`` is that model.
    """

    folds: FoldAssignment
    eps: float
    values: Dict[str, np.ndarray]
    models: Sequence[Dict[str, FittedModel]] = field(default_factory=list)
    z_values: tuple = ()

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.values[name]
        except KeyError:
            raise ValidationError(f"nuisance '{name}' is missing from the bundle") from None

    def has(self, name: str) -> bool:
        return name in self.values

    def predict(self, name: str, x, fold: int) -> np.ndarray:
        """Prediction of fold ``fold``'s model for ``name`` at new covariates."""
        raw = self.models[fold][name].predict(np.atleast_2d(np.asarray(x, dtype=float)))
        return np.clip(raw, self.eps, 1 - self.eps) if _is_clipped(name) else raw

    def restrict(self, idx) -> "NuisanceBundle":
        """Bundle values for a subset of records (fold bookkeeping is dropped)."""
        vals = {k: v[idx] for k, v in self.values.items()}
        sub = FoldAssignment(self.folds.fold_of[idx], self.folds.K, self.folds.seed)
        return NuisanceBundle(sub, self.eps, vals, self.models, self.z_values)


def _training_sets(data: Dataset, required: Sequence[str], z_values):
    """(name, row mask, labels) per nuisance over the full data."""
    d = data.d_sel.astype(float)
    y = data.y_obs.astype(float)
    ones = np.ones(data.n, dtype=bool)
    out = [("pi1", ones, d), ("mu1", data.d_sel == 1, y)]
    if "proxy" in required:
        if data.y_proxy is None:
            raise ValidationError("proxy outcome required (column 'y_proxy')")
        yp = data.y_proxy.astype(float)
        out.append(("mu_tilde0", data.d_sel == 0, yp))
        out.append(("gamma1", data.d_sel == 1, (y == yp).astype(float)))
    if "instrument" in required:
        if data.z is None:
            raise ValidationError("instrument required (column 'z')")
        for z in z_values:
            if z not in data.z_support:
                raise ValidationError(f"instrument value {z} not in support {data.z_support}")
            at = data.z == z
            out.append((lam_key(z), at, y * d))
            out.append((kappa_key(z), at, 1.0 - d))
            out.append((pz_key(z), ones, at.astype(float)))
    return out


def _fold_seed(seed, fold, j):
    return np.random.SeedSequence([0 if seed is None else int(seed), fold, j]).generate_state(1)[0]


def cross_fit_nuisances(data: Dataset, folds: FoldAssignment,
                        config: LearnerConfig = LearnerConfig(), bounding=None,
                        eps: float = DEFAULT_EPS) -> NuisanceBundle:
    """Fit every nuisance the bounding family needs, one model set per fold.

    The model used for fold ``k`` is trained only on records outside fold ``k``.
    ``bounding`` may be ``None`` (selection and outcome models only).
    """
    if not 0 < eps < 0.5:
        raise ValidationError("clip eps must lie in (0, 0.5)")
    if folds.fold_of.shape[0] != data.n:
        raise ValidationError("fold assignment does not match the dataset size")
    required = () if bounding is None else bounding.required_nuisances()
    z_values = () if bounding is None else bounding.instrument_values(data)
    plan = _training_sets(data, required, z_values)
    values = {name: np.empty(data.n) for name, _, _ in plan}
    models = []
    for k in range(folds.K):
        test = folds.fold_of == k
        train = ~test
        fold_models = {}
        for j, (name, mask, labels) in enumerate(plan):
            rows = train & mask
            if not rows.any():
                raise ValidationError(f"training stratum for '{name}' is empty in fold {k}")
            model = fit_learner(data.x[rows], labels[rows], config, eps=eps,
                                seed=_fold_seed(config.seed, k, j))
            fold_models[name] = model
            pred = model.predict(data.x[test])
            values[name][test] = np.clip(pred, eps, 1 - eps) if _is_clipped(name) else pred
        models.append(fold_models)
    for v in values.values():
        v.setflags(write=False)
    return NuisanceBundle(folds, eps, values, models, tuple(z_values))


def fit_full_sample(data: Dataset, config: LearnerConfig = LearnerConfig(), bounding=None,
                    eps: float = DEFAULT_EPS) -> Dict[str, FittedModel]:
    """Fit each required nuisance once on all records (no sample splitting)."""
    required = () if bounding is None else bounding.required_nuisances()
    z_values = () if bounding is None else bounding.instrument_values(data)
    return {name: fit_learner(data.x[mask], labels[mask], config, eps=eps,
                              seed=_fold_seed(config.seed, 1_000_000, j))
            for j, (name, mask, labels) in enumerate(_training_sets(data, required, z_values))}


def bundle_from_functions(data: Dataset, folds: FoldAssignment, functions: Dict[str, Callable],
                          eps: float = DEFAULT_EPS) -> NuisanceBundle:
    """Inject known nuisance functions through the same interface as fitted ones.

    Every fold shares the same model, so the bundle behaves exactly like a
    cross-fitted one built from perfect learners.
    """
    models = {name: AnalyticModel(fn) for name, fn in functions.items()}
    values = {}
    for name, m in models.items():
        pred = m.predict(data.x)
        values[name] = np.clip(pred, eps, 1 - eps) if _is_clipped(name) else pred
        values[name].setflags(write=False)
    z_values = tuple(sorted(int(k[4:-1]) for k in functions if k.startswith("lam[")))
    return NuisanceBundle(folds, eps, values, [models] * folds.K, z_values)


def predict_nuisances(models: Dict[str, FittedModel], x, eps: float = DEFAULT_EPS) -> dict:
    """Predictions of named nuisance models at ``x``, clipped where required."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = {}
    for name, m in models.items():
        p = m.predict(x)
        out[name] = np.clip(p, eps, 1 - eps) if _is_clipped(name) else p
    return out


def bundle_from_models(data: Dataset, models: Dict[str, FittedModel],
                       eps: float = DEFAULT_EPS) -> NuisanceBundle:
    """Single-fold bundle for ``data`` from models trained elsewhere."""
    values = predict_nuisances(models, data.x, eps)
    for v in values.values():
        v.setflags(write=False)
    zs = tuple(sorted(int(k[4:-1]) for k in models if k.startswith("lam[")))
    fold = FoldAssignment(np.zeros(data.n, dtype=np.int64), 1, None)
    return NuisanceBundle(fold, eps, values, [models], zs)
