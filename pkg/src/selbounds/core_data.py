"""Data model, performance measure specifications and fold assignment.

All estimators in the package operate on a :class:`Dataset`, a column-oriented
immutable container. A record-oriented view (:class:`Record`) exists for
ingestion and validation of small hand-built inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when input data or configuration violates a model constraint."""


@dataclass(frozen=True)
class Record:
    x: tuple
    d_sel: int
    y_obs: int
    z: Optional[int] = None
    y_proxy: Optional[int] = None
    g: Optional[int] = None


def _as_binary(values, name):
    arr = np.asarray(values)
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValidationError(f"column '{name}' has non-finite values")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError(f"column '{name}' must be binary (0/1)")
    return arr.astype(np.int8)


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column store of ``n`` records with covariate dimension ``d``.

    ``x`` is ``(n, d)``; ``d_sel`` and ``y_obs`` are binary. ``z``, ``y_proxy``
    and ``g`` are optional columns. Construct through :meth:`from_arrays` or
    :func:`validate_dataset` so the invariants are checked.
    """

    x: np.ndarray
    d_sel: np.ndarray
    y_obs: np.ndarray
    z: Optional[np.ndarray] = None
    y_proxy: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    z_support: tuple = field(default=())

    @classmethod
    def from_arrays(cls, x, d_sel, y_obs, z=None, y_proxy=None, g=None) -> "Dataset":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValidationError("covariates must be a 2-d array")
        n = x.shape[0]
        if n == 0:
            raise ValidationError("dataset is empty")
        if not np.all(np.isfinite(x)):
            raise ValidationError("covariates contain non-finite values")
        d_sel = _as_binary(d_sel, "d")
        y_obs = _as_binary(y_obs, "y")
        for name, col in (("d", d_sel), ("y", y_obs)):
            if col.shape != (n,):
                raise ValidationError(f"column '{name}' has length {col.shape} but n={n}")
        if np.any((d_sel == 0) & (y_obs == 1)):
            raise ValidationError("outcome observed without selection (y=1 with d=0)")
        n_sel = int(d_sel.sum())
        if n_sel == 0 or n_sel == n:
            raise ValidationError("both selected and unselected records are required")
        support = ()
        if z is not None:
            z = np.asarray(z)
            if z.shape != (n,):
                raise ValidationError("column 'z' has the wrong length")
            if z.dtype.kind == "f":
                if not np.all(np.isfinite(z)) or not np.all(z == np.round(z)):
                    raise ValidationError("instrument 'z' must take integer values")
            z = z.astype(np.int64)
            support = tuple(int(v) for v in np.unique(z))
            z = _frozen(z)
        if y_proxy is not None:
            y_proxy = _as_binary(y_proxy, "y_proxy")
            if y_proxy.shape != (n,):
                raise ValidationError("column 'y_proxy' has the wrong length")
            y_proxy = _frozen(y_proxy)
        if g is not None:
            g = _as_binary(g, "g")
            if g.shape != (n,):
                raise ValidationError("column 'g' has the wrong length")
            g = _frozen(g)
        return cls(_frozen(x), _frozen(d_sel), _frozen(y_obs), z, y_proxy, g, support)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def n_selected(self) -> int:
        return int(self.d_sel.sum())

    @property
    def n_unselected(self) -> int:
        return self.n - self.n_selected

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset (validated again)."""
        pick = lambda col: None if col is None else col[idx]
        return Dataset.from_arrays(
            self.x[idx], self.d_sel[idx], self.y_obs[idx],
            pick(self.z), pick(self.y_proxy), pick(self.g),
        )

    def records(self) -> list:
        out = []
        for i in range(self.n):
            out.append(Record(
                x=tuple(float(v) for v in self.x[i]),
                d_sel=int(self.d_sel[i]),
                y_obs=int(self.y_obs[i]),
                z=None if self.z is None else int(self.z[i]),
                y_proxy=None if self.y_proxy is None else int(self.y_proxy[i]),
                g=None if self.g is None else int(self.g[i]),
            ))
        return out


def validate_dataset(records: Sequence[Record]) -> Dataset:
    """Build a :class:`Dataset` from records, enforcing the data model."""
    if len(records) == 0:
        raise ValidationError("dataset is empty")
    dims = {len(r.x) for r in records}
    if len(dims) != 1:
        raise ValidationError(f"records have mismatched covariate dimensions {sorted(dims)}")

    def optional(attr):
        vals = [getattr(r, attr) for r in records]
        present = [v is not None for v in vals]
        if not any(present):
            return None
        if not all(present):
            raise ValidationError(f"column '{attr}' is present for some records only")
        return np.asarray(vals)

    for i, r in enumerate(records):
        if r.d_sel == 0 and r.y_obs == 1:
            raise ValidationError(f"record {i}: outcome observed without selection")
    return Dataset.from_arrays(
        np.array([r.x for r in records], dtype=float),
        [r.d_sel for r in records],
        [r.y_obs for r in records],
        z=optional("z"),
        y_proxy=optional("y_proxy"),
        g=optional("g"),
    )


# ---------------------------------------------------------------------------
# Performance measures

OVERALL = "overall"
POSITIVE = "positive"
NEGATIVE = "negative"

_KIND_CLASS = {
    "mse": OVERALL,
    "calibration": OVERALL,
    "precision": OVERALL,
    "failure_rate": OVERALL,
    "accuracy": OVERALL,
    "custom_overall": OVERALL,
    "generalized_tpr": POSITIVE,
    "threshold_tpr": POSITIVE,
    "custom_positive": POSITIVE,
    "generalized_fpr": NEGATIVE,
    "threshold_fpr": NEGATIVE,
    "custom_negative": NEGATIVE,
}

SUPPORTED_KINDS = tuple(_KIND_CLASS)


@dataclass(frozen=True)
class PerformanceSpec:
    """A performance measure written as ``E[beta0 + beta1 * Y*]`` or as a
    conditional mean of ``beta0`` given ``Y* = 1`` / ``Y* = 0``.

    Use the constructors (``PerformanceSpec.mse()``, ``.threshold_tpr(0.5)`` ...)
    rather than the raw fields. Custom kinds take callables of the score.
    """

    kind: str
    tau: Optional[float] = None
    r1: Optional[float] = None
    r2: Optional[float] = None
    beta0_fn: Optional[Callable] = None
    beta1_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in _KIND_CLASS:
            raise ValidationError(
                f"unknown performance kind '{self.kind}'; supported: {', '.join(SUPPORTED_KINDS)}")
        if self.kind in ("threshold_tpr", "threshold_fpr", "precision", "failure_rate", "accuracy"):
            if self.tau is None or not 0.0 <= self.tau <= 1.0:
                raise ValidationError("threshold tau must lie in [0, 1]")
        if self.kind == "calibration":
            if self.r1 is None or self.r2 is None or not 0.0 <= self.r1 <= self.r2 <= 1.0:
                raise ValidationError("calibration bin needs 0 <= r1 <= r2 <= 1")
        if self.kind.startswith("custom") and self.beta0_fn is None:
            raise ValidationError("custom kinds need beta0_fn")

    @property
    def estimand_class(self) -> str:
        return _KIND_CLASS[self.kind]

    @property
    def needs_aux(self) -> bool:
        return self.kind in ("calibration", "precision")

    @property
    def label(self) -> str:
        if self.tau is not None:
            return f"{self.kind}@{self.tau:g}"
        if self.kind == "calibration":
            return f"calibration[{self.r1:g},{self.r2:g}]"
        return self.kind

    @classmethod
    def mse(cls):
        return cls("mse")

    @classmethod
    def calibration(cls, r1, r2):
        return cls("calibration", r1=float(r1), r2=float(r2))

    @classmethod
    def precision(cls, tau):
        return cls("precision", tau=float(tau))

    @classmethod
    def failure_rate(cls, tau):
        return cls("failure_rate", tau=float(tau))

    @classmethod
    def accuracy(cls, tau):
        return cls("accuracy", tau=float(tau))

    @classmethod
    def generalized_tpr(cls):
        return cls("generalized_tpr")

    @classmethod
    def generalized_fpr(cls):
        return cls("generalized_fpr")

    @classmethod
    def threshold_tpr(cls, tau):
        return cls("threshold_tpr", tau=float(tau))

    @classmethod
    def threshold_fpr(cls, tau):
        return cls("threshold_fpr", tau=float(tau))

    @classmethod
    def custom_overall(cls, beta0_fn, beta1_fn):
        return cls("custom_overall", beta0_fn=beta0_fn, beta1_fn=beta1_fn)

    @classmethod
    def custom_positive(cls, beta0_fn):
        return cls("custom_positive", beta0_fn=beta0_fn)

    @classmethod
    def custom_negative(cls, beta0_fn):
        return cls("custom_negative", beta0_fn=beta0_fn)


def _bin_indicator(spec: PerformanceSpec, s):
    if spec.kind == "calibration":
        return ((spec.r1 <= s) & (s <= spec.r2)).astype(float)
    return (s >= spec.tau).astype(float)


def aux_probability(spec: PerformanceSpec, scores) -> Optional[float]:
    """Empirical share of scores in the bin a Calibration/Precision kind divides by."""
    if not spec.needs_aux:
        return None
    return float(np.mean(_bin_indicator(spec, np.asarray(scores, dtype=float))))


def beta_arrays(spec: PerformanceSpec, scores, aux: Optional[float] = None):
    """Vectorised ``(beta0, beta1)``; ``beta1`` is ``None`` for positive/negative kinds.

    ``aux`` defaults to the empirical bin share among ``scores``.
    """
    s = np.asarray(scores, dtype=float)
    if np.any((s < 0) | (s > 1)) or not np.all(np.isfinite(s)):
        raise ValidationError("scores must lie in [0, 1]")
    kind = spec.kind
    if kind == "mse":
        return s * s, 1.0 - 2.0 * s
    if spec.needs_aux:
        if aux is None:
            aux = aux_probability(spec, s)
        if aux <= 0:
            raise ValidationError("empty prediction bin")
        return np.zeros_like(s), _bin_indicator(spec, s) / aux
    if kind == "failure_rate":
        return np.zeros_like(s), (s <= spec.tau).astype(float)
    if kind == "accuracy":
        c = (s >= spec.tau).astype(float)
        return 1.0 - c, 2.0 * c - 1.0
    if kind in ("generalized_tpr", "generalized_fpr"):
        return s.copy(), None
    if kind in ("threshold_tpr", "threshold_fpr"):
        return (s >= spec.tau).astype(float), None
    b0 = np.broadcast_to(np.asarray(spec.beta0_fn(s), dtype=float), s.shape).copy()
    if kind == "custom_overall":
        b1 = np.broadcast_to(np.asarray(spec.beta1_fn(s), dtype=float), s.shape).copy()
        return b0, b1
    return b0, None


def beta_terms(spec: PerformanceSpec, score_value: float, aux: Optional[float] = None):
    """Scalar ``(beta0, beta1)`` at a single score value."""
    if spec.needs_aux and aux is None:
        raise ValidationError("this kind needs the bin probability 'aux'")
    b0, b1 = beta_arrays(spec, np.array([score_value]), aux=aux)
    return float(b0[0]), (None if b1 is None else float(b1[0]))


# ---------------------------------------------------------------------------
# Folds

@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of: np.ndarray  # 0-based fold id per record
    K: int
    seed: Optional[int]

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def complement(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != k)

    @property
    def sizes(self) -> list:
        return np.bincount(self.fold_of, minlength=self.K).tolist()


def split_folds(n: int, K: int, seed=None) -> FoldAssignment:
    """Random partition of ``range(n)`` into ``K`` folds of near-equal size."""
    if K < 2 or K > n:
        raise ValidationError(f"need 2 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % K
    fold_of.setflags(write=False)
    return FoldAssignment(fold_of, K, seed)


def score_column(score, x) -> np.ndarray:
    """Evaluate a score given as a callable of covariates or a precomputed column."""
    if callable(score):
        vals = np.asarray(score(x), dtype=float)
    else:
        vals = np.asarray(score, dtype=float)
    if vals.shape != (x.shape[0],):
        raise ValidationError("score column is not aligned with the dataset")
    if not np.all(np.isfinite(vals)) or np.any((vals < 0) | (vals > 1)):
        raise ValidationError("scores must lie in [0, 1]")
    return vals
