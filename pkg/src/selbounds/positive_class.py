"""Bounds on positive- and negative-class performance.

Positive-class measures are ratios ``E[beta0 Y*] / E[Y*]``, so their bounds
solve a linear-fractional program per fold::

    max / min   sum_i beta0_i (a_i + w_i t_i) / sum_i (a_i + w_i t_i)
    subject to  lo_i <= t_i <= hi_i

An optimum sits at a box vertex whose "high" set is an upper (or lower)
tail of the records sorted by ``beta0``, so scanning the ``n + 1`` cut
points of each orientation with prefix sums is exact and O(n log n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .bounds_functions import BoundingSpec, positive_class_box
from .core_data import (NEGATIVE, POSITIVE, Dataset, PerformanceSpec, ValidationError,
                        beta_arrays, score_column)
from .overall_perf import BoundsEstimate

TOL_DEN = 1e-8


class InfeasibleDenominator(ValueError):
    """No vertex candidate has a denominator above the tolerance."""


@dataclass(frozen=True, eq=False)
class LfpInstance:
    a: np.ndarray
    w: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    beta0: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(v, dtype=float) for v in (self.a, self.w, self.lo, self.hi, self.beta0)]
        n = arrs[0].shape
        if any(v.shape != n for v in arrs) or len(n) != 1:
            raise ValidationError("LFP instance arrays must be equal-length vectors")
        for name, v in zip(("a", "w", "lo", "hi", "beta0"), arrs):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def ratio(self, t) -> float:
        c = self.a + self.w * np.asarray(t, dtype=float)
        return float(np.sum(self.beta0 * c) / np.sum(c))


@dataclass(frozen=True, eq=False)
class LfpSolution:
    value: float
    threshold_index: int
    orientation: str  # "ascending": records at or above the cut take the larger contribution
    chosen_delta: np.ndarray
    swapped: int = 0


def negative_instance(inst: LfpInstance) -> LfpInstance:
    """Rewrite a positive-class program as its negative-class counterpart.

    ``E[beta0 (1 - Y*)] / E[1 - Y*]`` uses the base ``1 - a`` and weight ``-w``
    on the same box.
    """
    return LfpInstance(1.0 - inst.a, -inst.w, inst.lo, inst.hi, inst.beta0)


def solve_fold_lfp(inst: LfpInstance, direction: str = "max",
                   tol_den: float = TOL_DEN) -> LfpSolution:
    """Exact optimum of the box-constrained linear-fractional program."""
    if direction not in ("max", "min"):
        raise ValidationError("direction must be 'max' or 'min'")
    n = inst.n
    if n == 0:
        raise ValidationError("empty LFP instance")
    lo, hi = inst.lo, inst.hi
    flip = lo > hi
    swapped = int(flip.sum())
    lo, hi = np.where(flip, hi, lo), np.where(flip, lo, hi)
    c_lo = inst.a + inst.w * lo
    c_hi = inst.a + inst.w * hi
    small = np.minimum(c_lo, c_hi)
    big = np.maximum(c_lo, c_hi)

    order = np.argsort(inst.beta0, kind="stable")
    b = inst.beta0[order]
    s, g = small[order], big[order]
    zero = np.zeros(1)
    ps_num = np.concatenate([zero, np.cumsum(b * s)])
    pg_num = np.concatenate([zero, np.cumsum(b * g)])
    ps_den = np.concatenate([zero, np.cumsum(s)])
    pg_den = np.concatenate([zero, np.cumsum(g)])
    # cut t: positions < t take one end, positions >= t take the other
    asc_num = ps_num + (pg_num[-1] - pg_num)
    asc_den = ps_den + (pg_den[-1] - pg_den)
    desc_num = pg_num + (ps_num[-1] - ps_num)
    desc_den = pg_den + (ps_den[-1] - ps_den)

    best = None
    for orient, num, den in (("ascending", asc_num, asc_den), ("descending", desc_num, desc_den)):
        ok = den > tol_den
        if not ok.any():
            continue
        vals = np.where(ok, num / np.where(ok, den, 1.0), np.nan)
        t = int(np.nanargmax(vals) if direction == "max" else np.nanargmin(vals))
        v = float(vals[t])
        better = best is None or (v > best[0] if direction == "max" else v < best[0])
        if better:
            best = (v, t, orient)
    if best is None:
        raise InfeasibleDenominator("denominator condition violated")
    value, t, orient = best

    upper_tail = np.zeros(n, dtype=bool)
    upper_tail[order[t:]] = True
    take_big = upper_tail if orient == "ascending" else ~upper_tail
    big_is_hi = c_hi >= c_lo
    use_hi = np.where(take_big, big_is_hi, ~big_is_hi)
    delta = np.where(use_hi, hi, lo)
    return LfpSolution(value, t, orient, delta, swapped)


# ---------------------------------------------------------------------------

def _class_beta0(spec: PerformanceSpec, s, want: str):
    if spec.estimand_class != want:
        raise ValidationError(f"'{spec.kind}' is not a {want}-class performance measure")
    b0, _ = beta_arrays(spec, s)
    return b0


def _fold_programs(data, bounding, bundle, beta0, rows_mask=None):
    a, w, lo, hi = positive_class_box(data, bounding, bundle)
    folds = bundle.folds
    out = []
    for k in range(folds.K):
        m = folds.fold_of == k
        if rows_mask is not None:
            m = m & rows_mask
        if not m.any():
            raise ValidationError(f"fold {k} has no records for this estimand")
        out.append(LfpInstance(a[m], w[m], lo[m], hi[m], beta0[m]))
    return out


def _solve_folds(instances, negative: bool):
    ups, lows, swapped = [], [], 0
    for inst in instances:
        if negative:
            inst = negative_instance(inst)
        hi = solve_fold_lfp(inst, "max")
        lo = solve_fold_lfp(inst, "min")
        ups.append(hi.value)
        lows.append(lo.value)
        swapped += hi.swapped
    return ups, lows, swapped


def _class_bounds(data, score, spec, bounding, bundle, want, rows_mask=None):
    s = score_column(score, data.x)
    beta0 = _class_beta0(spec, s, want)
    programs = _fold_programs(data, bounding, bundle, beta0, rows_mask)
    ups, lows, swapped = _solve_folds(programs, want == NEGATIVE)
    n = data.n if rows_mask is None else int(rows_mask.sum())
    return BoundsEstimate(float(np.mean(lows)), float(np.mean(ups)), None, None, None, n,
                          fold_values=(tuple(lows), tuple(ups)), swapped_boxes=swapped)


def estimate_positive_class_bounds(data: Dataset, score, spec: PerformanceSpec,
                                   bounding: BoundingSpec, bundle) -> BoundsEstimate:
    """Fold-averaged bounds on ``E[beta0 | Y* = 1]`` (point bounds, no covariance)."""
    return _class_bounds(data, score, spec, bounding, bundle, POSITIVE)


def estimate_negative_class_bounds(data: Dataset, score, spec: PerformanceSpec,
                                   bounding: BoundingSpec, bundle) -> BoundsEstimate:
    """Fold-averaged bounds on ``E[beta0 | Y* = 0]``."""
    return _class_bounds(data, score, spec, bounding, bundle, NEGATIVE)


def estimate_class_bounds(data, score, spec, bounding, bundle) -> BoundsEstimate:
    """Dispatch on the measure's class (positive or negative)."""
    want = spec.estimand_class
    if want not in (POSITIVE, NEGATIVE):
        raise ValidationError(f"'{spec.kind}' is not a class-conditional measure")
    return _class_bounds(data, score, spec, bounding, bundle, want)


def positive_class_disparity_bounds(data: Dataset, score, spec: PerformanceSpec,
                                    bounding: BoundingSpec, bundle) -> BoundsEstimate:
    """Non-sharp bounds on the group-1 minus group-0 class-conditional measure."""
    if data.g is None:
        raise ValidationError("group column 'g' required")
    want = spec.estimand_class
    if want not in (POSITIVE, NEGATIVE):
        raise ValidationError(f"'{spec.kind}' is not a class-conditional measure")
    g1 = _class_bounds(data, score, spec, bounding, bundle, want, data.g == 1)
    g0 = _class_bounds(data, score, spec, bounding, bundle, want, data.g == 0)
    return BoundsEstimate(g1.lower - g0.upper, g1.upper - g0.lower, None, None, None, data.n,
                          fold_values=(g0.fold_values, g1.fold_values),
                          swapped_boxes=g0.swapped_boxes + g1.swapped_boxes)


def bootstrap_class_bounds(data, score, spec, bounding, bundle, B: int = 200, seed=0):
    """Heuristic bootstrap standard errors of class-conditional bounds.

    Records are resampled within folds with the nuisance predictions held
    fixed. No asymptotic guarantee backs these numbers; treat them as a
    rough spread indicator. Returns ``(se_lower, se_upper)``.
    """
    rng = np.random.default_rng(seed)
    want = spec.estimand_class
    s = score_column(score, data.x)
    beta0 = _class_beta0(spec, s, want)
    programs = _fold_programs(data, bounding, bundle, beta0)
    draws = np.empty((B, 2))
    for r in range(B):
        resampled = []
        for p in programs:
            i = rng.integers(0, p.n, p.n)
            resampled.append(LfpInstance(p.a[i], p.w[i], p.lo[i], p.hi[i], p.beta0[i]))
        ups, lows, _ = _solve_folds(resampled, want == NEGATIVE)
        draws[r] = np.mean(lows), np.mean(ups)
    sd = draws.std(axis=0, ddof=1)
    return float(sd[0]), float(sd[1])


def roc_bounds(data: Dataset, score, thresholds: Sequence[float], bounding: BoundingSpec,
               bundle) -> list:
    """Per-threshold bound boxes on the true and false positive rates."""
    taus = np.asarray(thresholds, dtype=float)
    if taus.size == 0 or np.any(np.diff(taus) < 0) or taus.min() < 0 or taus.max() > 1:
        raise ValidationError("thresholds must be a sorted grid inside [0, 1]")
    rows = []
    for tau in taus:
        tpr = estimate_positive_class_bounds(data, score, PerformanceSpec.threshold_tpr(tau),
                                             bounding, bundle)
        fpr = estimate_negative_class_bounds(data, score, PerformanceSpec.threshold_fpr(tau),
                                             bounding, bundle)
        rows.append({"tau": float(tau), "tpr_lo": tpr.lower, "tpr_hi": tpr.upper,
                     "fpr_lo": fpr.lower, "fpr_hi": fpr.upper})
    return rows


def auc_from_curve(points, which: str = "lo") -> float:
    """Trapezoid-rule area under a bound ROC curve.

    ``which='lo'`` pairs the lowest TPR with the highest FPR at each threshold
    (pessimistic curve); ``'hi'`` pairs the highest TPR with the lowest FPR.
    The points (0, 0) and (1, 1) are appended.
    """
    if which not in ("lo", "hi"):
        raise ValidationError("which must be 'lo' or 'hi'")
    if which == "lo":
        xy = [(p["fpr_hi"], p["tpr_lo"]) for p in points]
    else:
        xy = [(p["fpr_lo"], p["tpr_hi"]) for p in points]
    xy = np.array(sorted(xy + [(0.0, 0.0), (1.0, 1.0)]))
    return float(trapezoid(xy[:, 1], xy[:, 0]))
