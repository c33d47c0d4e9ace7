"""Debiased bounds on overall performance and overall group disparities.

An overall measure has the form ``E[beta0 + beta1 * Y*]``. Its upper bound
picks, record by record, the upper confounding term where ``beta1 > 0`` and
the lower one where ``beta1 <= 0``; the lower bound does the opposite.
Averaging the per-record terms gives the estimate, and their covariance
gives Wald intervals for each endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from .bounds_functions import BoundingSpec, eif_mu, pseudo_bound_terms
from .core_data import OVERALL, Dataset, PerformanceSpec, ValidationError, beta_arrays, score_column


@dataclass(frozen=True, eq=False)
class BoundsEstimate:
    lower: float
    upper: float
    per_obs_lower: Optional[np.ndarray]
    per_obs_upper: Optional[np.ndarray]
    cov: Optional[np.ndarray]  # ordered (upper, lower)
    n: int
    ci_lower: Optional[Tuple[float, float]] = None
    ci_upper: Optional[Tuple[float, float]] = None
    level: Optional[float] = None
    fold_values: Optional[tuple] = None
    swapped_boxes: int = 0

    @property
    def se_lower(self) -> Optional[float]:
        return None if self.cov is None else float(np.sqrt(self.cov[1, 1] / self.n))

    @property
    def se_upper(self) -> Optional[float]:
        return None if self.cov is None else float(np.sqrt(self.cov[0, 0] / self.n))

    def as_row(self) -> dict:
        row = {"lower": self.lower, "upper": self.upper, "n": self.n}
        if self.cov is not None:
            row.update(se_lower=self.se_lower, se_upper=self.se_upper)
        if self.ci_lower is not None:
            row.update(ci_lower_lo=self.ci_lower[0], ci_lower_hi=self.ci_lower[1],
                       ci_upper_lo=self.ci_upper[0], ci_upper_hi=self.ci_upper[1])
        return row


def estimate_covariance(per_obs_lower, per_obs_upper) -> np.ndarray:
    """``(1/n) sum`` of centred outer products of ``(upper_i, lower_i)``."""
    lo = np.asarray(per_obs_lower, dtype=float)
    hi = np.asarray(per_obs_upper, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValidationError("per-record terms must be equal-length vectors")
    if lo.size < 2:
        raise ValidationError("covariance needs at least two records")
    m = np.stack([hi - hi.mean(), lo - lo.mean()])
    cov = m @ m.T / lo.size
    return (cov + cov.T) / 2


def confidence_intervals(est: BoundsEstimate, level: float = 0.95) -> BoundsEstimate:
    """Per-endpoint Wald intervals ``point +/- z * sqrt(var / n)``."""
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    if est.cov is None:
        raise ValidationError("estimate has no covariance")
    q = norm.ppf(1 - (1 - level) / 2)
    hw_u = q * np.sqrt(max(est.cov[0, 0], 0.0) / est.n)
    hw_l = q * np.sqrt(max(est.cov[1, 1], 0.0) / est.n)
    return replace(est, ci_upper=(est.upper - hw_u, est.upper + hw_u),
                   ci_lower=(est.lower - hw_l, est.lower + hw_l), level=level)


def overall_terms(beta0, beta1, phi_mu, ell, u):
    """Per-record (lower, upper) terms of the overall-performance bounds."""
    pos = beta1 > 0
    up = beta0 + beta1 * phi_mu + beta1 * np.where(pos, u, ell)
    lo = beta0 + beta1 * phi_mu + beta1 * np.where(pos, ell, u)
    return lo, up


def _from_terms(lo, up, level) -> BoundsEstimate:
    est = BoundsEstimate(float(np.mean(lo)), float(np.mean(up)), lo, up,
                         estimate_covariance(lo, up), lo.size)
    return confidence_intervals(est, level) if level is not None else est


def _check_overall(spec: PerformanceSpec):
    if spec.estimand_class != OVERALL:
        raise ValidationError(f"'{spec.kind}' is not an overall performance measure")


def estimate_overall_bounds(data: Dataset, score, spec: PerformanceSpec, bounding: BoundingSpec,
                            bundle, level: Optional[float] = 0.95,
                            aux: Optional[float] = None) -> BoundsEstimate:
    """Bounds on ``E[beta0 + beta1 Y*]`` from cross-fitted nuisances.

    ``score`` is a callable of covariates or a column aligned with ``data``.
    Bin probabilities of calibration/precision kinds default to the empirical
    share and are treated as fixed in the covariance.
    """
    _check_overall(spec)
    s = score_column(score, data.x)
    b0, b1 = beta_arrays(spec, s, aux=aux)
    ell, u = pseudo_bound_terms(data, bounding, bundle)
    lo, up = overall_terms(b0, b1, eif_mu(data, bundle), ell, u)
    return _from_terms(lo, up, level)


def estimate_overall_disparity_bounds(data: Dataset, score, spec: PerformanceSpec,
                                      bounding: BoundingSpec, bundle,
                                      group_prob: Optional[float] = None,
                                      level: Optional[float] = 0.95) -> BoundsEstimate:
    """Bounds on ``perf(group 1) - perf(group 0)`` for an overall measure.

    ``group_prob`` is P(G=1); the empirical share is used when omitted. For
    calibration/precision kinds the bin share is computed within each group.
    """
    _check_overall(spec)
    if data.g is None:
        raise ValidationError("group column 'g' required")
    g = data.g.astype(float)
    if g.min() == g.max():
        raise ValidationError("both groups must be present")
    p1 = float(g.mean()) if group_prob is None else float(group_prob)
    if not 0 < p1 < 1:
        raise ValidationError("group probability must lie in (0, 1)")
    s = score_column(score, data.x)
    b0 = np.empty(data.n)
    b1 = np.empty(data.n)
    for grp in (0, 1):
        at = data.g == grp
        b0[at], b1[at] = beta_arrays(spec, s[at])
    weight = g / p1 - (1 - g) / (1 - p1)
    t0, t1 = weight * b0, weight * b1
    ell, u = pseudo_bound_terms(data, bounding, bundle)
    phi = eif_mu(data, bundle)
    # group 1 takes the upper term where beta1 >= 0, group 0 where beta1 <= 0
    nu_hi = g * (b1 >= 0) + (1 - g) * (b1 <= 0)
    nu_lo = 1 - nu_hi
    up = t0 + t1 * phi + t1 * (nu_hi * u + nu_lo * ell)
    lo = t0 + t1 * phi + t1 * (nu_lo * u + nu_hi * ell)
    return _from_terms(lo, up, level)
