"""Welfare bounds, the max-min decision rule and regret.

Payoffs ``u11, u10, u00, u01`` are indexed by (decision, true outcome) and
normalised to sum to one at every x. Only bounds on P(Y*=1 | x) are needed:
the worst-case welfare of deciding 1 at x is ``u10 - (u11 + u10) * mu_hi``
and of deciding 0 is ``(u00 + u01) * mu_lo - u00``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core_data import ValidationError


@dataclass(frozen=True)
class UtilitySpec:
    """Constant payoffs, or per-record arrays when evaluating on a fixed sample."""

    u11: object = 0.25
    u10: object = 0.25
    u00: object = 0.25
    u01: object = 0.25

    def __post_init__(self):
        parts = [np.asarray(v, dtype=float) for v in (self.u11, self.u10, self.u00, self.u01)]
        if any(np.any(p < 0) for p in parts):
            raise ValidationError("payoffs must be nonnegative")
        if not np.allclose(sum(parts), 1.0, atol=1e-9):
            raise ValidationError("payoffs must sum to one")

    @classmethod
    def uniform(cls):
        return cls()

    def arrays(self, n: int):
        return tuple(np.broadcast_to(np.asarray(v, dtype=float), (n,))
                     for v in (self.u11, self.u10, self.u00, self.u01))

    def to_dict(self) -> dict:
        def enc(v):
            a = np.asarray(v, dtype=float)
            return float(a) if a.ndim == 0 else a.tolist()
        return {k: enc(getattr(self, k)) for k in ("u11", "u10", "u00", "u01")}


def welfare_bounds(decide, mu_lo, mu_hi, utilities: UtilitySpec, x_eval):
    """``(U_lo, U_hi)`` of a rule over an evaluation sample.

    ``decide``, ``mu_lo`` and ``mu_hi`` are callables of covariates or
    precomputed arrays aligned with ``x_eval``.
    """
    x = np.atleast_2d(np.asarray(x_eval, dtype=float))
    n = x.shape[0]
    d = _values(decide, x)
    lo, hi = _values(mu_lo, x), _values(mu_hi, x)
    u11, u10, u00, u01 = utilities.arrays(n)
    w_lo = (u10 - (u11 + u10) * hi) * d + (-u00 + (u00 + u01) * lo) * (1 - d)
    w_hi = (u10 - (u11 + u10) * lo) * d + (-u00 + (u00 + u01) * hi) * (1 - d)
    return float(np.mean(w_lo)), float(np.mean(w_hi))


def _values(f, x):
    if callable(f):
        return np.asarray(f(x), dtype=float)
    v = np.asarray(f, dtype=float)
    if v.shape != (x.shape[0],):
        raise ValidationError("array input is not aligned with the evaluation sample")
    return v


@dataclass(frozen=True, eq=False)
class ThresholdRule:
    """``decide(x) = 1{(u11+u10) mu_hi(x) + (u00+u01) mu_lo(x) <= u10 + u00}``.

    Bound functions are clipped into [0, 1] before use.
    """

    mu_lo: Callable
    mu_hi: Callable
    utilities: UtilitySpec
    source: Optional[str] = None  # path of the serialised bound regressors

    def score(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u11, u10, u00, u01 = self.utilities.arrays(x.shape[0])
        lo = np.clip(_values(self.mu_lo, x), 0, 1)
        hi = np.clip(_values(self.mu_hi, x), 0, 1)
        return (u11 + u10) * hi + (u00 + u01) * lo - (u10 + u00)

    def __call__(self, x):
        return (self.score(x) <= 0).astype(float)

    def to_json(self) -> str:
        return json.dumps({"rule": "maxmin_threshold", "utilities": self.utilities.to_dict(),
                           "bounds": self.source}, sort_keys=True)


def maxmin_rule(mu_lo, mu_hi, utilities: UtilitySpec, source: Optional[str] = None) -> ThresholdRule:
    """Rule maximising worst-case welfare given bound functions on P(Y*=1 | x)."""
    return ThresholdRule(mu_lo, mu_hi, utilities, source)


def regret(decide, true_mu_lo, true_mu_hi, utilities: UtilitySpec, x_eval) -> float:
    """Worst-case welfare lost relative to the max-min rule at the true bounds."""
    if true_mu_lo is None or true_mu_hi is None:
        raise ValidationError("regret needs the true bound functions")
    best = maxmin_rule(true_mu_lo, true_mu_hi, utilities)
    u_best, _ = welfare_bounds(best, true_mu_lo, true_mu_hi, utilities, x_eval)
    u_rule, _ = welfare_bounds(decide, true_mu_lo, true_mu_hi, utilities, x_eval)
    return u_best - u_rule
