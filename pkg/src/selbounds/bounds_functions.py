"""Confounding-function bound families and their influence-function terms.

Notation used in names: ``mu1`` is P(Y*=1 | D=1, X), ``pi1`` is P(D=1 | X),
``mu_tilde0`` is P(proxy=1 | D=0, X), ``gamma1`` is P(Y* = proxy | D=1, X),
``lam[z]`` is E[Y D | X, Z=z], ``kappa[z]`` is P(D=0 | X, Z=z) and ``pz[z]``
is P(Z=z | X). The confounding function is
``delta(x) = P(Y*=1 | D=0, x) - mu1(x)`` so that
``P(Y*=1 | x) = mu1(x) + pi0(x) * delta(x)``.

Every ``eif_*`` function returns the uncentered efficient influence function
of the named functional, one value per record, evaluated at the cross-fitted
nuisances in a :class:`~selbounds.nuisance.NuisanceBundle`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_data import Dataset, ValidationError
from .nuisance import kappa_key, lam_key, pz_key

FAMILIES = ("unconfounded", "worst_case", "nonparametric", "proxy_simple",
            "proxy_general", "iv_fixed", "iv_smoothed")

_ALIASES = {
    "none": "unconfounded",
    "worstcase": "worst_case",
    "nonparametric_outcome": "nonparametric",
    "proxy": "proxy_simple",
    "iv": "iv_fixed",
}


@dataclass(frozen=True)
class BoundingSpec:
    """Which bound family restricts the confounding function, with its parameters.

    ``gamma_lo``/``gamma_hi`` apply to ``nonparametric``; ``z`` to ``iv_fixed``;
    ``alpha`` (smoothing sharpness) to ``iv_smoothed`` and ``proxy_general``.
    ``alpha=None`` means ``20 / range`` of the smoothed arguments.
    """

    family: str
    gamma_lo: float = 1.0
    gamma_hi: float = 1.0
    z: Optional[int] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        fam = _ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ValidationError(
                f"unknown bounding family '{self.family}'; supported: {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", fam)
        if fam == "nonparametric":
            if not (self.gamma_lo > 0 and self.gamma_hi >= self.gamma_lo):
                raise ValidationError("nonparametric bounds need 0 < gamma_lo <= gamma_hi")
        if fam == "iv_fixed" and self.z is None:
            raise ValidationError("iv_fixed needs an instrument value z")
        if self.alpha is not None and not self.alpha > 0:
            raise ValidationError("alpha must be positive")

    @classmethod
    def unconfounded(cls):
        return cls("unconfounded")

    @classmethod
    def worst_case(cls):
        return cls("worst_case")

    @classmethod
    def nonparametric(cls, gamma_lo, gamma_hi):
        return cls("nonparametric", gamma_lo=float(gamma_lo), gamma_hi=float(gamma_hi))

    @classmethod
    def proxy_simple(cls):
        return cls("proxy_simple")

    @classmethod
    def proxy_general(cls, alpha=None):
        return cls("proxy_general", alpha=alpha)

    @classmethod
    def iv_fixed(cls, z):
        return cls("iv_fixed", z=int(z))

    @classmethod
    def iv_smoothed(cls, alpha=None):
        return cls("iv_smoothed", alpha=alpha)

    @property
    def is_proxy(self) -> bool:
        return self.family.startswith("proxy")

    @property
    def is_iv(self) -> bool:
        return self.family.startswith("iv")

    def required_nuisances(self) -> tuple:
        if self.is_proxy:
            return ("proxy",)
        if self.is_iv:
            return ("instrument",)
        return ()

    def instrument_values(self, data: Dataset) -> tuple:
        if not self.is_iv:
            return ()
        if data.z is None:
            raise ValidationError("instrument required (column 'z')")
        if self.family == "iv_fixed":
            if self.z not in data.z_support:
                raise ValidationError(f"instrument value {self.z} not in support {data.z_support}")
            return (self.z,)
        return data.z_support

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.family == "nonparametric":
            out.update(gamma_lo=self.gamma_lo, gamma_hi=self.gamma_hi)
        if self.z is not None:
            out["z"] = self.z
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


# ---------------------------------------------------------------------------
# smooth max / min

def _anchor(v, alpha, axis):
    # max for alpha > 0, min for alpha < 0, so alpha * (v - anchor) <= 0
    return np.max(v, axis=axis, keepdims=True) if alpha > 0 else np.min(v, axis=axis, keepdims=True)


def lse(values, alpha: float, axis: int = -1):
    """``(1/alpha) log sum exp(alpha v)`` along ``axis``.

    Positive ``alpha`` approximates the max from above, negative ``alpha`` the
    min from below. The shift is taken in ``v`` space, so the largest term is
    exactly one and the sandwich bounds hold in floating point too.
    """
    if alpha == 0:
        raise ValidationError("alpha must be nonzero")
    v = np.asarray(values, dtype=float)
    m = _anchor(v, alpha, axis)
    s = np.sum(np.exp(alpha * (v - m)), axis=axis)
    return np.squeeze(m, axis=axis) + np.log(s) / alpha


def lse_grad(values, alpha: float, axis: int = -1):
    """Gradient of :func:`lse`: the softmax of ``alpha v`` (nonnegative, sums to one)."""
    v = np.asarray(values, dtype=float)
    e = np.exp(alpha * (v - _anchor(v, alpha, axis)))
    return e / np.sum(e, axis=axis, keepdims=True)


def default_alpha(args) -> float:
    """``20 / range`` of the arguments being smoothed (20 for a degenerate range)."""
    a = np.asarray(args, dtype=float)
    spread = float(np.max(a) - np.min(a)) if a.size else 0.0
    return 20.0 / spread if spread > 1e-12 else 20.0


def _smooth_abs(v, alpha):
    """Smooth ``|v|`` as ``lse((v, -v))`` and its derivative ``tanh(alpha v)``."""
    stacked = np.stack([v, -v], axis=-1)
    return lse(stacked, alpha), np.tanh(alpha * v)


# ---------------------------------------------------------------------------
# influence-function terms

def _dy(data: Dataset):
    return data.d_sel.astype(float), data.y_obs.astype(float)


def _proxy(data: Dataset):
    if data.y_proxy is None:
        raise ValidationError("proxy outcome required (column 'y_proxy')")
    return data.y_proxy.astype(float)


def eif_mu(data: Dataset, bundle) -> np.ndarray:
    """E[mu1(X)]: ``mu1 + D/pi1 (Y - mu1)``."""
    d, y = _dy(data)
    mu1, pi1 = bundle["mu1"], bundle["pi1"]
    return mu1 + d / pi1 * (y - mu1)


def eif_pi_mu(data: Dataset, bundle) -> np.ndarray:
    """E[pi0(X) mu1(X)]."""
    d, y = _dy(data)
    mu1, pi1 = bundle["mu1"], bundle["pi1"]
    pi0 = 1.0 - pi1
    return ((1 - d) - pi0) * mu1 + d / pi1 * (y - mu1) * pi0 + pi0 * mu1


def _agreement(data: Dataset):
    _, y = _dy(data)
    yp = _proxy(data)
    return y * yp + (1 - y) * (1 - yp)


def _residual_gamma(data, bundle):
    d, _ = _dy(data)
    return d / bundle["pi1"] * (_agreement(data) - bundle["gamma1"])


def _residual_mu_tilde(data, bundle):
    d, _ = _dy(data)
    return (1 - d) / (1 - bundle["pi1"]) * (_proxy(data) - bundle["mu_tilde0"])


def eif_mu_tilde(data: Dataset, bundle) -> np.ndarray:
    """E[mu_tilde0(X)]."""
    return bundle["mu_tilde0"] + _residual_mu_tilde(data, bundle)


def eif_gamma(data: Dataset, bundle) -> np.ndarray:
    """E[gamma1(X)]: ``gamma1 + D/pi1 (agree - gamma1)`` with ``agree = 1{Y = proxy}``."""
    return bundle["gamma1"] + _residual_gamma(data, bundle)


def eif_pi_mu_tilde(data: Dataset, bundle) -> np.ndarray:
    """E[pi0(X) mu_tilde0(X)]."""
    d, _ = _dy(data)
    pi0 = 1 - bundle["pi1"]
    mt = bundle["mu_tilde0"]
    return pi0 * mt + ((1 - d) - pi0) * mt + _residual_mu_tilde(data, bundle) * pi0


def eif_pi_gamma(data: Dataset, bundle) -> np.ndarray:
    """E[pi0(X) gamma1(X)]."""
    d, _ = _dy(data)
    pi0 = 1 - bundle["pi1"]
    g1 = bundle["gamma1"]
    return pi0 * g1 + ((1 - d) - pi0) * g1 + _residual_gamma(data, bundle) * pi0


def _instrument(data: Dataset):
    if data.z is None:
        raise ValidationError("instrument required (column 'z')")
    return data.z


def eif_lambda(data: Dataset, bundle, z) -> np.ndarray:
    """E[lam_z(X)] where lam_z(x) = E[Y D | X=x, Z=z]."""
    d, y = _dy(data)
    at = (_instrument(data) == z).astype(float)
    lam = bundle[lam_key(z)]
    return at / bundle[pz_key(z)] * (y * d - lam) + lam


def eif_kappa(data: Dataset, bundle, z) -> np.ndarray:
    """E[kappa_z(X)] where kappa_z(x) = P(D=0 | X=x, Z=z)."""
    d, _ = _dy(data)
    at = (_instrument(data) == z).astype(float)
    kap = bundle[kappa_key(z)]
    return at / bundle[pz_key(z)] * ((1 - d) - kap) + kap


def _z_values(data, bundle):
    zs = bundle.z_values or data.z_support
    if not zs:
        raise ValidationError("instrument required (column 'z')")
    return zs


def iv_arguments(bundle, z_values):
    """Per-z plug-in arguments of the smoothed max (lower) and min (upper), on the pi0*delta scale."""
    mu1 = bundle["mu1"]
    lo = np.stack([bundle[lam_key(z)] - mu1 for z in z_values], axis=-1)
    hi = np.stack([bundle[kappa_key(z)] + bundle[lam_key(z)] - mu1 for z in z_values], axis=-1)
    return lo, hi


def eif_iv_bounds(data: Dataset, bundle, alpha: Optional[float] = None):
    """Influence terms for the smoothed intersection of instrument bounds on ``pi0 * delta``.

    Returns ``(phi_lo, phi_hi)``. The lower side smooths the max over z of
    ``lam_z - mu1`` with ``lse(., alpha)``; the upper side smooths the min of
    ``kappa_z + lam_z - mu1`` with ``lse(., -alpha)``. Each term is the plug-in
    smooth bound plus softmax-weighted influence residuals.
    """
    zs = _z_values(data, bundle)
    lo_args, hi_args = iv_arguments(bundle, zs)
    a_lo = default_alpha(lo_args) if alpha is None else alpha
    a_hi = default_alpha(hi_args) if alpha is None else alpha
    phi_mu_res = eif_mu(data, bundle) - bundle["mu1"]
    lam_res = np.stack([eif_lambda(data, bundle, z) - bundle[lam_key(z)] for z in zs], axis=-1)
    kap_res = np.stack([eif_kappa(data, bundle, z) - bundle[kappa_key(z)] for z in zs], axis=-1)
    w_lo = lse_grad(lo_args, a_lo)
    w_hi = lse_grad(hi_args, -a_hi)
    phi_lo = lse(lo_args, a_lo) + np.sum(w_lo * (lam_res - phi_mu_res[:, None]), axis=-1)
    phi_hi = lse(hi_args, -a_hi) + np.sum(
        w_hi * (kap_res + lam_res - phi_mu_res[:, None]), axis=-1)
    return phi_lo, phi_hi


def check_proxy_simple_validity(bundle) -> bool:
    """Warn when the simple proxy bounds' conditions fail on average."""
    g1 = float(np.mean(bundle["gamma1"]))
    mt = float(np.mean(bundle["mu_tilde0"]))
    ok = mt <= g1 and mt + g1 <= 1.0
    if not ok:
        warnings.warn(
            f"simple proxy conditions fail on average (mean mu_tilde0={mt:.3f}, "
            f"mean gamma1={g1:.3f}); consider family 'proxy_general'",
            RuntimeWarning, stacklevel=3)
    return ok


def _proxy_general_pieces(data, bundle, alpha):
    """Smoothed levels of ``|1 - g1 - mt|`` and ``1 - |g1 - mt|`` plus their
    first-order influence corrections (delta scale, not yet weighted)."""
    g1, mt = bundle["gamma1"], bundle["mu_tilde0"]
    v_lo = 1 - g1 - mt
    v_hi = g1 - mt
    a_lo = default_alpha(np.concatenate([v_lo, -v_lo])) if alpha is None else alpha
    a_hi = default_alpha(np.concatenate([v_hi, -v_hi])) if alpha is None else alpha
    h_lo, dh_lo = _smooth_abs(v_lo, a_lo)
    h_hi, dh_hi = _smooth_abs(v_hi, a_hi)
    r_g = _residual_gamma(data, bundle)
    r_m = _residual_mu_tilde(data, bundle)
    return h_lo, dh_lo * (-r_g - r_m), 1 - h_hi, -dh_hi * (r_g - r_m)


def pseudo_bound_terms(data: Dataset, spec: BoundingSpec, bundle):
    """Per-record ``(ell, u)`` whose means estimate the endpoints of E[pi0(X) delta(X)]."""
    fam = spec.family
    d, _ = _dy(data)
    if fam == "unconfounded":
        z = np.zeros(data.n)
        return z, z.copy()
    if fam == "nonparametric":
        p = eif_pi_mu(data, bundle)
        return (spec.gamma_lo - 1) * p, (spec.gamma_hi - 1) * p
    if fam == "worst_case":
        p = eif_pi_mu(data, bundle)
        return -p, (1 - d) - p
    if fam == "proxy_simple":
        check_proxy_simple_validity(bundle)
        pg, pm, pmu = (eif_pi_gamma(data, bundle), eif_pi_mu_tilde(data, bundle),
                       eif_pi_mu(data, bundle))
        return (1 - d) - pg - pm - pmu, (1 - d) - pg + pm - pmu
    if fam == "proxy_general":
        lvl_lo, cor_lo, lvl_hi, cor_hi = _proxy_general_pieces(data, bundle, spec.alpha)
        pi0 = 1 - bundle["pi1"]
        pmu = eif_pi_mu(data, bundle)
        return (1 - d) * lvl_lo + pi0 * cor_lo - pmu, (1 - d) * lvl_hi + pi0 * cor_hi - pmu
    if fam == "iv_fixed":
        pmu = eif_mu(data, bundle)
        pl = eif_lambda(data, bundle, spec.z)
        return pl - pmu, eif_kappa(data, bundle, spec.z) + pl - pmu
    if fam == "iv_smoothed":
        return eif_iv_bounds(data, bundle, spec.alpha)
    raise ValidationError(f"unsupported bounding family '{fam}'")


def positive_class_box(data: Dataset, spec: BoundingSpec, bundle):
    """Terms of the per-record fractional program: base ``phi_mu``, weight and box.

    The free term enters as ``phi_mu + weight * t`` with ``lo <= t <= hi``.
    Outcome and proxy families bound ``delta`` directly and use weight
    ``1 - D``; instrument families bound ``pi0 * delta`` and use weight one.
    """
    fam = spec.family
    d, _ = _dy(data)
    pmu = eif_mu(data, bundle)
    w = 1 - d
    if fam == "unconfounded":
        lo = hi = np.zeros(data.n)
    elif fam == "nonparametric":
        lo, hi = (spec.gamma_lo - 1) * pmu, (spec.gamma_hi - 1) * pmu
    elif fam == "worst_case":
        lo, hi = -pmu, 1 - pmu
    elif fam == "proxy_simple":
        check_proxy_simple_validity(bundle)
        pg, pm = eif_gamma(data, bundle), eif_mu_tilde(data, bundle)
        lo, hi = 1 - pg - pm - pmu, 1 - pg + pm - pmu
    elif fam == "proxy_general":
        lvl_lo, cor_lo, lvl_hi, cor_hi = _proxy_general_pieces(data, bundle, spec.alpha)
        lo, hi = lvl_lo + cor_lo - pmu, lvl_hi + cor_hi - pmu
    else:
        lo, hi = pseudo_bound_terms(data, spec, bundle)
        w = np.ones(data.n)
    return pmu, w, lo, hi


def confounding_bounds_at(spec: BoundingSpec, nuis: dict):
    """Plug-in ``(delta_lo, delta_hi)`` from nuisance values at covariate points.

    ``nuis`` maps nuisance names (``mu1``, ``pi1``, ``gamma1``, ``mu_tilde0``,
    ``lam[z]``, ``kappa[z]``) to arrays or scalars.
    """
    def need(name):
        if name not in nuis:
            raise ValidationError(f"nuisance '{name}' is missing")
        return np.asarray(nuis[name], dtype=float)

    fam = spec.family
    mu1 = need("mu1")
    if fam == "unconfounded":
        return np.zeros_like(mu1), np.zeros_like(mu1)
    if fam == "nonparametric":
        return (spec.gamma_lo - 1) * mu1, (spec.gamma_hi - 1) * mu1
    if fam == "worst_case":
        return -mu1, 1 - mu1
    if fam == "proxy_simple":
        g1, mt = need("gamma1"), need("mu_tilde0")
        return 1 - g1 - mt - mu1, 1 - g1 + mt - mu1
    if fam == "proxy_general":
        g1, mt = need("gamma1"), need("mu_tilde0")
        return np.abs(1 - g1 - mt) - mu1, 1 - np.abs(g1 - mt) - mu1
    pi0 = 1 - need("pi1")
    if fam == "iv_fixed":
        lam, kap = need(lam_key(spec.z)), need(kappa_key(spec.z))
        return (lam - mu1) / pi0, (kap + lam - mu1) / pi0
    zs = sorted(int(k[4:-1]) for k in nuis if k.startswith("lam["))
    if not zs:
        raise ValidationError("instrument nuisances are missing")
    lo_args = np.stack([need(lam_key(z)) - mu1 for z in zs], axis=-1)
    hi_args = np.stack([need(kappa_key(z)) + need(lam_key(z)) - mu1 for z in zs], axis=-1)
    a_lo = default_alpha(lo_args) if spec.alpha is None else spec.alpha
    a_hi = default_alpha(hi_args) if spec.alpha is None else spec.alpha
    return lse(lo_args, a_lo) / pi0, lse(hi_args, -a_hi) / pi0
