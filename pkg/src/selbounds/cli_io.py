"""CSV/JSON input and output, run configuration and the command line.

Subcommands::

    evaluate      bounds on performance measures of a score column
    learn-bounds  fit bound functions on P(Y*=1 | X) and save them as JSON
    decide        max-min decisions from saved bound functions
    simulate      replication study on the synthetic design
    sweep         bounds over a grid of confounding strengths, with breakdown search

Exit status: 0 on success, 2 on invalid input or configuration, 3 when the
fractional-program denominator condition fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bounds_functions import FAMILIES as BOUND_FAMILIES
from .bounds_functions import BoundingSpec
from .core_data import (OVERALL, SUPPORTED_KINDS, Dataset, PerformanceSpec, ValidationError,
                        split_folds)
from .decisions import UtilitySpec, maxmin_rule, welfare_bounds
from .mu_bounds_learner import BoundRegressors, SmootherConfig, learn_mu_bounds
from .nuisance import LearnerConfig, cross_fit_nuisances
from .overall_perf import estimate_overall_bounds
from .positive_class import InfeasibleDenominator, estimate_class_bounds
from .simulation import (STUDY_LEARNER, DgpConfig, ExperimentConfig, LearnerStudyConfig, generate_dgp,
                         run_learner_study, run_regret_study, run_replications, train_score)

RESERVED = ("d", "y", "z", "y_proxy", "g", "score")


# ---------------------------------------------------------------------------
# CSV

def load_csv(path, require_score: bool = False):
    """Read a dataset CSV. Returns ``(Dataset, score column or None)``.

    Covariates are the columns prefixed ``x_`` (in header order); ``d`` and
    ``y`` are required; ``z``, ``y_proxy``, ``g`` and ``score`` are optional.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    pos = {h: i for i, h in enumerate(header)}
    for name in ("d", "y"):
        if name not in pos:
            raise ValidationError(f"{path}: missing required column '{name}'")
    if not xcols:
        raise ValidationError(f"{path}: no covariate columns (prefix 'x_')")
    if require_score and "score" not in pos:
        raise ValidationError(f"{path}: missing required column 'score'")
    if not rows:
        raise ValidationError(f"{path}: no data rows")

    def column(i, name):
        out = np.empty(len(rows))
        for r, row in enumerate(rows):
            try:
                out[r] = float(row[i])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}: row {r + 2}, column '{name}': "
                                      f"unparsable value") from None
        return out

    x = np.column_stack([column(i, header[i]) for i in xcols])
    opt = {k: column(pos[k], k) if k in pos else None for k in ("z", "y_proxy", "g", "score")}
    data = Dataset.from_arrays(x, column(pos["d"], "d"), column(pos["y"], "y"),
                               z=opt["z"], y_proxy=opt["y_proxy"], g=opt["g"])
    return data, opt["score"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, rows: Sequence[dict], columns: Optional[Sequence[str]] = None):
    """Write rows with a fixed column order and locale-independent number formatting."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def save_dataset_csv(path, data: Dataset, score=None):
    cols = [f"x_{j}" for j in range(data.dim)] + ["d", "y"]
    extra = [(k, getattr(data, k)) for k in ("z", "y_proxy", "g") if getattr(data, k) is not None]
    if score is not None:
        extra.append(("score", np.asarray(score, dtype=float)))
    cols += [k for k, _ in extra]
    rows = []
    for i in range(data.n):
        r = {f"x_{j}": float(data.x[i, j]) for j in range(data.dim)}
        r["d"] = int(data.d_sel[i])
        r["y"] = int(data.y_obs[i])
        for k, col in extra:
            r[k] = float(col[i]) if k == "score" else int(col[i])
        rows.append(r)
    write_csv(path, rows, cols)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    input: Optional[str] = None
    simulate: Optional[DgpConfig] = None
    bounding: BoundingSpec = field(default_factory=lambda: BoundingSpec.nonparametric(2 / 3, 3 / 2))
    estimands: tuple = (PerformanceSpec.mse(),)
    learner: Optional[LearnerConfig] = None  # None: package default, or the study default
    smoother: SmootherConfig = SmootherConfig()
    folds: int = 2
    seed: int = 0
    eps_clip: float = 0.01
    level: float = 0.95
    reps: int = 200
    n_grid: tuple = (1000,)
    study: str = "bounds"
    gamma_grid: tuple = (1.0, 1.25, 1.5, 1.75, 2.0)
    alpha_grid: Optional[tuple] = None
    breakdown: Optional[dict] = None
    out: str = "out"
    formats: tuple = ("csv", "json")

    def validate(self):
        if (self.input is None) == (self.simulate is None):
            raise ValidationError("config: exactly one of 'input' or 'simulate' is required")
        if self.folds < 2:
            raise ValidationError("folds: must be at least 2")
        if not 0 < self.eps_clip < 0.5:
            raise ValidationError("eps_clip: must lie in (0, 0.5)")
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ValidationError(f"formats: unsupported {sorted(bad)}")
        return self


def _at(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from None
    except TypeError as e:
        raise ValidationError(f"{path}: {e}") from None


def parse_estimand(obj, path="estimand") -> PerformanceSpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError(f"{path}: expected a kind name or an object with 'kind'")
    kind = obj["kind"]
    if kind not in SUPPORTED_KINDS or kind.startswith("custom"):
        supported = [k for k in SUPPORTED_KINDS if not k.startswith("custom")]
        raise ValidationError(f"{path}.kind: unknown kind '{kind}'; supported: {', '.join(supported)}")
    params = {}
    for k in ("tau", "r1", "r2"):
        if k in obj:
            params[k] = _number(obj[k], f"{path}.{k}")
    if kind.startswith("threshold") or kind in ("precision", "failure_rate", "accuracy"):
        if "tau" not in params:
            raise ValidationError(f"{path}.tau: required for kind '{kind}'")
    return _at(path, PerformanceSpec, kind, **params)


def _number(v, path) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: expected a number, got {v!r}") from None


def parse_bounding(obj, path="bounding") -> BoundingSpec:
    if isinstance(obj, str):
        obj = {"family": obj}
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValidationError(f"{path}: expected an object with 'family'")
    fam = obj["family"]
    try:
        BoundingSpec(fam, gamma_lo=1.0, gamma_hi=1.0, z=obj.get("z", 0))
    except ValidationError as e:
        if "unknown bounding family" in str(e):
            raise ValidationError(f"{path}.family: {e}") from None
    allowed = {"family", "gamma_lo", "gamma_hi", "z", "alpha"}
    extra = set(obj) - allowed
    if extra:
        raise ValidationError(f"{path}: unknown fields {sorted(extra)}")
    kw = {k: _number(obj[k], f"{path}.{k}") for k in ("gamma_lo", "gamma_hi", "alpha") if k in obj}
    if "z" in obj:
        kw["z"] = int(_number(obj["z"], f"{path}.z"))
    return _at(path, BoundingSpec, fam, **kw)


def _dataclass_from(cls, obj, path):
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected an object")
    names = {f.name for f in fields(cls)}
    extra = set(obj) - names
    if extra:
        raise ValidationError(f"{path}: unknown fields {sorted(extra)}")
    return _at(path, cls, **obj)


def config_from_dict(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ValidationError("config: expected a JSON object")
    known = {f.name for f in fields(RunConfig)} | {"estimand", "eps-clip"}
    extra = set(obj) - known
    if extra:
        raise ValidationError(f"config: unknown fields {sorted(extra)}")
    cfg = RunConfig()
    if "input" in obj:
        cfg.input = str(obj["input"])
    if "simulate" in obj:
        sim = obj["simulate"]
        if sim == "default":
            cfg.simulate = DgpConfig()
        else:
            cfg.simulate = _dataclass_from(DgpConfig, sim, "simulate")
    if "bounding" in obj:
        cfg.bounding = parse_bounding(obj["bounding"])
    est = obj.get("estimands", obj.get("estimand"))
    if est is not None:
        est = est if isinstance(est, list) else [est]
        cfg.estimands = tuple(parse_estimand(e, f"estimands[{i}]") for i, e in enumerate(est))
    if "learner" in obj:
        cfg.learner = _dataclass_from(LearnerConfig, obj["learner"], "learner")
    if "smoother" in obj:
        cfg.smoother = _dataclass_from(SmootherConfig, obj["smoother"], "smoother")
    for key, conv in (("folds", int), ("seed", int), ("eps_clip", float), ("level", float),
                      ("reps", int), ("study", str), ("out", str)):
        if key in obj:
            try:
                setattr(cfg, key, conv(obj[key]))
            except (TypeError, ValueError):
                raise ValidationError(f"{key}: invalid value {obj[key]!r}") from None
    for key in ("n_grid", "gamma_grid", "alpha_grid", "formats"):
        if key in obj:
            if not isinstance(obj[key], list):
                raise ValidationError(f"{key}: expected a list")
            conv = {"n_grid": int, "formats": str}.get(key, float)
            setattr(cfg, key, tuple(conv(v) for v in obj[key]))
    if "breakdown" in obj:
        cfg.breakdown = obj["breakdown"]
    if cfg.study not in ("bounds", "learners", "regret"):
        raise ValidationError("study: must be one of bounds, learners, regret")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"config: invalid JSON ({e})") from None
    return config_from_dict(obj)


def emit_report(rows: Sequence[dict], out_dir, name: str, formats=("csv", "json"),
                columns: Optional[Sequence[str]] = None) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out / f"{name}.csv"
        write_csv(p, rows, columns)
        written.append(p)
    if "json" in formats:
        p = out / f"{name}.json"
        clean = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                 for r in rows]
        p.write_text(json.dumps(clean, indent=2, sort_keys=True, default=_json_default) + "\n")
        written.append(p)
    return written


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# tasks

def _load_data(cfg: RunConfig, need_score: bool):
    if cfg.input is not None:
        data, score = load_csv(cfg.input, require_score=need_score)
        return data, score
    sim = generate_dgp(replace(cfg.simulate, seed=cfg.seed))
    score = train_score(cfg.simulate)(sim.dataset.x) if need_score else None
    return sim.dataset, score


def _bounds_rows(data, score, cfg: RunConfig, bounding: BoundingSpec, bundle):
    rows = []
    for spec in cfg.estimands:
        if spec.estimand_class == OVERALL:
            est = estimate_overall_bounds(data, score, spec, bounding, bundle, cfg.level)
        else:
            est = estimate_class_bounds(data, score, spec, bounding, bundle)
        row = {"estimand": spec.label, "family": bounding.family,
               "gamma_lo": bounding.gamma_lo, "gamma_hi": bounding.gamma_hi}
        row.update(est.as_row())
        rows.append(row)
    return rows


_BOUND_COLUMNS = ["estimand", "family", "gamma_lo", "gamma_hi", "n", "lower", "upper",
                  "se_lower", "se_upper", "ci_lower_lo", "ci_lower_hi", "ci_upper_lo",
                  "ci_upper_hi"]


def _nuisances(data, cfg: RunConfig, bounding):
    folds = split_folds(data.n, cfg.folds, cfg.seed)
    return cross_fit_nuisances(data, folds, replace(_learner(cfg), seed=cfg.seed), bounding,
                               eps=cfg.eps_clip)


def _learner(cfg: RunConfig, study: bool = False) -> LearnerConfig:
    if cfg.learner is not None:
        return cfg.learner
    return STUDY_LEARNER if study else LearnerConfig()


def run_evaluate(cfg: RunConfig) -> list:
    data, score = _load_data(cfg, need_score=True)
    bundle = _nuisances(data, cfg, cfg.bounding)
    rows = _bounds_rows(data, score, cfg, cfg.bounding, bundle)
    emit_report(rows, cfg.out, "bounds", cfg.formats, _BOUND_COLUMNS)
    return rows


def sweep_rows(data, score, cfg: RunConfig, bundle) -> list:
    rows = []
    for gt in cfg.gamma_grid:
        b = BoundingSpec.nonparametric(1 / gt, gt)
        for r in _bounds_rows(data, score, cfg, b, bundle):
            rows.append({"gamma": gt, "estimand": r["estimand"], "lower": r["lower"],
                         "upper": r["upper"]})
    return rows


def breakdown_gamma(interval_a, interval_b, lo: float = 1.0, hi: float = 5.0,
                    tol: float = 1e-3) -> Optional[float]:
    """Smallest ``gamma_hi`` in ``[lo, hi]`` at which two bound intervals overlap.

    ``interval_*`` map a gamma value to ``(lower, upper)``. Bisection assumes
    intervals widen with gamma. Returns ``None`` when they are still disjoint
    at ``hi``, and ``lo`` when they already overlap there.
    """
    def overlap(g):
        a, b = interval_a(g), interval_b(g)
        return a[0] <= b[1] and b[0] <= a[1]

    if overlap(lo):
        return lo
    if not overlap(hi):
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if overlap(mid):
            hi = mid
        else:
            lo = mid
    return hi


def alpha_sweep_rows(data, score, cfg: RunConfig, bundle) -> list:
    if cfg.bounding.family not in ("iv_smoothed", "proxy_general"):
        raise ValidationError("alpha_grid: needs bounding family iv_smoothed or proxy_general")
    rows = []
    for a in cfg.alpha_grid:
        b = replace(cfg.bounding, alpha=a)
        for r in _bounds_rows(data, score, cfg, b, bundle):
            rows.append({"alpha": a, "estimand": r["estimand"], "lower": r["lower"],
                         "upper": r["upper"]})
    return rows


def run_sweep(cfg: RunConfig) -> list:
    data, score = _load_data(cfg, need_score=True)
    if cfg.alpha_grid is not None:
        bundle = _nuisances(data, cfg, cfg.bounding)
        rows = alpha_sweep_rows(data, score, cfg, bundle)
        emit_report(rows, cfg.out, "sweep_alpha", cfg.formats, ["alpha", "estimand", "lower", "upper"])
        return rows
    bundle = _nuisances(data, cfg, BoundingSpec.unconfounded())
    rows = sweep_rows(data, score, cfg, bundle)
    emit_report(rows, cfg.out, "sweep", cfg.formats, ["gamma", "estimand", "lower", "upper"])
    if cfg.breakdown is not None:
        rows_bd = [_breakdown(data, score, cfg, bundle)]
        emit_report(rows_bd, cfg.out, "breakdown", cfg.formats)
    return rows


def _breakdown(data, score, cfg, bundle):
    bd = cfg.breakdown
    if not isinstance(bd, dict):
        raise ValidationError("breakdown: expected an object")
    spec_a = parse_estimand(bd.get("a", cfg.estimands[0].kind), "breakdown.a")
    bench = bd.get("benchmark")
    spec_b = None if bench is not None else parse_estimand(bd.get("b"), "breakdown.b")

    def interval(spec):
        def fn(gt):
            b = BoundingSpec.nonparametric(1 / gt, gt)
            if spec.estimand_class == OVERALL:
                e = estimate_overall_bounds(data, score, spec, b, bundle, None)
            else:
                e = estimate_class_bounds(data, score, spec, b, bundle)
            return e.lower, e.upper
        return fn

    other = (lambda g: (float(bench), float(bench))) if bench is not None else interval(spec_b)
    g = breakdown_gamma(interval(spec_a), other, float(bd.get("lo", 1.0)), float(bd.get("hi", 5.0)),
                        float(bd.get("tol", 1e-3)))
    return {"a": spec_a.label, "b": "benchmark" if spec_b is None else spec_b.label,
            "benchmark": bench, "breakdown_gamma": g}


def run_learn_bounds(cfg: RunConfig) -> BoundRegressors:
    data, _ = _load_data(cfg, need_score=False)
    fit = learn_mu_bounds(data, cfg.bounding, replace(_learner(cfg), seed=cfg.seed), cfg.smoother,
                          seed=cfg.seed, eps=cfg.eps_clip)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    text = fit.to_json()
    (out / "mu_bounds.json").write_text(text + "\n")
    x = data.x
    rows = [{"row": i, "lower": float(lo), "upper": float(hi)}
            for i, (lo, hi) in enumerate(zip(fit.predict_lo(x), fit.predict_hi(x)))]
    emit_report(rows, out, "mu_bounds_fitted", ("csv",), ["row", "lower", "upper"])
    return fit


def run_decide(bounds_path, data_path, utilities: UtilitySpec, out_dir) -> list:
    p = Path(bounds_path)
    if not p.exists():
        raise ValidationError(f"bounds file not found: {p}")
    fit = BoundRegressors.from_json(p.read_text()).clipped()
    data, _ = load_csv(data_path)
    rule = maxmin_rule(fit.predict_lo, fit.predict_hi, utilities, source=str(p))
    decisions = rule(data.x)
    lo, hi = fit.predict_lo(data.x), fit.predict_hi(data.x)
    rows = [{"row": i, "mu_lo": float(a), "mu_hi": float(b), "decision": int(c)}
            for i, (a, b, c) in enumerate(zip(lo, hi, decisions))]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "decisions.csv", rows, ["row", "mu_lo", "mu_hi", "decision"])
    (out / "rule.json").write_text(rule.to_json() + "\n")
    w_lo, w_hi = welfare_bounds(decisions, lo, hi, utilities, data.x)
    (out / "welfare.json").write_text(json.dumps({"welfare_lo": w_lo, "welfare_hi": w_hi},
                                                 sort_keys=True) + "\n")
    return rows


def run_simulate(cfg: RunConfig) -> list:
    dgp = cfg.simulate or DgpConfig()
    if cfg.study == "bounds":
        exp = ExperimentConfig(estimands=tuple(cfg.estimands), boundings=(cfg.bounding,),
                               n_grid=tuple(cfg.n_grid), reps=cfg.reps, folds=cfg.folds,
                               level=cfg.level, learner=_learner(cfg, True), dgp=dgp, seed=cfg.seed,
                               eps=cfg.eps_clip)
        rows = run_replications(exp)
        cols = ["estimand", "bounding", "n", "side", "reps", "failures", "truth",
                "mean_estimate", "mean_bias", "sd", "mean_se", "coverage"]
        emit_report(rows, cfg.out, "report", cfg.formats, cols)
        return rows
    study = LearnerStudyConfig(n_grid=tuple(cfg.n_grid), reps=cfg.reps, bounding=cfg.bounding,
                               dgp=dgp, learner=_learner(cfg, True), smoother=cfg.smoother, seed=cfg.seed,
                               eps=cfg.eps_clip)
    if cfg.study == "learners":
        rows = [{k: v for k, v in r.items() if k != "per_rep"} for r in run_learner_study(study)]
        emit_report(rows, cfg.out, "learners", cfg.formats,
                    ["n", "side", "method", "reps", "imse", "imse_se", "ratio_to_oracle"])
        return rows
    rows = run_regret_study(study)
    emit_report(rows, cfg.out, "regret", cfg.formats, ["n", "rep", "regret", "l2_bound"])
    return rows


# ---------------------------------------------------------------------------
# command line

def _parser():
    p = argparse.ArgumentParser(prog="selbounds", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON run configuration")
        if data:
            sp.add_argument("--data", help="input CSV (overrides config 'input')")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--folds", type=int)
        sp.add_argument("--eps-clip", type=float)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--out")
        sp.add_argument("--family", help=f"bound family: {', '.join(BOUND_FAMILIES)}")
        sp.add_argument("--gamma-lo", type=float)
        sp.add_argument("--gamma-hi", type=float)
        sp.add_argument("--z", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--estimand", action="append",
                        help="measure kind, optionally kind:tau or calibration:r1:r2")

    common(sub.add_parser("evaluate", help="bounds on performance of a score column"))
    common(sub.add_parser("learn-bounds", help="fit and save bound functions"))
    dp = sub.add_parser("decide", help="max-min decisions from saved bound functions")
    dp.add_argument("--bounds", required=True)
    dp.add_argument("--data", required=True)
    dp.add_argument("--utilities", help="JSON file with u11, u10, u00, u01")
    dp.add_argument("--out", default="out")
    sp = sub.add_parser("simulate", help="replication study on the synthetic design")
    common(sp, data=False)
    sp.add_argument("--study", choices=("bounds", "learners", "regret"))
    sw = sub.add_parser("sweep", help="bounds over a confounding-strength grid")
    common(sw)
    sw.add_argument("--gammas", help="comma-separated grid of gamma values")
    sw.add_argument("--alphas", help="comma-separated smoothing grid (iv_smoothed, proxy_general)")
    return p


def _parse_estimand_flag(text):
    parts = text.split(":")
    kind = parts[0]
    if kind == "calibration" and len(parts) == 3:
        return parse_estimand({"kind": kind, "r1": parts[1], "r2": parts[2]}, "--estimand")
    if len(parts) == 2:
        return parse_estimand({"kind": kind, "tau": parts[1]}, "--estimand")
    return parse_estimand(kind, "--estimand")


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "data", None):
        cfg.input, cfg.simulate = args.data, None
    for flag, attr in (("seed", "seed"), ("folds", "folds"), ("eps_clip", "eps_clip"),
                       ("reps", "reps"), ("out", "out")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, attr, v)
    if getattr(args, "family", None):
        b = {"family": args.family}
        for k in ("gamma_lo", "gamma_hi", "z", "alpha"):
            if getattr(args, k, None) is not None:
                b[k] = getattr(args, k)
        cfg.bounding = parse_bounding(b, "--family")
    if getattr(args, "estimand", None):
        cfg.estimands = tuple(_parse_estimand_flag(e) for e in args.estimand)
    if getattr(args, "study", None):
        cfg.study = args.study
    if getattr(args, "gammas", None):
        try:
            cfg.gamma_grid = tuple(float(v) for v in args.gammas.split(","))
        except ValueError:
            raise ValidationError("--gammas: expected comma-separated numbers") from None
    if getattr(args, "alphas", None):
        try:
            cfg.alpha_grid = tuple(float(v) for v in args.alphas.split(","))
        except ValueError:
            raise ValidationError("--alphas: expected comma-separated numbers") from None
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "decide":
            util = UtilitySpec.uniform()
            if args.utilities:
                path = Path(args.utilities)
                if not path.exists():
                    raise ValidationError(f"utilities file not found: {path}")
                util = _dataclass_from(UtilitySpec, json.loads(path.read_text()), "utilities")
            run_decide(args.bounds, args.data, util, args.out)
            return 0
        cfg = load_config(args.config) if args.config else RunConfig()
        if not args.config and args.command == "simulate":
            cfg.simulate = DgpConfig()
        cfg = _apply_flags(cfg, args)
        if args.command == "simulate" and cfg.simulate is None:
            cfg.simulate = DgpConfig()
        if args.command != "simulate":
            cfg.validate()
        {"evaluate": run_evaluate, "learn-bounds": run_learn_bounds, "simulate": run_simulate,
         "sweep": run_sweep}[args.command](cfg)
    except InfeasibleDenominator as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
