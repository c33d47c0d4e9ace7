import csv
import json

import numpy as np
import pytest

from selbounds.cli_io import (breakdown_gamma, config_from_dict, load_csv, main, parse_bounding,
                              save_dataset_csv, write_csv)
from selbounds.core_data import ValidationError
from selbounds.simulation import DgpConfig, generate_dgp


def _write(path, text):
    path.write_text(text)
    return path


def test_load_two_rows(tmp_path):
    p = _write(tmp_path / "a.csv", "x_0,x_1,d,y\n0.1,0.2,1,1\n0.3,0.4,0,0\n")
    data, score = load_csv(p)
    assert data.n == 2 and data.dim == 2 and score is None


def test_non_binary_outcome(tmp_path):
    p = _write(tmp_path / "a.csv", "x_0,d,y\n0.1,1,2\n0.3,0,0\n")
    with pytest.raises(ValidationError, match="binary"):
        load_csv(p)


def test_missing_column(tmp_path):
    p = _write(tmp_path / "a.csv", "x_0,d\n0.1,1\n")
    with pytest.raises(ValidationError, match="'y'"):
        load_csv(p)


def test_unparsable_value(tmp_path):
    p = _write(tmp_path / "a.csv", "x_0,d,y\n0.1,1,1\nabc,0,0\n")
    with pytest.raises(ValidationError, match="row 3, column 'x_0'"):
        load_csv(p)


def test_round_trip(tmp_path):
    sim = generate_dgp(DgpConfig(n=200, d=5, d_pi=2, d_mu=3, seed=1, proxy_q=0.8, group=True))
    score = np.random.default_rng(0).random(200)
    save_dataset_csv(tmp_path / "d.csv", sim.dataset, score)
    data, s = load_csv(tmp_path / "d.csv", require_score=True)
    a = sim.dataset
    assert np.allclose(data.x, a.x, atol=1e-12, rtol=0) and np.allclose(s, score, atol=1e-12)
    assert data.records() == a.records()
    assert np.array_equal(data.y_proxy, a.y_proxy) and np.array_equal(data.g, a.g)


def test_minimal_config_runs(tmp_path):
    raw = {"simulate": {"n": 400, "d": 5, "d_pi": 2, "d_mu": 3}, "estimand": "mse",
           "bounding": {"family": "nonparametric", "gamma_lo": 0.6667, "gamma_hi": 1.5},
           "out": str(tmp_path / "o")}
    cfg = config_from_dict(raw)
    (tmp_path / "c.json").write_text(json.dumps(raw))
    assert cfg.bounding.gamma_hi == 1.5
    assert main(["evaluate", "--config", str(tmp_path / "c.json")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "bounds.csv").open()))
    assert rows[0]["estimand"] == "mse" and float(rows[0]["lower"]) <= float(rows[0]["upper"])
    assert json.loads((tmp_path / "o" / "bounds.json").read_text())[0]["estimand"] == "mse"


def test_unknown_family_lists_supported():
    with pytest.raises(ValidationError) as err:
        parse_bounding({"family": "rosenbaum"})
    msg = str(err.value)
    assert "bounding.family" in msg and "nonparametric" in msg and "iv_smoothed" in msg


def test_field_path_messages():
    with pytest.raises(ValidationError, match=r"estimands\[1\].tau"):
        config_from_dict({"estimands": ["mse", {"kind": "threshold_tpr"}]})
    with pytest.raises(ValidationError, match="bounding.gamma_hi"):
        config_from_dict({"bounding": {"family": "nonparametric", "gamma_lo": 1,
                                       "gamma_hi": "big"}})


def test_gamma_sweep_widens(tmp_path):
    out = tmp_path / "o"
    sim = generate_dgp(DgpConfig(n=800, d=5, d_pi=2, d_mu=3, seed=3))
    save_dataset_csv(tmp_path / "d.csv", sim.dataset, sim.truth.mu1(sim.dataset.x))
    rc = main(["sweep", "--data", str(tmp_path / "d.csv"), "--seed", "3",
               "--gammas", "1,1.25,1.5,2", "--estimand", "mse",
               "--estimand", "threshold_tpr:0.5", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    for kind in ("mse", "threshold_tpr@0.5"):
        sub = [r for r in rows if r["estimand"] == kind]
        lo = [float(r["lower"]) for r in sub]
        hi = [float(r["upper"]) for r in sub]
        assert all(a >= b - 1e-12 for a, b in zip(lo, lo[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(hi, hi[1:]))


def test_breakdown_gamma():
    grow = lambda c: (lambda g: (c - (g - 1), c + (g - 1)))
    assert breakdown_gamma(grow(0.0), grow(1.0)) == pytest.approx(1.5, abs=1e-3)
    assert breakdown_gamma(grow(0.0), grow(0.0)) == 1.0
    assert breakdown_gamma(grow(0.0), grow(100.0)) is None


def test_exit_code_validation(tmp_path, capsys):
    rc = main(["evaluate", "--family", "rosenbaum", "--out", str(tmp_path)])
    assert rc == 2
    assert "supported" in capsys.readouterr().err


def test_exit_code_infeasible(tmp_path):
    rng = np.random.default_rng(0)
    rows = [{"x_0": float(v), "d": int(i % 10 < 7), "y": 0, "score": float(rng.random())}
            for i, v in enumerate(rng.normal(size=200))]
    write_csv(tmp_path / "inf.csv", rows, ["x_0", "d", "y", "score"])
    with pytest.warns(RuntimeWarning):
        rc = main(["evaluate", "--data", str(tmp_path / "inf.csv"), "--family", "nonparametric",
                   "--gamma-lo", "0.5", "--gamma-hi", "0.5", "--estimand", "threshold_tpr:0.5",
                   "--out", str(tmp_path / "o")])
    assert rc == 3


def test_learn_and_decide(tmp_path):
    sim = generate_dgp(DgpConfig(n=400, d=5, d_pi=2, d_mu=3, seed=2))
    save_dataset_csv(tmp_path / "d.csv", sim.dataset)
    assert main(["learn-bounds", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "b")]) == 0
    util = tmp_path / "u.json"
    util.write_text(json.dumps({"u11": 0.4, "u10": 0.1, "u00": 0.3, "u01": 0.2}))
    assert main(["decide", "--bounds", str(tmp_path / "b" / "mu_bounds.json"), "--data",
                 str(tmp_path / "d.csv"), "--utilities", str(util), "--out", str(tmp_path / "r")]) == 0
    dec = list(csv.DictReader((tmp_path / "r" / "decisions.csv").open()))
    assert len(dec) == 400 and {r["decision"] for r in dec} <= {"0", "1"}
    w = json.loads((tmp_path / "r" / "welfare.json").read_text())
    assert w["welfare_lo"] <= w["welfare_hi"]
    util.write_text(json.dumps({"u11": 0.4, "u10": 0.4, "u00": 0.3, "u01": 0.2}))
    assert main(["decide", "--bounds", str(tmp_path / "b" / "mu_bounds.json"), "--data",
                 str(tmp_path / "d.csv"), "--utilities", str(util), "--out", str(tmp_path / "r")]) == 2


def test_simulate_is_byte_identical(tmp_path):
    args = ["simulate", "--study", "bounds", "--reps", "3", "--seed", "5", "--estimand", "mse"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"simulate": {"d": 6, "d_pi": 3, "d_mu": 4}, "n_grid": [300],
                               "learner": {"family": "logistic", "penalty_grid": None}}))
    for name in ("a", "b"):
        assert main(args + ["--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "report.csv").read_bytes()
    assert a == (tmp_path / "b" / "report.csv").read_bytes()
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
