import json

import numpy as np
import pytest

from fou2.cli import main
from fou2.config import ConfigError, parse_config
from fou2.langevin import read_ensemble

BASE = {"schema_version": 1, "params": {"alpha": 0.8, "gamma": 0.9, "lambda": 0.7}}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_minimal():
    cfg = parse_config(BASE)
    assert cfg.params.lam == 0.7
    assert cfg.verify.tier == "quick"
    assert json.loads(cfg.to_json())["params"]["lambda"] == 0.7


@pytest.mark.parametrize(
    "patch",
    [
        {"schema_version": 2},
        {"extra": 1},
        {"params": {"alpha": 0.8, "gamma": 0.9, "lambda": 0.7, "beta": 1}},
        {"params": {"alpha": 0.8, "gamma": 0.9, "lam": 0.7}},
        {"params": {"alpha": 0.5, "gamma": 0.9, "lambda": 0.7}},
        {"params": {"alpha": "big", "gamma": 0.9, "lambda": 0.7}},
        {"eval": {"mode": "variance", "t": []}},
        {"eval": {"mode": "covariance", "t": [1.0], "s": []}},
        {"simulate": {"n_paths": 2.5}},
        {"simulate": {"seed": -1}},
        {"simulate": {"scheme": "euler"}},
        {"fpe": {"drift": {"kind": "harmonic"}}},
        {"fpe": {"t0": 1.0, "t1": 0.5}},
        {"verify": {"tier": "huge"}},
    ],
)
def test_bad_configs_rejected(patch):
    with pytest.raises(ConfigError):
        parse_config({**BASE, **patch})


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["eval", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["eval", "--config", str(tmp_path / "bad.json")]) == 2
    assert main(["eval", "--config", _write(tmp_path, BASE)]) == 2  # no eval block
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_eval_variance_csv(tmp_path):
    cfg = _write(tmp_path, {**BASE, "eval": {"mode": "variance", "t": [0.5, 1.0]}})
    out = tmp_path / "out"
    assert main(["eval", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "eval.csv").read_text().splitlines()
    assert lines[0].startswith("# fou2 ")
    assert json.loads(lines[0].split(" config ", 1)[1])["params"]["alpha"] == 0.8
    assert lines[1] == "t,sigma2_series,sigma2_quadrature,U_t,D_t"
    row = [float(v) for v in lines[3].split(",")]
    assert row[1] == pytest.approx(row[2], rel=1e-10)
    assert row[1] == pytest.approx(row[3], rel=1e-12)  # t = beta
    assert len(lines[3].split(",")[1].replace(".", "").lstrip("0")) >= 16


def test_eval_covariance_csv(tmp_path):
    cfg = _write(tmp_path, {**BASE, "eval": {"mode": "covariance", "t": [1.0, 2.0], "s": [0.5, 0.0]}})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "eval.csv").read_text().splitlines()
    assert lines[1] == "t,s,C_series,C_quadrature"
    assert [float(v) for v in lines[3].split(",")][2:] == [0.0, 0.0]


def test_eval_outside_window_is_numeric_failure(tmp_path):
    cfg = _write(tmp_path, {**BASE, "params": {"alpha": 0.8, "gamma": 0.9, "lambda": 3.0}, "eval": {"t": [400.0]}})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_simulate_outputs_and_seed_override(tmp_path):
    doc = {**BASE, "simulate": {"dt": 0.01, "n_steps": 50, "n_paths": 300, "seed": 4, "summary_stride": 10}}
    cfg = _write(tmp_path, doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    ens_a, cfg_a = read_ensemble(tmp_path / "a" / "ensemble.bin")
    ens_b, cfg_b = read_ensemble(tmp_path / "b" / "ensemble.bin")
    assert ens_a.seed == 4 and ens_b.seed == 5
    assert cfg_b["simulate"]["seed"] == 5
    assert not np.array_equal(ens_a.paths, ens_b.paths)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert [r["t"] for r in summary["rows"]] == pytest.approx([0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert summary["rows"][0]["flag"] == "n/a"


def test_simulate_single_path_has_no_error_bar(tmp_path):
    cfg = _write(tmp_path, {**BASE, "simulate": {"dt": 0.01, "n_steps": 10, "n_paths": 1, "csv": True}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "summary.json").read_text())["rows"]
    assert all(r["se"] is None and r["flag"] == "n/a" for r in rows)
    assert (tmp_path / "ensemble.csv").exists()


def test_simulate_capacity_is_usage_error(tmp_path, monkeypatch):
    monkeypatch.setenv("FOU2_MAX_CELLS", "100")
    cfg = _write(tmp_path, {**BASE, "simulate": {"dt": 0.01, "n_steps": 50, "n_paths": 10}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_threads_flag_validated(tmp_path):
    cfg = _write(tmp_path, {**BASE, "simulate": {"n_steps": 5, "n_paths": 2}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--threads", "0"]) == 2


def test_fpe_free(tmp_path):
    doc = {**BASE, "fpe": {"drift": {"kind": "free"}, "snapshots": [0.5, 1.0]}}
    assert main(["fpe", "--config", _write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "fpe_report.json").read_text())
    assert len(report["moments"]) == 2
    assert all(m["l1_vs_analytic"] < 1e-3 for m in report["moments"])
    assert report["max_mass_drift"] < 1e-6
    snap = (tmp_path / "fpe_snapshot_001.csv").read_text().splitlines()
    assert snap[1] == "x,P" and len(snap) == 2 + 801


def test_fpe_solver_failure_exit_3(tmp_path):
    doc = {**BASE, "fpe": {"drift": {"kind": "free"}, "n_x": 11}}
    assert main(["fpe", "--config", _write(tmp_path, doc), "--out", str(tmp_path)]) == 3
