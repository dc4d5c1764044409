import json

import numpy as np
import pytest

from exchange_mcmc import cli


def _small(**over):
    raw = {"name": "small", "model": {"family": "two-point"}, "prior": {"family": "default"}, "data": 1,
           "proposal": {"family": "swap"}, "algorithm": "both", "steps": 500,
           "checks": ["spectrum", "peskun", "variance-sandwich", "rejection-prob"]}
    raw.update(over)
    return cli.ExperimentConfig.from_dict(raw)


def test_list_catalog(capsys):
    entries = dict(cli.list_experiments())
    assert len(entries) >= 8
    assert "pinsker" in entries["ising-n2"].lower()
    assert "tail" in entries["poisson-gamma"].lower()
    assert cli.main(["list"]) == 0
    assert "two-point" in capsys.readouterr().out


def test_config_yaml_round_trip():
    for name in cli.CATALOG:
        cfg = cli.builtin_config(name, seed=3)
        back = cli.ExperimentConfig.from_yaml(cfg.to_yaml())
        assert back == cfg and back.seed == 3


@pytest.mark.parametrize("patch,path", [
    ({"algorithm": "gibbs"}, "algorithm"),
    ({"laziness": 0.0}, "laziness"),
    ({"steps": -1}, "steps"),
    ({"checks": ["peskun", "bogus"]}, "checks[1]"),
    ({"proposal": {"family": "teleport"}}, "proposal.family"),
    ({"grid": {"K": 1}}, "grid.K"),
    ({"colour": "red"}, "colour"),
])
def test_validation_reports_field_path(patch, path):
    with pytest.raises(cli.ConfigError) as exc:
        _small(**patch)
    assert exc.value.path == path and str(exc.value).startswith(path)


def test_missing_required_field():
    with pytest.raises(cli.ConfigError) as exc:
        cli.ExperimentConfig.from_dict({"name": "x", "model": {"family": "two-point"}, "prior": {"family": "default"}})
    assert exc.value.path == "proposal"


def test_builder_parameter_errors(tmp_path):
    cfg = _small(model={"family": "beta-binomial", "n": 10, "theta1": 0.2, "theta2": 0.8, "a": 2.0, "b": 3.0,
                        "c": 1.0}, data=4, proposal={"family": "grid-uniform"})
    with pytest.raises(cli.ConfigError) as exc:
        cli.build(cfg)
    assert exc.value.path.startswith("model")


def test_two_point_report(tmp_path):
    rep = cli.run_experiment(_small(), tmp_path, timestamp="t0")
    assert rep["passed"]
    pk = rep["checks"]["peskun"]
    np.testing.assert_allclose(pk["P_mh"], [[0, 1], [1, 0]], atol=1e-12)
    np.testing.assert_allclose(pk["P_exchange"], [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)
    assert pk["offdiag_margin"] == pytest.approx(0.5) and pk["diag_margin"] == pytest.approx(0.5)
    assert rep["checks"]["spectrum"]["tierney_M_ex_ge_M_mh"]
    for f in ("report.json", "summary.txt", "trace.csv", "trace_mh.csv"):
        assert (tmp_path / f).exists()
    assert "overall: PASS" in (tmp_path / "summary.txt").read_text()
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["checks"]["variance-sandwich"]["theta"]["mode"] == "left-only"


def test_exponential_gamma_rejection_table(tmp_path):
    cfg = cli.builtin_config("exponential-gamma")
    cfg.steps = 1000
    rep = cli.run_experiment(cfg, tmp_path, timestamp="t0")
    rej = rep["checks"]["rejection-prob"]
    np.testing.assert_allclose(rej["rejection"], [0.2204, 0.7192, 0.9475, 0.9924], atol=5e-4)
    assert rej["holds"] and rep["checks"]["non-negligibility"]["decay"] and rep["passed"]


def test_determinism(tmp_path):
    cfg = _small(steps=2000, algorithm="exchange", checks=["peskun"])
    cli.run_experiment(cfg, tmp_path / "a", timestamp="first")
    cli.run_experiment(cfg, tmp_path / "b", timestamp="second")
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra.pop("timestamp"), rb.pop("timestamp")
    assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_failing_check_gives_exit_one(tmp_path):
    cfg = cli.ExperimentConfig.from_dict({
        "name": "cauchy-tail", "model": {"family": "gaussian-location", "sigma_prior": 2.0},
        "prior": {"family": "default"}, "data": 1.0, "proposal": {"family": "cauchy-rw", "scale": 1.0},
        "steps": 10, "checks": ["tail"]})
    (tmp_path / "c.yaml").write_text(cfg.to_yaml())
    assert cli.main(["run", str(tmp_path / "c.yaml"), "--out-dir", str(tmp_path / "out")]) == 1
    rep = json.loads((tmp_path / "out" / "cauchy-tail" / "report.json").read_text())
    assert rep["checks"]["tail"]["proposal"]["finite"] is False


def test_main_config_errors(tmp_path, capsys):
    (tmp_path / "bad.yaml").write_text("name: x\nmodel: {family: two-point}\nprior: {family: default}\n"
                                       "proposal: {family: swap}\nalgorithm: gibbs\n")
    assert cli.main(["run", str(tmp_path / "bad.yaml")]) == 2
    assert "algorithm" in capsys.readouterr().err
    assert cli.main(["reproduce", "no-such-experiment"]) == 2
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_main_batch_run(tmp_path, capsys):
    for k in range(2):
        (tmp_path / f"c{k}.yaml").write_text(_small(name=f"s{k}", seed=k).to_yaml())
    code = cli.main(["run", str(tmp_path / "c0.yaml"), str(tmp_path / "c1.yaml"), "--threads", "2",
                     "--seed", "5", "--out-dir", str(tmp_path / "out")])
    assert code == 0
    for k in range(2):
        rep = json.loads((tmp_path / "out" / f"s{k}" / "report.json").read_text())
        assert rep["config"]["seed"] == 5
    assert "s0: PASS" in capsys.readouterr().out


def test_duplicate_names_rejected(tmp_path):
    (tmp_path / "c.yaml").write_text(_small().to_yaml())
    assert cli.main(["run", str(tmp_path / "c.yaml"), str(tmp_path / "c.yaml")]) == 2


def test_reproduce_verb(tmp_path):
    assert cli.main(["reproduce", "ergm-n4", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "ergm-n4" / "report.json").read_text())
    assert rep["status"]["peskun"] and rep["status"]["tv-modulus"]


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "exchange_mcmc", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "ising-n2" in res.stdout
