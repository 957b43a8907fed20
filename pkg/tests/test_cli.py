import json
import os

import pytest
from click.testing import CliRunner

from gluelab.cli import EXIT_CONFIG, EXIT_OK, load_config, main
from gluelab.errors import ConfigInvalid

BASE_TOML = """\
scenario = "FlatToy"
sweep = [0.125, 0.0625]
seed = 3
output_dir = "out"

[grid]
n_t = 64
h_tau = 0.0625
"""


@pytest.fixture()
def runner():
    return CliRunner()


def _write(tmp_path, text=BASE_TOML, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _invoke(runner, cmd, cfg_path):
    return runner.invoke(main, [cmd, "--config", cfg_path],
                         catch_exceptions=False)


def test_load_config_toml_and_json(tmp_path):
    cfg = load_config(_write(tmp_path))
    assert cfg.scenario == "FlatToy"
    assert cfg.sweep == [0.125, 0.0625]
    jpath = tmp_path / "run.json"
    jpath.write_text(json.dumps({"scenario": "FlatToy", "sweep": [0.25]}))
    assert load_config(str(jpath)).sweep == [0.25]


def test_load_config_rejects_bad_sweep(tmp_path):
    bad = BASE_TOML.replace("[0.125, 0.0625]", "[0.0625, 0.125]")
    with pytest.raises(ConfigInvalid):
        load_config(_write(tmp_path, bad))


def test_bad_config_exits_4(runner, tmp_path):
    path = _write(tmp_path, 'scenario = "NoSuchThing"\n')
    res = runner.invoke(main, ["preglue", "--config", path])
    assert res.exit_code == EXIT_CONFIG


def test_preglue_and_error_sweep(runner, tmp_path):
    path = _write(tmp_path)
    res = _invoke(runner, "preglue", path)
    assert res.exit_code == EXIT_OK
    assert os.path.exists(tmp_path / "out" / "preglue_grid.npz")
    res = _invoke(runner, "error-sweep", path)
    assert res.exit_code == EXIT_OK
    lines = (tmp_path / "out" / "error_sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# scenario=FlatToy schema=")
    assert lines[-1].startswith("slope,")


def test_error_sweep_deterministic(runner, tmp_path):
    path = _write(tmp_path)
    _invoke(runner, "error-sweep", path)
    first = (tmp_path / "out" / "error_sweep.csv").read_bytes()
    _invoke(runner, "error-sweep", path)
    assert (tmp_path / "out" / "error_sweep.csv").read_bytes() == first


def test_error_sweep_threaded_matches_serial(runner, tmp_path, monkeypatch):
    path = _write(tmp_path)
    _invoke(runner, "error-sweep", path)
    serial = (tmp_path / "out" / "error_sweep.csv").read_bytes()
    monkeypatch.setenv("GLUE_LAB_THREADS", "2")
    _invoke(runner, "error-sweep", path)
    assert (tmp_path / "out" / "error_sweep.csv").read_bytes() == serial


def test_inverse_check(runner, tmp_path):
    cfg = BASE_TOML + '\n[flags]\nprobes = 5\n'
    path = _write(tmp_path, cfg)
    res = _invoke(runner, "inverse-check", path)
    assert res.exit_code == EXIT_OK
    rep = json.loads((tmp_path / "out" / "inverse_check.json").read_text())
    assert rep["max_ratio"] < 0.5
    assert rep["schema"]


def test_newton_and_decay(runner, tmp_path):
    path = _write(tmp_path)
    res = _invoke(runner, "newton", path)
    assert res.exit_code == EXIT_OK
    rep = json.loads((tmp_path / "out" / "newton_report.json").read_text())
    assert rep["final_residual"] < 1e-10
    res = _invoke(runner, "decay", path)
    assert res.exit_code == EXIT_OK
    assert "sigma=" in res.output


def test_adia(runner, tmp_path):
    path = _write(tmp_path)
    res = _invoke(runner, "adia", path)
    assert res.exit_code == EXIT_OK
    rep = json.loads((tmp_path / "out" / "adia.json").read_text())
    assert len(rep["reports"]) == 2
    assert rep["reports"][1]["composite"] < rep["reports"][0]["composite"]


def test_cpn(runner, tmp_path):
    cfg = BASE_TOML.replace('"FlatToy"', '"CpnExample"')
    path = _write(tmp_path, cfg)
    res = _invoke(runner, "cpn", path)
    assert res.exit_code == EXIT_OK
    lines = (tmp_path / "out" / "cpn_sweep.csv").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header.split(",")[0] == "eps"


def test_transversality(runner, tmp_path):
    cfg = BASE_TOML + '\n[flags]\ntrials = 50\n'
    path = _write(tmp_path, cfg)
    res = _invoke(runner, "transversality", path)
    assert res.exit_code == EXIT_OK
    rep = json.loads(
        (tmp_path / "out" / "transversality.json").read_text())
    assert rep["dim_identity_mismatches"] == 0
