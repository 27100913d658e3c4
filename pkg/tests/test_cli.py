import csv
import json
import os
import subprocess
import sys

import pytest

from ajcir import cli
from ajcir.errors import ValidationError

# independent coordinate subordinators with indices inside (alpha_k - 1, 1), b = 0
EXAMPLE_TOML = """
command = "condition-a"
seed = 5

[model]
m = 2
b = [0.0, 0.0]
beta = [[-1.0, 0.2], [0.3, -1.5]]
sigma = [1.0, 1.0]
alpha = [1.3, 1.7]

[model.levy]
variant = "coordinate_stable"
theta = [0.5, 0.8]
weight = [1.0, 1.0]
"""


def _body(path):
    return [ln for ln in open(path).read().splitlines()]


def _main(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr()


def test_condition_a_from_config(tmp_path, capsys):
    cfg = tmp_path / "ex.toml"
    cfg.write_text(EXAMPLE_TOML)
    code, out = _main(capsys, "condition-a", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    rep = json.loads((tmp_path / "o" / "condition_a.json").read_text())
    assert rep["overall"] is True
    assert "satisfied: True" in out.out
    rows = list(csv.DictReader(open(tmp_path / "o" / "condition_a.csv")))
    assert [round(float(r["vartheta_fit"]), 2) for r in rows] == [0.5, 0.8]


def test_invalid_input_exits_one(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert _main(capsys, "simulate", "--model", "reference2d", "--set", "n_paths=0",
                 "--out", out)[0] == 1
    assert _main(capsys, "simulate", "--model", "nope", "--out", out)[0] == 1
    assert _main(capsys, "simulate", "--out", out)[0] == 1
    assert _main(capsys, "simulate", "--model", "reference2d", "--set", "bogus=1",
                 "--out", out)[0] == 1
    assert _main(capsys, "simulate", "--config", str(tmp_path / "missing.toml"))[0] == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == 1


def test_numerical_failure_exits_two(tmp_path, capsys):
    # an unreachable tolerance turns the closed-form comparison into a failure
    code, out = _main(capsys, "riccati-check", "--set", "tolerance=1e-30",
                      "--out", str(tmp_path / "o"))
    assert code == 2
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["exit_status"] == 2 and "error" in man["summary"]


def test_riccati_check_passes_with_defaults(tmp_path, capsys):
    code, out = _main(capsys, "riccati-check", "--out", str(tmp_path / "o"))
    assert code == 0 and "passed: True" in out.out
    header = _body(tmp_path / "o" / "riccati.csv")[0].split(",")
    assert header[-2:] == ["closed_form", "rel_err"]


def test_runs_are_byte_identical_and_rerun_from_manifest(tmp_path, capsys):
    args = ["simulate", "--model", "reference2d", "--seed", "4", "--set", "n_paths=500",
            "--set", "record_times=[0.5, 1.0]", "--set", "char_probes=[[1, 0], [0, 1]]"]
    assert _main(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
    assert _main(capsys, *args, "--out", str(tmp_path / "b"), "--threads", "1")[0] == 0
    assert _main(capsys, "simulate", "--config", str(tmp_path / "a" / "manifest.json"),
                 "--out", str(tmp_path / "c"))[0] == 0
    for name in ("summary.csv", "char_check.csv", "ensemble.json"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert a == (tmp_path / "c" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config"]["seed"] == 4 and man["version"] == cli.__version__
    assert "started" in man and "summary.csv" in man["artifacts"]
    assert (tmp_path / "a" / "summary.txt").read_text().startswith("n_paths: 500")


def test_output_root_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "root"))
    assert _main(capsys, "condition-a", "--model", "boundary2d")[0] == 0
    assert (tmp_path / "root" / "condition-a" / "manifest.json").is_file()


def test_resolution_order(tmp_path):
    cfg = {"seed": 3, "model_preset": "reference2d", "simulate": {"n_paths": 7, "T": 2.0}}
    res = cli.resolve("simulate", cfg, [("n_paths", 9)], seed=None)
    assert res["seed"] == 3 and res["experiment"]["n_paths"] == 9
    assert res["experiment"]["T"] == 2.0
    res = cli.resolve("simulate", cfg, [], seed=11, model_preset="reference1d")
    assert res["seed"] == 11 and res["model"]["m"] == 1
    with pytest.raises(ValidationError):
        cli.resolve("simulate", {"command": "rates", "model_preset": "reference2d"})


def test_parse_override():
    assert cli.parse_override("eps=[0.2, 0.1]") == ("eps", [0.2, 0.1])
    assert cli.parse_override("keep=full") == ("keep", "full")
    assert cli.parse_override("n_paths = 10") == ("n_paths", 10)
    with pytest.raises(ValidationError):
        cli.parse_override("n_paths")


def test_model_file_reference(tmp_path, capsys):
    (tmp_path / "model.json").write_text(json.dumps({"model": cli.preset_dict("pure1d")}))
    (tmp_path / "run.toml").write_text('model_file = "model.json"\n')
    code, _ = _main(capsys, "riccati-check", "--config", str(tmp_path / "run.toml"),
                    "--out", str(tmp_path / "o"))
    assert code == 0


# -- plot data ----------------------------------------------------------------------

def _tidy_rows(path):
    return list(csv.DictReader(open(path)))


def test_plot_data_schemas(tmp_path, capsys):
    d = tmp_path / "art"
    d.mkdir()
    (d / "decay.csv").write_text("# seed=1\nt,tv,ci_low,ci_high,floor,in_fit\n"
                                 "1,0.5,0.4,0.6,0.01,1\n")
    (d / "density.csv").write_text("y0,value\n0,0.1\n0.5,0.2\n")
    (d / "rates.csv").write_text("eps,coord,moment,se\n0.1,0,0.2,0.01\n0.05,1,0.1,0.01\n")
    code, out = _main(capsys, "plot-data", str(d / "decay.csv"))
    assert code == 0
    rows = _tidy_rows(d / "plot_decay.csv")
    assert list(rows[0]) == ["series", "x", "y", "lo", "hi"]
    assert rows[0]["series"] == "TV" and float(rows[0]["lo"]) == 0.4
    cli.emit_plot_data(d / "density.csv", tmp_path / "plots")
    rows = _tidy_rows(tmp_path / "plots" / "plot_density.csv")
    assert [r["series"] for r in rows] == ["p_t", "p_t"] and float(rows[1]["y"]) == 0.2
    cli.emit_plot_data(d / "rates.csv")
    rows = _tidy_rows(d / "plot_rates.csv")
    assert rows[1]["series"] == "coord_1"
    assert float(rows[0]["x"]) == pytest.approx(-2.302585, abs=1e-6)


def test_plot_data_errors(tmp_path, capsys):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    assert _main(capsys, "plot-data", str(tmp_path / "x.csv"))[0] == 1
    assert _main(capsys, "plot-data", str(tmp_path / "none.csv"))[0] == 1


def test_console_script_entry_point(tmp_path):
    env = dict(os.environ, AJCIR_OUT=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "ajcir.cli", "--version"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0 and res.stdout.startswith("ajcir ")
