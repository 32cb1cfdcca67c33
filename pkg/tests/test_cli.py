import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from momentkit import cli

P1 = {"type": "projective", "m": 2}
SIGMA = [[[0, 1], [0, 0]], [[0, 0], [0, -1]]]


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run(tmp_path, cfg, *extra, command="run"):
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(write(tmp_path, cfg)), "--out", str(out), *extra])
    return code, out


def test_psi_report(tmp_path):
    cfg = {"scenarios": [{"kind": "psi", "name": "p1", "target": P1, "point": [[1, 0], [1, 0]], "s": SIGMA,
                          "ts": [0, 0.5, 1.0]}]}
    code, out = run(tmp_path, cfg, command="psi")
    assert code == 0
    (res,) = json.loads((out / "report.json").read_text())["results"]
    assert abs(res["value"] - 0.5 * np.log(np.cosh(2))) <= 1e-9
    rows = list(csv.reader(open(out / "p1_curve.csv")))
    assert rows[0] == ["t", "lambda_t", "psi"]
    assert float(rows[-1][2]) == pytest.approx(res["value"], abs=1e-9)
    assert float(rows[2][1]) == pytest.approx(np.tanh(1.0), abs=1e-12)


def test_filt_report(tmp_path):
    cfg = {"scenarios": [{"kind": "filt", "R": 2, "d": 0, "ranks": [1], "degrees": [-1], "taus": [1],
                          "subobjects": [{"rank": 1, "degree": -1, "meets": [1]}]}]}
    code, out = run(tmp_path, cfg, command="filt")
    (res,) = json.loads((out / "report.json").read_text())["results"]
    assert code == 0 and res["verdict"] == "StrictPass"
    assert res["c"] == "1/2" and res["bogomolov_residual"] == "1/1"
    assert res["equivalence"]["equivalent"] and res["z_coefficient"]["vanishes_at"] == "1/2"


def test_empty_scenarios(tmp_path):
    code, out = run(tmp_path, {"scenarios": []})
    assert code == 0
    assert json.loads((out / "report.json").read_text())["results"] == []


@pytest.mark.parametrize("cfg", [
    {"scenarios": [{"kind": "psi", "target": P1, "bogus": 1}]},
    {"scenarios": [{"kind": "nope"}]},
    {"scenarios": [], "extra": 1},
    {"scenarios": [{"kind": "vortex", "N": 16}]},
    {"scenarios": [{"kind": "psi", "target": {"type": "projective", "m": 2, "colour": 1}}]},
])
def test_validation_errors(tmp_path, cfg, capsys):
    code, out = run(tmp_path, cfg)
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["error"]["type"] == "ConfigError"
    assert json.loads(capsys.readouterr().out) == err


def test_subcommand_kind_mismatch(tmp_path):
    code, _ = run(tmp_path, {"scenarios": [{"kind": "filt", "R": 2, "d": 0}]}, command="psi")
    assert code == 2


def test_runtime_error_is_reported(tmp_path):
    cfg = {"scenarios": [{"kind": "psi", "target": P1, "point": [0, 0]}]}
    code, out = run(tmp_path, cfg)
    (res,) = json.loads((out / "report.json").read_text())["results"]
    assert code == 1 and not res["ok"] and res["error"]["type"] == "ValueError"


MIXED = {"seed": 3, "scenarios": [
    {"kind": "moment", "target": {"type": "grassmann", "m": 4, "k": 2}},
    {"kind": "weight", "target": {"type": "flag", "m": 4, "ranks": [1, 3]}, "samples": 2},
    {"kind": "psi", "target": {"type": "linear", "m": 3}},
    {"kind": "flow", "name": "fl", "target": {"type": "projective", "m": 3, "group": "torus"}},
    {"kind": "stability", "target": {"type": "grassmann", "m": 4, "k": 2, "group": "torus"}},
    {"kind": "vortex", "name": "vx", "N": 16, "d": 1, "c": 9.0, "dump": True, "max_iter": 300},
]}


def test_deterministic_reports(tmp_path):
    cfgp = write(tmp_path, MIXED)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["run", "--config", str(cfgp), "--out", str(a)]) in (0, 1)
    cli.main(["run", "--config", str(cfgp), "--out", str(b), "--jobs", "3"])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    cli.main(["run", "--config", str(cfgp), "--out", str(c), "--seed", "4"])
    assert (a / "report.json").read_bytes() != (c / "report.json").read_bytes()
    assert (a / "fl_trace.csv").read_text().startswith("iter,residual,psi_value,length_log")
    assert (a / "vx_state.bin").exists() and json.loads((a / "vx_state.json").read_text())["N"] == 16
    assert (a / "vx_trace.csv").exists()
    results = json.loads((a / "report.json").read_text())["results"]
    assert [r["kind"] for r in results] == [s["kind"] for s in MIXED["scenarios"]]


def test_module_entry_point(tmp_path):
    cfgp = write(tmp_path, {"scenarios": []})
    proc = subprocess.run([sys.executable, "-m", "momentkit", "run", "--config", str(cfgp),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
