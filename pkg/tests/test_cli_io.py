import io as stdio
import json
import math

import numpy as np
import pytest

from agechemostat import io
from agechemostat.cli import main
from agechemostat.errors import ConfigError
from agechemostat.model import tothkot_model


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(tothkot_model(2.0, 2.0, 1.0, 0.2, 2.0, n_age=801).to_dict()))
    return path


@pytest.fixture
def initial_file(tmp_path):
    path = tmp_path / "initial.json"
    path.write_text(json.dumps({"S0": 1.2, "profile": {"family": "equilibrium", "scale": 1.5}}))
    return path


def test_float_round_trip(tmp_path):
    values = np.array([math.pi, 1e-300, -2.5e17, 1 / 3])
    io.write_csv_file(tmp_path / "x.csv", ("v",), [values])
    assert np.array_equal(io.read_csv(tmp_path / "x.csv")["v"], values)
    doc = json.loads(io.dumps_report({"x": 1 / 3, "bad": math.inf}))
    assert doc["schema_version"] == io.SCHEMA_VERSION and doc["x"] == 1 / 3 and doc["bad"] is None


def test_csv_header_and_bools():
    buf = stdio.StringIO()
    io.write_csv(buf, ("a", "flag"), [[1.0, 2.0], [True, False]])
    assert buf.getvalue() == "a,flag\n1,1\n2,0\n"


def test_read_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        io.read_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        io.read_json(tmp_path / "bad.json")


def test_equilibrium_command(model_file, capsys):
    assert main(["equilibrium", str(model_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema_version"] == 1
    assert doc["S_star"] == pytest.approx(1.6, rel=1e-10)
    assert set(doc) >= {"f_star0", "kr", "qr", "theta", "kappa1", "kappa2"}


def test_missing_model_is_usage_error(tmp_path, capsys):
    assert main(["equilibrium", str(tmp_path / "nope.json")]) == 2
    assert main(["simulate"]) == 2
    assert main(["frobnicate"]) == 2


def test_unknown_model_field_is_usage_error(tmp_path):
    doc = tothkot_model(2.0, 2.0, 1.0, 0.2, 2.0).to_dict()
    doc["temperature"] = 300
    (tmp_path / "m.json").write_text(json.dumps(doc))
    assert main(["equilibrium", str(tmp_path / "m.json")]) == 2


def test_washout_is_domain_error(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps(tothkot_model(2.0, 2.0, 1.0, 0.2, 1.0).to_dict()))
    assert main(["equilibrium", str(tmp_path / "m.json")]) == 1


def test_simulate_then_lyapunov(model_file, initial_file, tmp_path, capsys):
    out = tmp_path / "run"
    argv = ["simulate", str(model_file), str(initial_file), "--horizon", "2", "--stride", "10",
            "--snapshots", "--fd-neighbors", "--assert-bounds", "--out", str(out)]
    assert main(argv) == 0
    traj = io.read_csv(out / "trajectory.csv")
    assert list(traj) == ["t", "S", "mass", "kf", "qf", "x"]
    run = json.loads((out / "run.json").read_text())
    assert run["schema_version"] == 1 and run["bounds"]["ok"]

    first = (out / "trajectory.csv").read_bytes()
    assert main(argv) == 0
    assert (out / "trajectory.csv").read_bytes() == first

    (tmp_path / "w.json").write_text(json.dumps({"sigma": 0.6, "B": 0.01, "Gamma": 0.5, "M": 2.0}))
    table_path = tmp_path / "lyap.csv"
    assert main(["lyapunov", str(out / "trajectory.csv"), "--model", str(model_file),
                 "--weights", str(tmp_path / "w.json"), "--out", str(table_path)]) == 0
    table = io.read_csv(table_path)
    assert list(table)[:7] == ["t", "V", "Q", "Psi", "E", "U", "U_fd"]
    assert table["t"].size == run["steps"] // 10 + 1
    inner = ~np.isnan(table["U_fd"])
    assert np.max(np.abs(table["U_fd"][inner] - table["U"][inner])) < 0.05 * np.max(np.abs(table["U"]))


def test_lyapunov_needs_weights(model_file, initial_file, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(model_file), str(initial_file), "--horizon", "0.5", "--snapshots",
                 "--out", str(out)]) == 0
    assert main(["lyapunov", str(out / "trajectory.csv"), "--model", str(model_file)]) == 2


def test_certify_recipe(model_file, capsys):
    assert main(["certify", str(model_file), "--recipe"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["feasible"] and doc["conditions"]["matrix"]["status"] == "pass"
    assert len(doc["derived"]["P"]) == 3


def test_certify_recipe_below_threshold(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(tothkot_model(2.0, 2.0, 1.0, 0.1, 2.0, n_age=401).to_dict()))
    assert main(["certify", str(tmp_path / "m.json"), "--recipe"]) == 1
    assert "infeasible" in capsys.readouterr().err


def test_scan_csv(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["scan", "--L", "1", "--k-tilde", "2", "--Y", "2", "--D-min", "0.0625", "--D-max", "0.25",
                 "--points", "8", "--n-age", "401", "--out", str(out)]) == 0
    first = out.read_bytes()
    assert first.splitlines()[0] == b"D,recipe_feasible,cond_4_9,cond_4_10"
    table = io.read_csv(out)
    assert np.array_equal(table["recipe_feasible"], table["cond_4_9"])
    assert main(["scan", "--L", "1", "--k-tilde", "2", "--Y", "2", "--D-min", "0.0625", "--D-max", "0.25",
                 "--points", "8", "--n-age", "401", "--out", str(out)]) == 0
    assert out.read_bytes() == first
    assert main(["scan", "--L", "1", "--k-tilde", "2", "--Y", "2", "--D-min", "0.3", "--D-max", "0.2"]) == 2


def test_tothkot_report(tmp_path):
    out = tmp_path / "report.json"
    argv = ["tothkot", "--Y", "2", "--k-tilde", "2", "--L", "1", "--D", "0.2", "--S-in", "2",
            "--n-age", "4001", "--horizon", "20", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["threshold_4_9"] == 0.125 and doc["threshold_4_10"] == 0.0625
    assert doc["certificate"]["feasible"] and doc["decay"]["monotone"]
    assert doc["decay"]["V0"] > doc["decay"]["V_horizon"]
    first = out.read_bytes()
    assert main(argv) == 0 and out.read_bytes() == first


def test_tothkot_below_threshold(tmp_path, capsys):
    argv = ["tothkot", "--Y", "2", "--k-tilde", "2", "--L", "1", "--D", "0.1", "--S-in", "2", "--n-age", "401"]
    assert main(argv) == 1
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert not doc["certificate"]["feasible"] and "decay" not in doc
    assert "infeasible" in captured.err


def test_lyapunov_accepts_certify_report(model_file, initial_file, tmp_path, capsys):
    assert main(["certify", str(model_file), "--recipe"]) == 0
    (tmp_path / "cert.json").write_text(capsys.readouterr().out)
    out = tmp_path / "run"
    assert main(["simulate", str(model_file), str(initial_file), "--horizon", "1", "--stride", "10",
                 "--snapshots", "--out", str(out)]) == 0
    table_path = tmp_path / "lyap.csv"
    assert main(["lyapunov", str(out / "trajectory.csv"), "--model", str(model_file),
                 "--certificate", str(tmp_path / "cert.json"), "--out", str(table_path)]) == 0
    assert io.read_csv(table_path)["V"].size == 3
    (tmp_path / "bad.json").write_text(json.dumps({"sigma": 0.5}))
    assert main(["lyapunov", str(out / "trajectory.csv"), "--model", str(model_file),
                 "--certificate", str(tmp_path / "bad.json")]) == 2
