import json
import math
import subprocess
import sys

import numpy as np
import pytest

from contactkam import model as M
from contactkam.cli import RunConfig, build_parser, main
from contactkam.errors import ConfigurationError


@pytest.fixture
def model_files(tmp_path):
    paths = {}
    for name, m in (("e1", M.e1()), ("e2", M.e2()), ("classical", M.classical_quadratic())):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(m.descriptor()))
        paths[name] = str(p)
    return paths


def _csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    cols = [i for i, h in enumerate(header) if h != "kind"]
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, usecols=cols)


def test_flow_example_approaches_pi(model_files, tmp_path):
    out = tmp_path / "flow"
    code = main(["flow", "--model", model_files["e1"], "--x0", "1.5708", "--u0", "0", "--p0", "0", "--T", "8",
                 "--out", str(out)])
    assert code == 0
    header, data = _csv(out / "orbit.csv")
    assert header[:4] == ["t", "x", "u", "p"]
    # oracle: xdot = sin x has x(t) = 2 arctan(tan(x0/2) e^t)
    exact = 2 * math.atan(math.tan(1.5708 / 2) * math.exp(8.0))
    assert data[-1, 1] == pytest.approx(exact, abs=1e-6)
    assert abs(data[-1, 1] - math.pi) < 2e-3


def test_solve_example_pins_the_level(model_files, tmp_path):
    out = tmp_path / "solve"
    code = main(["solve", "--model", model_files["e2"], "--side", "backward", "--seed", "barrier:0:-1",
                 "--grid", "128", "--out", str(out)])
    assert code == 0
    header, data = _csv(out / "solution_backward.csv")
    assert header == ["x", "value"]
    assert data[0, 0] == 0.0 and data[0, 1] == pytest.approx(-1.0, abs=5e-3)
    doc = json.loads((out / "solution_backward.json").read_text())
    assert doc["converged"] and doc["seed-provenance"] == "seed barrier:0:-1"


def test_discount_example(tmp_path, capsys):
    out = tmp_path / "discount"
    code = main(["experiment", "discount", "--V", "sin", "--lambdas", "0.2,0.1,0.05,0.02,0.01", "--out", str(out),
                 "--svg"])
    assert code == 0
    doc = json.loads((out / "discount.json").read_text())
    assert doc["name"] == "discount" and all(c["pass"] for c in doc["checks"])
    assert any("-4" in str(c["expected"]) or c["expected"] == -4.0 for c in doc["checks"])
    assert (out / "discount_profiles.svg").read_text().lstrip().startswith("<?xml")
    assert "checks passed" in capsys.readouterr().out


def test_outputs_are_deterministic(model_files, tmp_path):
    for d in ("a", "b"):
        assert main(["solve", "--model", model_files["e2"], "--seed", "barrier:0:-0.5", "--grid", "64",
                     "--dt", "0.02", "--out", str(tmp_path / d), "--svg"]) == 0
    for name in ("solution_backward.csv", "solution_backward.json", "solution_backward.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_file_with_flag_override(model_files, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": model_files["e1"], "grid": 64, "dt": 0.05, "out": str(tmp_path / "cfg")}))
    assert main(["solve", "--config", str(cfg), "--seed", "constant:0.2", "--grid", "128"]) == 0
    _, data = _csv(tmp_path / "cfg" / "solution_backward.csv")
    assert data.shape[0] == 128
    assert np.max(np.abs(data[:, 1])) < 1e-3


def test_usage_errors_exit_2(model_files, tmp_path, capsys):
    assert main(["flow", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["solve", "--model", model_files["e2"], "--seed", "nonsense", "--out", str(tmp_path)]) == 2
    assert main(["flow", "--model", str(tmp_path / "missing.json"), "--x0", "0", "--u0", "0", "--T", "1",
                 "--out", str(tmp_path)]) == 2
    assert main(["experiment", "e1", "--model", model_files["e1"]]) == 2
    assert main(["action", "--model", model_files["e1"], "--x0", "0", "--u0", "0", "--grid", "64",
                 "--dt", "0.001", "--horizon", "1", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "usage" in err and "error:" in err


def test_blow_up_exits_1(tmp_path):
    refl = M.reflected(M.e1())
    p = tmp_path / "refl.json"
    p.write_text(json.dumps(refl.descriptor()))
    assert main(["flow", "--model", str(p), "--x0", "1", "--u0", "1", "--p0", "0", "--T", "20",
                 "--out", str(tmp_path)]) == 1
    assert (tmp_path / "orbit.csv").exists()


def test_action_and_sets_subcommands(model_files, tmp_path):
    out = tmp_path / "act"
    assert main(["action", "--model", model_files["classical"], "--kind", "mane", "--x0", "0", "--u0", "0.2",
                 "--grid", "256", "--dt", "0.2", "--horizon", "5", "--out", str(out)]) == 0
    _, data = _csv(out / "mane.csv")
    d = np.minimum(data[:, 0], 2 * math.pi - data[:, 0])
    assert np.max(np.abs(data[:, 1] - (0.2 + d * d / 10))) < 5e-3

    out = tmp_path / "sets"
    assert main(["sets", "--model", model_files["e2"], "--seed", "barrier:0:-1", "--grid", "128",
                 "--which", "sigma,coincidence", "--out", str(out)]) == 0
    header, sig = _csv(out / "sigma.csv")
    assert header == ["x", "u", "p", "kind", "defect"]
    assert 0 < sig.shape[0] < 128


def test_classify_and_audit(model_files, tmp_path, capsys):
    out = tmp_path / "cls"
    assert main(["classify", "--model", model_files["e1"], "--x0", "0", "--u0", "0", "--p0", "0", "--T", "2",
                 "--grid", "256", "--out", str(out)]) == 0
    doc = json.loads((out / "classification.json").read_text())
    assert doc["strongly_static"]["flag"] is True
    assert main(["model", "audit", "--model", model_files["e2"], "--out", str(tmp_path / "aud")]) == 0
    assert "PASS" in capsys.readouterr().out


def test_run_config_validation():
    with pytest.warns(RuntimeWarning):
        RunConfig(grid=100).validate()
    with pytest.raises(ConfigurationError):
        RunConfig(tol=-1.0).validate()
    with pytest.raises(ConfigurationError):
        _ = RunConfig(seed="barrier:0:-1").random_seed
    assert RunConfig(seed="7").random_seed == 7


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("model", "flow", "action", "solve", "sets", "classify", "experiment"):
        assert name in text


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "contactkam", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "experiment" in res.stdout
