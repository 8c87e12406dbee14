import json

import numpy as np
import pytest

from smflow import cli
from smflow.errors import ConfigError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_parsing():
    raw = cli.parse_config_text("# comment\ngrid.n = 32\n\nic.family = winding  # trailing\n")
    assert raw == {"grid.n": "32", "ic.family": "winding"}
    cfg = cli.RunConfig.build(raw)
    assert cfg["grid.n"] == 32 and cfg["integrator.T"] == 1.0
    with pytest.raises(ConfigError, match="^bogus"):
        cli.parse_config_text("bogus = 1")
    with pytest.raises(ConfigError, match="grid.n"):
        cli.RunConfig.build({})
    with pytest.raises(ConfigError, match="perturb.eps"):
        cli.RunConfig.build({"grid.n": 16, "perturb.eps": 0.3})
    with pytest.raises(ConfigError, match="integrator.dt"):
        cli.RunConfig.build({"grid.n": 16, "integrator.dt": "-1"})


def test_simulate_constant_map(tmp_path, capsys):
    out = tmp_path / "c"
    cfgfile = tmp_path / "c.txt"
    cfgfile.write_text("grid.n = 8\ngrid.dim = 2\nic.family = constant\nintegrator.T = 0.05\n")
    code, _, _ = run(["simulate", "--config", str(cfgfile), "--out", str(out)], capsys)
    assert code == 0
    final = np.fromfile(out / "final.bin", dtype="<f8").reshape(8, 8, 3)
    assert np.all(final == [0, 0, 1])
    manifest = json.loads((out / "snapshots" / "manifest.json").read_text())
    assert manifest["config"]["grid.dim"] == 2


def test_simulate_magnon_energy_column(tmp_path, capsys):
    out = tmp_path / "m"
    code, _, _ = run(["simulate", "--n", "32", "--T", "0.5", "--out", str(out)], capsys)
    assert code == 0
    data = np.genfromtxt(out / "observers.csv", delimiter=",", names=True)
    assert np.max(np.abs(data["energy"] / data["energy"][0] - 1)) < 1e-4


def test_rerun_from_echoed_config_is_bit_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["compare", "--n", "16", "--T", "0.1", "--eps", "0.01", "--seed", "3", "--out", str(a)],
               capsys)[0] == 0
    assert run(["compare", "--config", str(a / "config.txt"), "--out", str(b)], capsys)[0] == 0
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    code, _, err = run(["simulate", "--T", "0.1"], capsys)
    assert code == 2 and "grid.n" in err
    code, _, err = run(["simulate", "--n", "16", "--dt", "1.0", "--out", str(tmp_path)], capsys)
    assert code == 3 and "cfl" in err
    code, _, err = run(["compare", "--n", "16", "--eps", "0.3", "--out", str(tmp_path)], capsys)
    assert code == 2 and "perturb.eps" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("grid.n = 16\nwhatever = 2\n")
    code, _, err = run(["simulate", "--config", str(bad)], capsys)
    assert code == 2 and "whatever" in err


def test_compare_twin_run_and_plotdata(tmp_path, capsys):
    out = tmp_path / "z"
    code, stdout, _ = run(["compare", "--n", "16", "--T", "0.1", "--eps", "0", "--out", str(out)], capsys)
    assert code == 0 and "n/a" in stdout
    doc = json.loads((out / "diagnostics.json").read_text())
    assert doc["gronwall_C"] is None
    assert set(doc["series"]["Q1"]) == {0.0} and set(doc["series"]["Q2"]) == {0.0}

    assert run(["plotdata", str(out / "diagnostics.json")], capsys)[0] == 0
    first = (out / "plotdata.txt").read_bytes()
    rows = [r.split() for r in first.decode().splitlines() if not r.startswith("#")]
    assert len(rows) == len(doc["series"]["t"])
    assert all(len(r) == 5 and r[3] == "-inf" for r in rows)
    assert run(["plotdata", str(out / "diagnostics.json")], capsys)[0] == 0
    assert (out / "plotdata.txt").read_bytes() == first


def test_plotdata_rejects_bad_reports(tmp_path, capsys):
    assert run(["plotdata", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["plotdata", str(bad)], capsys)[0] == 2


def test_compare_escape_exit_code(tmp_path, capsys):
    out = tmp_path / "e"
    code, _, err = run(["compare", "--n", "16", "--T", "1", "--eps", "0.24", "--out", str(out)], capsys)
    assert code == 4 and "closeness" in err
    doc = json.loads((out / "diagnostics.json").read_text())
    esc = doc["metadata"]["escape"]
    assert esc["distance"] >= 0.25
    assert doc["series"]["t"] and doc["series"]["t"][-1] < esc["t"]


def test_verify_suite_filter_and_flip(tmp_path, capsys):
    code, stdout, _ = run(["verify", "--suite", "hessian", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = [l for l in stdout.splitlines() if l.startswith("hessian")]
    assert len(lines) == 3
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert {c["suite"] for c in doc["checks"]} == {"hessian"}
    code, stdout, _ = run(["verify", "--suite", "jacobi", "--debug-flip-curvature"], capsys)
    assert code == 1
    assert any("jacobi_equation_residual" in l and l.endswith("FAIL") for l in stdout.splitlines())
