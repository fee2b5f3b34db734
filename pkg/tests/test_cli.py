import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from granuloma_fv.cli import main
from granuloma_fv.io import OUTPUT_ENV, read_diagnostics

CONFIG = """
[domain]
dim = 1
cells = 32
lengths = 1.0

[params]
preset = "unit"
d_v = 0.1
d_w = 0.1
chi_u = 0.2
chi_z = 0.2

[regularization]
variant = "mollified"
epsilon = 0.2

[time]
t_end = 0.2

[init]
preset = "gaussian_infection"

[output]
directory = "cli_run"
diagnostics_every = 0.02
snapshot_every = 0.1
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG)
    return path


def test_simulate_writes_outputs(config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(config), "--output", str(out)]) == 0
    rows = read_diagnostics(out / "diagnostics.csv")
    assert len(rows) == 11
    assert rows[-1].t == pytest.approx(0.2, abs=1e-12)
    names = sorted(p.name for p in out.glob("*.csv") if p.name != "diagnostics.csv")
    assert names == sorted(f"{s}_{i:06d}.csv" for s in "uvwz" for i in (0, 5, 10))
    assert "11 diagnostics rows" in capsys.readouterr().out


def test_simulate_is_deterministic(config, tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(config), "--output", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
    assert a == (tmp_path / "b" / "diagnostics.csv").read_bytes()


def test_simulate_honours_env_and_t_end(config, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "root"))
    assert main(["simulate", "--config", str(config), "--t-end", "0.04"]) == 0
    rows = read_diagnostics(tmp_path / "root" / "cli_run" / "diagnostics.csv")
    assert len(rows) == 3


def test_functionals_reproduces_in_run_row(config, tmp_path, capsys):
    out = tmp_path / "out"
    main(["simulate", "--config", str(config), "--output", str(out)])
    row = read_diagnostics(out / "diagnostics.csv")[5]
    capsys.readouterr()
    assert main(["functionals", "--config", str(config), "--snapshot", str(out / "u_000005")]) == 0
    printed = capsys.readouterr().out.splitlines()
    values = np.array([float(x) for x in printed[1].split(",")])
    expected = np.array(row.values())
    np.testing.assert_allclose(values[:-1], expected[:-1], rtol=1e-12, atol=0)
    assert np.isnan(values[-1])
    four = [str(out / f"{s}_000005.csv") for s in "uvwz"]
    assert main(["functionals", "--config", str(config), "--snapshot", *four,
                 "--output", str(tmp_path / "f.csv")]) == 0
    again = read_diagnostics(tmp_path / "f.csv")[0]
    assert again.values()[:-1] == tuple(values[:-1])


def test_verify_sigma_class_exit_code_and_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["verify", "--suite", "sigma_class", "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["passed"] is True
    assert "PASS" in capsys.readouterr().out


def test_sweep_writes_index_and_point_directories(config, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(config), "--set", "params.chi_u=0.1,0.3",
                 "--set", "time.t_end=0.02,0.04", "--output", str(out)])
    assert code == 0
    with open(out / "index.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert [r["params.chi_u"] for r in rows] == ["0.1", "0.1", "0.3", "0.3"]
    assert all(r["status"] == "ok" for r in rows)
    for r in rows:
        diag = read_diagnostics(out / r["directory"] / "diagnostics.csv")
        assert diag[-1].t == pytest.approx(float(r["time.t_end"]))


def test_sweep_reports_invalid_point(config, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(config), "--set", "params.delta_u=1.0,0.0",
                 "--set", "time.t_end=0.02", "--output", str(out)])
    assert code == 1
    rows = list(csv.DictReader(open(out / "index.csv")))
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert "delta_u" in rows[1]["message"]


def test_usage_and_config_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code != 0
    bad = tmp_path / "bad.toml"
    bad.write_text(CONFIG.replace('preset = "unit"', 'preset = "unit"\ndelta_u = 0.0'))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "delta_u" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "granuloma_fv.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("simulate", "verify", "mms", "sweep", "functionals"):
        assert command in proc.stdout
