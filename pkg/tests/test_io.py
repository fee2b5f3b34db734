import math

import numpy as np
import pytest

from granuloma_fv.errors import ConfigError
from granuloma_fv.functionals import DIAGNOSTIC_COLUMNS, diagnostics_row
from granuloma_fv.io import (
    OUTPUT_ENV, InitSpec, OutputSpec, SnapshotFile, init_preset, initial_state, load_config,
    output_directory, parse_config, read_diagnostics, read_snapshot, read_state, render_config,
    sibling_snapshots, snapshot_path, write_diagnostics, write_snapshot, write_state,
)
from granuloma_fv.model import PARAM_NAMES, Grid, Params, SigmaSpec, State
from granuloma_fv.verify import scenario_paths

BASE = """
[domain]
dim = 2
cells = [8, 8]
lengths = [1.0, 1.0]

[params]
preset = "unit"

[time]
t_end = 0.1
"""


def test_unit_preset_parses_to_all_ones():
    cfg = parse_config(BASE)
    assert cfg.params == Params.unit()
    assert len(PARAM_NAMES) == 17
    assert cfg.grid == Grid.uniform(8, 2)
    assert cfg.spec == SigmaSpec()
    assert cfg.init.preset == "homogeneous"


def test_zero_delta_u_is_rejected_by_name():
    text = BASE.replace('preset = "unit"', 'preset = "unit"\ndelta_u = 0.0')
    with pytest.raises(ConfigError, match="delta_u"):
        parse_config(text)


def test_log_sigmoidal_gate_in_config():
    ok = BASE + '\n[kinetics]\nvariant = "log_sigmoidal"\nbeta_z = 1.0\n'
    assert parse_config(ok).kinetics.beta_z == 1.0
    with pytest.raises(ConfigError, match="beta_z"):
        parse_config(ok.replace("beta_z = 1.0", "beta_z = 0.5"))


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse_config(BASE.replace("t_end = 0.1", "t_end = 0.1\ncolour = 3"))
    with pytest.raises(ConfigError, match="extras"):
        parse_config(BASE + "\n[extras]\na = 1\n")


def test_malformed_toml_reports_line():
    # the unclosed array on line 4 is detected at the start of line 5
    with pytest.raises(ConfigError, match="line 5"):
        parse_config(BASE.replace("cells = [8, 8]", "cells = [8, 8"))


def test_missing_sections_and_bad_values():
    with pytest.raises(ConfigError, match="time"):
        parse_config(BASE.replace("[time]\nt_end = 0.1", ""))
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("t_end = 0.1", "t_end = 0.0"))
    with pytest.raises(ConfigError):
        OutputSpec(diagnostics_every=0.1, snapshot_every=0.25)
    with pytest.raises(ConfigError):
        InitSpec(preset="homogeneous", snapshot="u_000000")
    with pytest.raises(ConfigError):
        InitSpec(preset="gaussian_infection", options={"height": 1.0})


def test_render_round_trip_for_every_scenario():
    for path in scenario_paths():
        cfg = load_config(path)
        assert parse_config(render_config(cfg)) == cfg


def test_round_trip_with_overrides():
    text = BASE + """
[regularization]
variant = "mollified"
epsilon = 0.1

[init]
preset = "gaussian_infection"
amplitude = 3.0

[output]
directory = "out"
diagnostics_every = 0.02
snapshot_every = 0.04
snapshot_format = "raw"
"""
    cfg = parse_config(text)
    assert cfg.output.snapshot_stride == 2
    assert parse_config(render_config(cfg)) == cfg


def test_presets():
    g = Grid.uniform(8, 2)
    state = init_preset("disease_free", g, Params.unit())
    np.testing.assert_array_equal(state.u, 1.0)
    for f in (state.v, state.w, state.z):
        np.testing.assert_array_equal(f, 0.0)
    state = init_preset("homogeneous", g, Params.unit())
    np.testing.assert_array_equal(state.stack(), 1.0)
    with pytest.raises(ConfigError):
        init_preset("spiral", g, Params.unit())


def test_gaussian_infection_peak_at_centre_cells():
    n = 64
    g = Grid.uniform(n, 2)
    state = init_preset("gaussian_infection", g, Params.unit(), amplitude=2.0, width=0.1)
    # the four cells around the centre sit at r^2 = 2 (h/2)^2
    h = 1.0 / n
    expected = 0.05 + 1.95 * math.exp(-2 * (h / 2) ** 2 / (2 * 0.01))
    assert state.w.max() == pytest.approx(expected, rel=1e-14)
    assert np.unravel_index(np.argmax(state.w), g.shape) in {(31, 31), (31, 32), (32, 31), (32, 32)}
    assert state.z.min() == state.z.max() == 0.1


def test_presets_are_nonnegative_and_nearly_neumann():
    g = Grid.uniform(64, 2)
    for name in ("gaussian_infection", "gaussian_peaks", "cosine_mms"):
        state = init_preset(name, g, Params.unit())
        stack = state.stack()
        assert stack.min() >= 0
        edge = np.abs(stack[:, 1, :] - stack[:, 0, :]).max()
        assert edge <= 1e-2 * stack.max()


def test_empty_and_single_row_diagnostics(tmp_path):
    path = write_diagnostics([], tmp_path / "d.csv")
    assert path.read_text() == ",".join(DIAGNOSTIC_COLUMNS) + "\n"
    assert read_diagnostics(path) == []
    state = init_preset("homogeneous", Grid.uniform(8, 2), Params.unit())
    row = diagnostics_row(state, Params.unit(), SigmaSpec(), dt=0.01)
    write_diagnostics([row], tmp_path / "one.csv")
    lines = (tmp_path / "one.csv").read_text().splitlines()
    y_mass = float(lines[1].split(",")[DIAGNOSTIC_COLUMNS.index("y_mass")])
    assert y_mass == pytest.approx(6.0, rel=1e-15)
    back = read_diagnostics(tmp_path / "one.csv")[0]
    assert back.values() == row.values()


@pytest.mark.parametrize("fmt", ["csv", "raw"])
@pytest.mark.parametrize("dim", [1, 2])
def test_snapshot_round_trip_is_bit_identical(tmp_path, fmt, dim):
    rng = np.random.default_rng(11)
    g = Grid((6, 5), (1.0, 0.7)) if dim == 2 else Grid((7,), (2.0,))
    data = rng.random(g.shape) * 10.0 ** rng.integers(-300, 300, g.shape)
    snap = SnapshotFile("w", 0.1 + 0.2, g, data)
    path = write_snapshot(snap, snapshot_path(tmp_path, "w", 3, fmt))
    assert path.name == ("w_000003.csv" if fmt == "csv" else "w_000003.bin")
    back = read_snapshot(path)
    assert back.field == "w" and back.t == 0.1 + 0.2 and back.grid == g
    assert back.data.tobytes() == data.tobytes()
    if fmt == "raw":
        assert path.stat().st_size == 64 + 8 * data.size


def test_csv_snapshot_layout(tmp_path):
    g = Grid((5, 4), (1.0, 1.0))
    path = write_snapshot(SnapshotFile("u", 0.0, g, np.arange(20.0).reshape(5, 4)), tmp_path / "u_000000.csv")
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    assert len(header) == 6 and len(body) == 5
    assert [float(x) for x in body[1].split(",")] == [4.0, 5.0, 6.0, 7.0]


def test_read_state_from_one_sibling(tmp_path):
    g = Grid.uniform(8)
    (x,) = g.centers()
    state = State(0.25, 1 + x, 2 + x, 3 + x, 4 + x, g)
    write_state(state, tmp_path, 5, "raw")
    assert [p.name for p in sibling_snapshots(tmp_path / "z_000005")] == [
        "u_000005.bin", "v_000005.bin", "w_000005.bin", "z_000005.bin"]
    back = read_state(tmp_path / "w_000005.bin")
    assert back.t == 0.25
    np.testing.assert_array_equal(back.stack(), state.stack())
    with pytest.raises(FileNotFoundError):
        read_state(tmp_path / "u_000006")


def test_snapshot_as_initial_data(tmp_path):
    cfg = parse_config(BASE)
    state = init_preset("cosine_mms", cfg.grid, cfg.params)
    write_state(state, tmp_path, 0)
    text = BASE + f'\n[init]\nsnapshot = "{tmp_path / "u_000000"}"\n'
    np.testing.assert_array_equal(initial_state(parse_config(text)).stack(), state.stack())
    bad = text.replace("cells = [8, 8]", "cells = [8, 4]")
    with pytest.raises(ConfigError, match="grid"):
        initial_state(parse_config(bad))


def test_output_directory_env(monkeypatch, tmp_path):
    cfg = parse_config(BASE + '\n[output]\ndirectory = "runs/a"\n')
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert str(output_directory(cfg)) == "runs/a"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert output_directory(cfg) == tmp_path / "runs" / "a"
    absolute = cfg.with_output(tmp_path / "abs")
    assert output_directory(absolute) == tmp_path / "abs"
