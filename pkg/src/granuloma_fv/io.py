"""Run configuration, initial-data presets, and the CSV / raw output formats.

A run configuration is a TOML document with the sections ``[domain]``,
``[params]``, ``[kinetics]``, ``[regularization]``, ``[time]``, ``[init]``
and ``[output]``.  Unknown keys are rejected.  ``params`` has no defaults
unless ``preset = "unit"`` (all seventeen constants equal to one) is given,
in which case listed constants override the preset.

Relative output directories are resolved against the environment variable
``GRANULOMA_FV_OUTPUT`` when it is set, else against the working directory.
"""

from __future__ import annotations

import math
import os
import struct
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .functionals import DIAGNOSTIC_COLUMNS, DiagnosticsRow
from .model import PARAM_NAMES, SPECIES, Grid, KineticsF, Params, SigmaSpec, State
from .timestepper import StepConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUTPUT_ENV = "GRANULOMA_FV_OUTPUT"
FLOAT_FORMAT = "%.16e"
SNAPSHOT_VERSION = 1
SNAPSHOT_FORMATS = ("csv", "raw")
_SUFFIX = {"csv": ".csv", "raw": ".bin"}
_RAW_MAGIC = b"GFVSNAP\x00"
_RAW_HEADER = struct.Struct("<8sIIIIddd16s")
assert _RAW_HEADER.size == 64

PRESETS = ("homogeneous", "disease_free", "gaussian_infection", "gaussian_peaks", "cosine_mms")

# option name -> default, per preset
_PRESET_OPTIONS = {
    "homogeneous": {"c_u": 1.0, "c_v": 1.0, "c_w": 1.0, "c_z": 1.0},
    "disease_free": {},
    "gaussian_infection": {"amplitude": 2.0, "width": 0.1, "floor": 0.05,
                           "u_level": None, "z_level": 0.1},
    "gaussian_peaks": {"amplitude": 30.0, "width": 0.1, "floor": 0.5},
    "cosine_mms": {"base": 1.0, "amplitude": 0.5},
}


@dataclass(frozen=True)
class InitSpec:
    """Initial data: a named preset with options, or a set of snapshot files.

    ``snapshot`` is the path of the ``u`` snapshot (extension optional); the
    other three species are read from the sibling files with the same index.
    """

    preset: str | None = "homogeneous"
    options: dict = field(default_factory=dict)
    snapshot: str | None = None

    def __post_init__(self):
        if (self.preset is None) == (self.snapshot is None):
            raise ConfigError("init needs exactly one of 'preset' or 'snapshot'")
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ConfigError(f"unknown init preset {self.preset!r}; choose from {PRESETS}")
            allowed = _PRESET_OPTIONS[self.preset]
            for key, value in self.options.items():
                if key not in allowed:
                    raise ConfigError(f"init preset {self.preset!r} has no option {key!r}")
                if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                    raise ConfigError(f"init option {key} must be a nonnegative number, got {value!r}")
        elif self.options:
            raise ConfigError("init options are not allowed with a snapshot")
        object.__setattr__(self, "options", {k: float(v) for k, v in self.options.items()})


@dataclass(frozen=True)
class OutputSpec:
    """Where and how often to write diagnostics and snapshots.

    ``snapshot_every`` must be a whole multiple of ``diagnostics_every`` so
    that every snapshot time also carries a diagnostics row.
    """

    directory: str = "run"
    diagnostics_every: float = 0.1
    snapshot_every: float = 1.0
    snapshot_format: str = "csv"

    def __post_init__(self):
        for name in ("diagnostics_every", "snapshot_every"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"output.{name} must be positive, got {value!r}")
            object.__setattr__(self, name, float(value))
        ratio = self.snapshot_every / self.diagnostics_every
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("output.snapshot_every must be a multiple of output.diagnostics_every")
        if self.snapshot_format not in SNAPSHOT_FORMATS:
            raise ConfigError(f"output.snapshot_format must be one of {SNAPSHOT_FORMATS}")

    @property
    def snapshot_stride(self) -> int:
        return int(round(self.snapshot_every / self.diagnostics_every))


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: Params
    kinetics: KineticsF
    spec: SigmaSpec
    step: StepConfig
    init: InitSpec
    output: OutputSpec

    def with_cells(self, cells) -> RunConfig:
        return replace(self, grid=Grid(tuple(cells), self.grid.lengths))

    def with_output(self, directory) -> RunConfig:
        return replace(self, output=replace(self.output, directory=str(directory)))


# ---------------------------------------------------------------------------
# parsing

_SECTIONS = ("domain", "params", "kinetics", "regularization", "time", "init", "output")
_DOMAIN_KEYS = ("dim", "cells", "lengths")
_TIME_KEYS = ("t_end", "dt_init", "dt_min", "dt_max", "cfl_safety", "mode")
_OUTPUT_KEYS = ("directory", "diagnostics_every", "snapshot_every", "snapshot_format")


def _reject_unknown(section, table, allowed):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]")


def _table(doc, name):
    table = doc.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return table


def _per_axis(value, dim, name):
    values = list(value) if isinstance(value, list) else [value] * dim
    if len(values) != dim:
        raise ConfigError(f"domain.{name} needs {dim} entries, got {len(values)}")
    return tuple(values)


def _parse_domain(table):
    _reject_unknown("domain", table, _DOMAIN_KEYS)
    missing = [k for k in _DOMAIN_KEYS if k not in table]
    if missing:
        raise ConfigError(f"[domain] is missing {', '.join(missing)}")
    dim = table["dim"]
    if dim not in (1, 2):
        raise ConfigError(f"domain.dim must be 1 or 2, got {dim!r}")
    cells = _per_axis(table["cells"], dim, "cells")
    if any(not isinstance(n, int) for n in cells):
        raise ConfigError("domain.cells must be integers")
    try:
        return Grid(cells, _per_axis(table["lengths"], dim, "lengths"))
    except ValueError as err:
        raise ConfigError(f"[domain]: {err}") from None


def _parse_params(table):
    _reject_unknown("params", table, PARAM_NAMES + ("preset",))
    values = {k: v for k, v in table.items() if k != "preset"}
    preset = table.get("preset")
    if preset is not None:
        if preset != "unit":
            raise ConfigError(f"unknown params preset {preset!r}; the only preset is 'unit'")
        values = {**{name: 1.0 for name in PARAM_NAMES}, **values}
    missing = [name for name in PARAM_NAMES if name not in values]
    if missing:
        raise ConfigError(f"[params] is missing {', '.join(missing)} (or set preset = \"unit\")")
    try:
        return Params(**values)
    except ValueError as err:
        raise ConfigError(f"[params]: {err}") from None


def _parse_kinetics(table):
    _reject_unknown("kinetics", table, ("variant", "beta_z"))
    try:
        return KineticsF(table.get("variant", "identity"), table.get("beta_z"))
    except ValueError as err:
        raise ConfigError(f"[kinetics]: {err}") from None


def _parse_regularization(table):
    _reject_unknown("regularization", table, ("variant", "epsilon"))
    try:
        return SigmaSpec(table.get("variant", "identity"), table.get("epsilon"))
    except ValueError as err:
        raise ConfigError(f"[regularization]: {err}") from None


def _parse_time(table):
    _reject_unknown("time", table, _TIME_KEYS)
    if "t_end" not in table:
        raise ConfigError("[time] is missing t_end")
    try:
        cfg = StepConfig(**table)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[time]: {err}") from None
    if cfg.t_end <= 0:
        raise ConfigError("time.t_end must be positive")
    return cfg


def _parse_init(table):
    table = dict(table)
    preset = table.pop("preset", None)
    snapshot = table.pop("snapshot", None)
    if preset is None and snapshot is None:
        preset = "homogeneous"
    return InitSpec(preset, table, snapshot)


def _parse_output(table):
    _reject_unknown("output", table, _OUTPUT_KEYS)
    return OutputSpec(**table)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Raises
    ------
    ConfigError
        On malformed TOML (the message carries the line number), unknown
        sections or keys, or any invalid value.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed configuration: {err}") from None
    _reject_unknown("top level", doc, _SECTIONS)
    for name in ("domain", "time"):
        if name not in doc:
            raise ConfigError(f"missing [{name}] section")
    if "params" not in doc:
        raise ConfigError("missing [params] section")
    return RunConfig(
        grid=_parse_domain(_table(doc, "domain")),
        params=_parse_params(_table(doc, "params")),
        kinetics=_parse_kinetics(_table(doc, "kinetics")),
        spec=_parse_regularization(_table(doc, "regularization")),
        step=_parse_time(_table(doc, "time")),
        init=_parse_init(_table(doc, "init")),
        output=_parse_output(_table(doc, "output")),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    try:
        return parse_config(text)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None


def _toml_value(value):
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def render_config(cfg: RunConfig) -> str:
    """TOML text that :func:`parse_config` maps back to ``cfg``."""
    sections = {
        "domain": {"dim": cfg.grid.dim, "cells": list(cfg.grid.cells), "lengths": list(cfg.grid.lengths)},
        "params": cfg.params.as_dict(),
        "kinetics": {"variant": cfg.kinetics.variant, "beta_z": cfg.kinetics.beta_z},
        "regularization": {"variant": cfg.spec.variant, "epsilon": cfg.spec.epsilon},
        "time": {k: getattr(cfg.step, k) for k in _TIME_KEYS},
        "init": {"preset": cfg.init.preset, "snapshot": cfg.init.snapshot, **cfg.init.options},
        "output": {k: getattr(cfg.output, k) for k in _OUTPUT_KEYS},
    }
    lines = []
    for name, table in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in table.items() if v is not None)
        lines.append("")
    return "\n".join(lines)


def output_directory(cfg: RunConfig) -> Path:
    path = Path(cfg.output.directory)
    if path.is_absolute():
        return path
    root = os.environ.get(OUTPUT_ENV)
    return Path(root) / path if root else path


# ---------------------------------------------------------------------------
# initial data

def init_preset(name: str, grid: Grid, params: Params, **options) -> State:
    """Initial state from a named preset.

    Presets
    -------
    homogeneous
        Constants ``c_u, c_v, c_w, c_z`` (default 1).
    disease_free
        ``(beta_u/delta_u, 0, 0, 0)``, the kinetic equilibrium without infection.
    gaussian_infection
        ``u = u_level`` (default ``beta_u/delta_u``), ``z = z_level``, and
        ``v = w = floor + (amplitude - floor) exp(-r^2 / (2 width^2))`` centred
        in the domain.
    gaussian_peaks
        Centred Gaussian bumps of height ``amplitude`` over ``floor`` in all
        four species, with slightly different widths; used where the
        saturation law must be exercised.
    cosine_mms
        ``base + amplitude * prod cos(pi x_i / L_i)`` in all four species.

    Every preset is nonnegative and has zero normal derivative at the walls
    (the Gaussians up to their tails).
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown init preset {name!r}; choose from {PRESETS}")
    opts = dict(_PRESET_OPTIONS[name])
    unknown = set(options) - set(opts)
    if unknown:
        raise ConfigError(f"preset {name!r} has no option(s) {sorted(unknown)}")
    opts.update(options)
    shape = grid.shape
    centers = grid.centers()

    def gaussian(width):
        r2 = sum((c - 0.5 * length) ** 2 for c, length in zip(centers, grid.lengths))
        return np.exp(-r2 / (2.0 * width**2))

    if name == "homogeneous":
        fields_ = [np.full(shape, opts[f"c_{s}"]) for s in SPECIES]
    elif name == "disease_free":
        fields_ = [np.full(shape, params.beta_u / params.delta_u)] + [np.zeros(shape)] * 3
    elif name == "gaussian_infection":
        u_level = opts["u_level"] if opts["u_level"] is not None else params.beta_u / params.delta_u
        bump = opts["floor"] + (opts["amplitude"] - opts["floor"]) * gaussian(opts["width"])
        fields_ = [np.full(shape, u_level), bump, bump.copy(), np.full(shape, opts["z_level"])]
    elif name == "gaussian_peaks":
        scales = (1.0, 1.25, 0.8, 1.5)
        fields_ = [opts["floor"] + (opts["amplitude"] - opts["floor"]) * gaussian(opts["width"] * k)
                   for k in scales]
    else:
        profile = np.ones(shape)
        for c, length in zip(centers, grid.lengths):
            profile = profile * np.cos(np.pi * c / length)
        fields_ = [opts["base"] + opts["amplitude"] * profile for _ in SPECIES]
    return State(0.0, *fields_, grid)


def initial_state(cfg: RunConfig) -> State:
    if cfg.init.snapshot is not None:
        state = read_state(cfg.init.snapshot)
        if state.grid != cfg.grid:
            raise ConfigError(f"snapshot grid {state.grid} does not match [domain] {cfg.grid}")
        return state
    return init_preset(cfg.init.preset, cfg.grid, cfg.params, **cfg.init.options)


# ---------------------------------------------------------------------------
# diagnostics

def _fmt(value) -> str:
    return FLOAT_FORMAT % value


def write_diagnostics(rows, path) -> Path:
    """Write rows to ``path`` as CSV (header always present, 17 significant digits)."""
    path = Path(path)
    lines = [",".join(DIAGNOSTIC_COLUMNS)]
    lines.extend(",".join(_fmt(v) for v in row.values()) for row in rows)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write diagnostics to {path}: {err}") from err
    return path


def read_diagnostics(path) -> list:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != DIAGNOSTIC_COLUMNS:
        raise ValueError(f"{path} is not a diagnostics file")
    return [DiagnosticsRow(*(float(x) for x in line.split(","))) for line in lines[1:] if line]


# ---------------------------------------------------------------------------
# snapshots

@dataclass(frozen=True)
class SnapshotFile:
    """One field at one time: header metadata plus the cell values."""

    field: str
    t: float
    grid: Grid
    data: np.ndarray
    version: int = SNAPSHOT_VERSION

    def __post_init__(self):
        if self.data.shape != self.grid.shape:
            raise ValueError(f"payload shape {self.data.shape} does not match cells {self.grid.cells}")


def snapshot_path(directory, name, index, fmt="csv") -> Path:
    return Path(directory) / f"{name}_{index:06d}{_SUFFIX[fmt]}"


def write_snapshot(snap: SnapshotFile, path, fmt: str | None = None) -> Path:
    """Write a snapshot as CSV (``#`` header lines) or raw little-endian float64.

    The raw header is 64 bytes: magic ``GFVSNAP\\0``, uint32 version, dim,
    nx, ny (0 in 1D), float64 t, Lx, Ly (0 in 1D), and the field name padded
    to 16 bytes.  Values follow in row-major (C) order, axis 0 being x.
    """
    path = Path(path)
    fmt = fmt or ("raw" if path.suffix == ".bin" else "csv")
    grid = snap.grid
    data = np.ascontiguousarray(snap.data, dtype="<f8")
    try:
        if fmt == "csv":
            header = [
                f"# field: {snap.field}",
                f"# version: {snap.version}",
                f"# t: {snap.t!r}",
                f"# dim: {grid.dim}",
                "# cells: " + " ".join(str(n) for n in grid.cells),
                "# lengths: " + " ".join(repr(length) for length in grid.lengths),
            ]
            rows = data.reshape(grid.cells[0], -1) if grid.dim == 2 else data.reshape(1, -1)
            body = [",".join(_fmt(v) for v in row) for row in rows]
            path.write_text("\n".join(header + body) + "\n")
        elif fmt == "raw":
            nx = grid.cells[0]
            ny = grid.cells[1] if grid.dim == 2 else 0
            ly = grid.lengths[1] if grid.dim == 2 else 0.0
            name = snap.field.encode()
            if len(name) > 16:
                raise ValueError(f"field name {snap.field!r} longer than 16 bytes")
            head = _RAW_HEADER.pack(_RAW_MAGIC, snap.version, grid.dim, nx, ny,
                                    snap.t, grid.lengths[0], ly, name)
            path.write_bytes(head + data.tobytes())
        else:
            raise ValueError(f"unknown snapshot format {fmt!r}")
    except OSError as err:
        raise OSError(f"cannot write snapshot {path}: {err}") from err
    return path


def read_snapshot(path) -> SnapshotFile:
    path = Path(path)
    if path.suffix == ".bin":
        blob = path.read_bytes()
        if len(blob) < 64:
            raise ValueError(f"{path}: truncated snapshot header")
        magic, version, dim, nx, ny, t, lx, ly, name = _RAW_HEADER.unpack(blob[:64])
        if magic != _RAW_MAGIC:
            raise ValueError(f"{path}: not a raw snapshot")
        cells, lengths = ((nx,), (lx,)) if dim == 1 else ((nx, ny), (lx, ly))
        data = np.frombuffer(blob[64:], dtype="<f8")
        if data.size != int(np.prod(cells)):
            raise ValueError(f"{path}: payload has {data.size} values, header says {cells}")
        return SnapshotFile(name.rstrip(b"\x00").decode(), t, Grid(cells, lengths),
                            data.reshape(cells).astype(float), version)
    meta = {}
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line:
            rows.append([float(x) for x in line.split(",")])
    try:
        cells = tuple(int(n) for n in meta["cells"].split())
        lengths = tuple(float(x) for x in meta["lengths"].split())
        data = np.array(rows, dtype=float).reshape(cells)
        return SnapshotFile(meta["field"], float(meta["t"]), Grid(cells, lengths), data,
                            int(meta["version"]))
    except (KeyError, ValueError) as err:
        raise ValueError(f"{path}: malformed snapshot ({err})") from None


def _resolve_snapshot(path) -> Path:
    path = Path(path)
    if path.suffix in (".csv", ".bin"):
        return path
    for suffix in (".csv", ".bin"):
        candidate = path.with_name(path.name + suffix)
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no snapshot file for {path}")


def sibling_snapshots(path) -> list:
    """Paths of the four species snapshots sharing the index of ``path``."""
    path = _resolve_snapshot(path)
    name, _, rest = path.name.partition("_")
    if name not in SPECIES:
        raise ValueError(f"{path}: snapshot names start with one of {SPECIES}")
    return [path.with_name(f"{s}_{rest}") for s in SPECIES]


def read_state(paths) -> State:
    """Assemble a State from four snapshot files (or from one of them and its siblings)."""
    if isinstance(paths, (str, os.PathLike)):
        paths = sibling_snapshots(paths)
    paths = [_resolve_snapshot(p) for p in paths]
    snaps = {}
    for p in paths:
        snap = read_snapshot(p)
        snaps[snap.field] = snap
    missing = [s for s in SPECIES if s not in snaps]
    if missing:
        raise ValueError(f"snapshots for {missing} are missing")
    ref = snaps["u"]
    for snap in snaps.values():
        if snap.grid != ref.grid or snap.t != ref.t:
            raise ValueError("snapshots disagree on grid or time")
    return State(ref.t, *(snaps[s].data for s in SPECIES), ref.grid)


def write_state(state: State, directory, index: int, fmt: str = "csv") -> list:
    return [write_snapshot(SnapshotFile(name, state.t, state.grid, array),
                           snapshot_path(directory, name, index, fmt), fmt)
            for name, array in zip(SPECIES, state.fields)]
