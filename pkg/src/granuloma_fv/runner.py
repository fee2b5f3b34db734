"""Run one configured simulation, optionally writing its outputs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .functionals import DiagnosticsRecorder
from .io import RunConfig, initial_state, output_directory, write_diagnostics, write_state
from .model import State
from .timestepper import LedgerAccumulator, integrate


@dataclass
class RunResult:
    config: RunConfig
    initial: State
    final: State
    rows: list
    ledger: dict
    steps: int
    rejections: int
    directory: Path | None = None
    states: list | None = None


def run(cfg: RunConfig, directory=None, write: bool = False, keep_states: bool = False) -> RunResult:
    """Integrate ``cfg`` and collect diagnostics at the configured cadence.

    With ``write=True`` the run directory receives ``diagnostics.csv`` and the
    snapshots (index ``k`` is the ``k``-th diagnostics time).  Snapshots are
    written every ``snapshot_every`` and at the final time.  With
    ``keep_states=True`` every sampled state is kept in ``result.states``.
    """
    state0 = initial_state(cfg)
    recorder = DiagnosticsRecorder(cfg.params, cfg.spec)
    ledger = LedgerAccumulator()
    out = None
    states = []
    stride = cfg.output.snapshot_stride
    fmt = cfg.output.snapshot_format
    if write:
        out = Path(directory) if directory is not None else output_directory(cfg)
        out.mkdir(parents=True, exist_ok=True)

    def on_row(state, row):
        index = len(recorder.rows) - 1
        if keep_states:
            states.append(state.copy())
        if out is not None and (index % stride == 0 or state.t >= cfg.step.t_end):
            write_state(state, out, index, fmt)

    recorder.on_row = on_row
    try:
        final = integrate(state0, cfg.params, cfg.kinetics, cfg.spec, cfg.step,
                          sinks=(recorder, ledger), sample_every=cfg.output.diagnostics_every)
    finally:
        if out is not None:
            write_diagnostics(recorder.rows, out / "diagnostics.csv")
    return RunResult(cfg, state0, final, recorder.rows, ledger.totals, ledger.steps,
                     ledger.rejections, out, states if keep_states else None)
