"""Time integration: Strang-type IMEX splitting with a positivity-guarding controller.

One step of size ``dt`` in ``imex`` mode is

1. a Heun (SSP-RK2) half step ``dt/2`` of upwind taxis + kinetics,
2. a Crank-Nicolson diffusion step ``dt`` (Peaceman-Rachford ADI in 2D,
   one tridiagonal sweep per axis),
3. another explicit Heun half step.

``fully_explicit`` mode replaces this with two Heun half steps of the full
right-hand side.  Negative values are never clamped: a step producing one is
rejected and retried with half the step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .discretization import _laplacian, _outflow_stacked, _taxis_stacked
from .errors import PositivityError
from .model import (
    KINETIC_TERMS, SPECIES, KineticsF, Params, SigmaSpec, State,
    _sigma_unchecked, cutoff, kinetic_terms, sum_terms,
)
from .tridiag import implicit_neumann_solve, second_difference

MODES = ("imex", "fully_explicit")


@dataclass(frozen=True)
class StepConfig:
    t_end: float
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    cfl_safety: float = 0.9
    mode: str = "imex"

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got {self.dt_min}, {self.dt_init}, {self.dt_max}")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be finite and nonnegative, got {self.t_end}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class StepReport:
    """Outcome of one accepted step.

    ``ledger`` maps ``(species, term)`` to the volume-integrated change that
    term contributed during the step.
    """

    t: float
    dt: float
    rejections: int
    minima: dict
    ledger: dict
    sampled: bool = False


class DtEstimate(NamedTuple):
    dt: float
    limiter: str
    floored: bool


class _Rejected(Exception):
    def __init__(self, field, index, value):
        super().__init__(field)
        self.field = field
        self.index = index
        self.value = value


def _first_negative(y):
    if y.min() >= 0:
        return
    for k, name in enumerate(SPECIES):
        bad = ~(y[k] >= 0)
        if np.any(bad):
            flat = np.flatnonzero(bad)[0]
            index = tuple(int(i) for i in np.unravel_index(flat, y[k].shape))
            raise _Rejected(name, index, float(y[k][index]))


def _loss_fluxes(y, params: Params, spec: SigmaSpec):
    p = params
    u, v, w, z = y
    su = _sigma_unchecked(u, spec)
    sz = _sigma_unchecked(z, spec)
    return (
        p.gamma_u * su * v + p.delta_u * u,
        p.gamma_v * su * v,
        p.alpha_w * w * sz + p.mu_w * w,
        p.delta_z * z,
    )


def _chis(params, dim):
    return np.array([params.chi_u, params.chi_z]).reshape((2,) + (1,) * dim)


def _stable_dt(y, grid, params, spec, cfg, chis=None):
    limits = {}
    if chis is None:
        chis = _chis(params, grid.dim)
    rate = float(_outflow_stacked(y[1:3], chis, grid.spacing).max())
    limits["advective"] = 1.0 / rate if rate > 0 else math.inf

    kinetic = math.inf
    for value, loss in zip(y, _loss_fluxes(y, params, spec)):
        mask = loss > 0
        if mask.any():
            kinetic = min(kinetic, float((value[mask] / loss[mask]).min()))
    limits["kinetic"] = kinetic

    if cfg.mode == "fully_explicit":
        h = min(grid.spacing)
        limits["diffusive"] = h * h / (2 * grid.dim * max(params.diffusivities))

    limiter = min(limits, key=limits.get)
    dt = cfg.cfl_safety * limits[limiter]
    if dt >= cfg.dt_max:
        return DtEstimate(cfg.dt_max, "dt_max", False)
    if dt < cfg.dt_min:
        return DtEstimate(cfg.dt_min, limiter, True)
    return DtEstimate(dt, limiter, False)


def stable_dt(state: State, params: Params, spec: SigmaSpec, cfg: StepConfig) -> DtEstimate:
    """Step-size estimate keeping every explicit stage nonnegative.

    ``dt = min(cfl_safety * min(advective, kinetic[, diffusive]), dt_max)`` with

    * advective: ``1 / max_cells(chi * sum of outward |face gradient| / h)``,
      over both taxis pairs (u following v, z following w);
    * kinetic: ``min over cells and species of value / loss flux``;
    * diffusive (``fully_explicit`` only): ``h_min^2 / (2 dim D_max)``.

    Explicit stages use half steps, so each forward-Euler stage sees at most
    ``dt/2 * (1/advective + 1/kinetic) <= cfl_safety``.  A result below
    ``dt_min`` is replaced by ``dt_min`` and flagged.
    """
    state.check_nonnegative()
    return _stable_dt(state.stack(), state.grid, params, spec, cfg)


class _System:
    """Right-hand side pieces of one configured model on one grid."""

    def __init__(self, params, kinetics, spec, grid, source=None):
        self.params = params
        self.kinetics = kinetics
        self.spec = spec
        self.grid = grid
        self.source = source
        self.vol = grid.cell_volume
        shape = (4,) + (1,) * grid.dim
        self.diffusivity = np.array(params.diffusivities).reshape(shape)
        self.chis = _chis(params, grid.dim)

    def _mobility(self, c):
        if self.spec.variant == "identity":
            return c
        return c * cutoff(self.spec.epsilon * c)

    def explicit_rate(self, y, t, with_diffusion=False):
        p, h = self.params, self.grid.spacing
        u, v, w, z = y
        terms = kinetic_terms(u, v, w, z, p, self.kinetics, self.spec)
        rate = sum_terms(terms)
        carriers = y[::3]
        rate[::3] += _taxis_stacked(carriers, y[1:3], self.chis, self._mobility(carriers), h)
        if with_diffusion:
            for k in range(4):
                rate[k] += self.diffusivity.flat[k] * _laplacian(y[k], h)
        src = None
        if self.source is not None:
            src = np.asarray(self.source(t, self.grid), dtype=float)
            rate += src
        return rate, terms, src

    def heun(self, y, t, tau, ledger, with_diffusion=False):
        r0, k0, s0 = self.explicit_rate(y, t, with_diffusion)
        y1 = y + tau * r0
        _first_negative(y1)
        r1, k1, s1 = self.explicit_rate(y1, t + tau, with_diffusion)
        y2 = y + 0.5 * tau * (r0 + r1)
        _first_negative(y2)
        weight = 0.5 * tau * self.vol
        axes = tuple(range(1, y.ndim))
        ledger["kinetic"] += weight * (k0.sum(axis=axes) + k1.sum(axis=axes))
        if s0 is not None:
            ledger["source"] += weight * (s0.sum(axis=axes) + s1.sum(axis=axes))
        return y2

    def diffuse(self, y, dt):
        coef = 0.5 * dt * self.diffusivity
        h = self.grid.spacing
        if self.grid.dim == 1:
            rhs = y + coef * second_difference(y, 1, h[0])
            return implicit_neumann_solve(rhs, 1, h[0], coef)
        rhs = y + coef * second_difference(y, 2, h[1])
        half = implicit_neumann_solve(rhs, 1, h[0], coef)
        rhs = half + coef * second_difference(half, 1, h[0])
        return implicit_neumann_solve(rhs, 2, h[1], coef)

    def advance(self, y, t, dt, mode):
        ledger = {"kinetic": np.zeros(len(KINETIC_TERMS)), "source": np.zeros(4)}
        if mode == "imex":
            y = self.heun(y, t, 0.5 * dt, ledger)
            y = self.diffuse(y, dt)
            _first_negative(y)
            y = self.heun(y, t + 0.5 * dt, 0.5 * dt, ledger)
        else:
            y = self.heun(y, t, 0.5 * dt, ledger, with_diffusion=True)
            y = self.heun(y, t + 0.5 * dt, 0.5 * dt, ledger, with_diffusion=True)
        totals = dict(zip(KINETIC_TERMS, ledger["kinetic"].tolist()))
        if self.source is not None:
            totals.update({(name, "source"): value
                           for name, value in zip(SPECIES, ledger["source"].tolist())})
        return y, totals


def step(state: State, params: Params, kinetics: KineticsF, spec: SigmaSpec,
         cfg: StepConfig, dt: float | None = None, source: Callable | None = None,
         *, _system: _System | None = None):
    """Advance ``state`` by one accepted step.

    Parameters
    ----------
    dt : float, optional
        Step size to attempt.  Defaults to :func:`stable_dt`.
    source : callable, optional
        ``source(t, grid) -> array (4, *grid.shape)`` added to the right-hand
        side (used by manufactured-solution tests).  Its contribution is
        booked in the ledger under ``(species, "source")``.

    Returns
    -------
    (State, StepReport)

    Raises
    ------
    PositivityError
        If keeping all fields nonnegative would need a step below ``dt_min``.
    """
    system = _system or _System(params, kinetics, spec, state.grid, source)
    if dt is None:
        dt = stable_dt(state, params, spec, cfg).dt
    y0 = state.stack()
    rejections = 0
    while True:
        try:
            y, ledger = system.advance(y0, state.t, dt, cfg.mode)
            break
        except _Rejected as rej:
            rejections += 1
            dt *= 0.5
            if dt < cfg.dt_min:
                raise PositivityError(
                    f"field {rej.field} turned negative ({rej.value:.3e}) at cell {rej.index} "
                    f"near t={state.t:.6g} even with dt below dt_min={cfg.dt_min:g}",
                    field=rej.field, index=rej.index, value=rej.value, t=state.t) from None
    new = State.from_stack(state.t + dt, y, state.grid)
    report = StepReport(t=new.t, dt=dt, rejections=rejections, minima=new.minima(), ledger=ledger)
    return new, report


def integrate(state0: State, params: Params, kinetics: KineticsF, spec: SigmaSpec,
              cfg: StepConfig, sinks=(), sample_every: float | None = None,
              source: Callable | None = None) -> State:
    """Step from ``state0.t`` to ``cfg.t_end``.

    Every sink is called as ``sink(state, report)``: once up front with
    ``report=None`` and then after every accepted step.  Steps are shortened
    so that the multiples of ``sample_every`` and ``t_end`` are hit exactly;
    reports at those times carry ``sampled=True``.

    Raises
    ------
    PositivityError
        Propagated from :func:`step`; its ``t`` attribute is the last time
        reached successfully.
    """
    state = state0
    for sink in sinks:
        sink(state, None)
    t_end = cfg.t_end
    if state.t >= t_end:
        return state
    system = _System(params, kinetics, spec, state.grid, source)
    every = sample_every if sample_every else None
    k = 1 if every is None else math.floor(state.t / every + 1e-9) + 1
    dt_cap = cfg.dt_init
    while state.t < t_end:
        target = t_end if every is None else min(t_end, k * every)
        remaining = target - state.t
        dt = min(dt_cap, _stable_dt(state.stack(), state.grid, params, spec, cfg, system.chis).dt)
        landing = remaining <= dt * (1 + 1e-8)
        if landing:
            dt = remaining
        elif remaining < 2 * dt:
            dt = 0.5 * remaining
        try:
            new, report = step(state, params, kinetics, spec, cfg, dt, _system=system)
        except PositivityError as err:
            err.t = state.t
            raise
        if landing and report.rejections == 0:
            new.t = target
            report.t = target
            report.sampled = True
            if every is not None and target < t_end:
                k += 1
        state = new
        if report.rejections:
            dt_cap = report.dt
        elif not landing:
            dt_cap = min(cfg.dt_max, 2 * dt_cap)
        for sink in sinks:
            sink(state, report)
    return state


@dataclass
class LedgerAccumulator:
    """Sink summing the per-step kinetic ledgers of a run."""

    totals: dict = field(default_factory=dict)
    steps: int = 0
    rejections: int = 0

    def __call__(self, state, report):
        if report is None:
            return
        self.steps += 1
        self.rejections += report.rejections
        for key, value in report.ledger.items():
            self.totals[key] = self.totals.get(key, 0.0) + value

    def species_total(self, species: str) -> float:
        return sum(v for (sp, _), v in self.totals.items() if sp == species)

