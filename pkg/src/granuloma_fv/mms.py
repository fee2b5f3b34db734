"""Manufactured solutions: symbolic source terms and convergence studies.

For a chosen smooth field quadruple ``phi`` the source ``S = phi_t - L(phi)``
(``L`` the full right-hand side with the identity saturation law) is derived
with sympy and added to the scheme, so ``phi`` solves the forced system
exactly.  Cosine profiles ``cos(k pi x / L)`` keep every field
Neumann-compatible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .model import Grid, KineticsF, Params, SigmaSpec, State
from .timestepper import LedgerAccumulator, StepConfig, integrate

X, Y, T = sp.symbols("x y t", real=True)


@dataclass(frozen=True)
class ManufacturedCase:
    """A manufactured solution with the parameters it is run with.

    ``fields`` are sympy expressions in ``x``, ``t`` (and ``y`` in 2D).
    """

    name: str
    dim: int
    params: Params
    fields: tuple
    kinetics: KineticsF = KineticsF()

    def exact(self, t: float, grid: Grid) -> np.ndarray:
        return _evaluate(self._exact_fns, t, grid)

    def source(self, t: float, grid: Grid) -> np.ndarray:
        return _evaluate(self._source_fns, t, grid)

    @property
    def _coords(self):
        return (X,) if self.dim == 1 else (X, Y)

    def source_expressions(self) -> tuple:
        p = self.params
        u, v, w, z = self.fields
        coords = self._coords

        def lap(e):
            return sum(sp.diff(e, c, 2) for c in coords)

        def div_taxis(c, s, chi):
            return chi * sum(sp.diff(c * sp.diff(s, x), x) for x in coords)

        f = w if self.kinetics.variant == "identity" else w / (self.kinetics.beta_z + w)
        rhs = (
            p.d_u * lap(u) - div_taxis(u, v, p.chi_u) - p.gamma_u * u * v - p.delta_u * u + p.beta_u,
            p.d_v * lap(v) + p.rho_v * v - p.gamma_v * u * v + p.mu_v * w,
            p.d_w * lap(w) + p.gamma_w * u * v - p.alpha_w * w * z - p.mu_w * w,
            p.d_z * lap(z) - div_taxis(z, w, p.chi_z) + p.alpha_z * f * z - p.delta_z * z,
        )
        return tuple(sp.simplify(sp.diff(phi, T) - r) for phi, r in zip(self.fields, rhs))

    def __post_init__(self):
        args = self._coords + (T,)
        object.__setattr__(self, "_exact_fns", [sp.lambdify(args, e, "numpy") for e in self.fields])
        object.__setattr__(self, "_source_fns",
                           [sp.lambdify(args, e, "numpy") for e in self.source_expressions()])


def _evaluate(fns, t, grid):
    coords = grid.centers()
    out = np.empty((4,) + grid.shape)
    for k, fn in enumerate(fns):
        out[k] = np.broadcast_to(fn(*coords, t), grid.shape)
    return out


def _profile(dim, kx, ky=1):
    prof = sp.cos(kx * sp.pi * X)
    return prof if dim == 1 else prof * sp.cos(ky * sp.pi * Y)


def diffusion_case(dim: int = 1) -> ManufacturedCase:
    """Diffusion-dominated case: ``v`` and ``w`` are uniform in space, so both taxis terms vanish."""
    g = 1 + sp.Rational(1, 2) * sp.sin(T)
    fields = (
        1 + sp.Rational(1, 2) * _profile(dim, 1) * g,
        1 + sp.Rational(1, 4) * sp.sin(T),
        1 + sp.Rational(1, 4) * sp.cos(T),
        1 + sp.Rational(1, 2) * _profile(dim, 2) * g,
    )
    return ManufacturedCase(f"diffusion_{dim}d", dim, Params.unit(), fields)


def taxis_case() -> ManufacturedCase:
    """Taxis-dominated 1D case: small diffusivities, unit sensitivities, every field varying."""
    g = 1 + sp.Rational(1, 2) * sp.sin(T)
    fields = (
        1 + sp.Rational(1, 2) * sp.cos(sp.pi * X) * g,
        1 + sp.Rational(1, 2) * sp.cos(2 * sp.pi * X) * g,
        1 + sp.Rational(1, 2) * sp.cos(sp.pi * X) * sp.exp(-T),
        1 + sp.Rational(1, 2) * sp.cos(2 * sp.pi * X) * sp.exp(-T),
    )
    params = Params.unit(d_u=0.01, d_v=0.01, d_w=0.01, d_z=0.01)
    return ManufacturedCase("taxis_1d", 1, params, fields)


def zero_case() -> ManufacturedCase:
    """The zero solution (forced by ``-beta_u`` in the first equation)."""
    return ManufacturedCase("zero_1d", 1, Params.unit(), (sp.Integer(0),) * 4)


def run_case(case: ManufacturedCase, n: int, dt: float, t_end: float,
             reference: np.ndarray | None = None) -> float:
    """Max over species of the discrete L2 error at ``t_end``.

    The error is measured against the exact solution at cell centres, or
    against ``reference`` (a ``(4, ...)`` array on the same grid) if given.
    """
    y, _ = _solve(case, n, dt, t_end)
    grid = Grid.uniform(n, case.dim)
    target = case.exact(t_end, grid) if reference is None else reference
    err = y - target
    axes = tuple(range(1, err.ndim))
    return float(np.max(np.sqrt(np.sum(err**2, axis=axes) * grid.cell_volume)))


def _solve(case, n, dt, t_end):
    grid = Grid.uniform(n, case.dim)
    state = State.from_stack(0.0, case.exact(0.0, grid), grid)
    cfg = StepConfig(t_end=t_end, dt_init=dt, dt_max=dt, dt_min=1e-12, cfl_safety=1.0)
    ledger = LedgerAccumulator()
    final = integrate(state, case.params, case.kinetics, SigmaSpec(), cfg, sinks=(ledger,),
                      source=case.source)
    return final.stack(), ledger.rejections


def observed_order(sizes, errors) -> float:
    """Least-squares slope of ``log error`` against ``log h`` (``h = 1/n``)."""
    h = 1.0 / np.asarray(sizes, dtype=float)
    slope, _ = np.polyfit(np.log(h), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


def spatial_study(case: ManufacturedCase, sizes=(16, 32, 64), courant: float = 0.25,
                  t_end: float = 0.5) -> dict:
    """Errors and observed order with ``dt = courant * h`` (second order in time keeps pace)."""
    errors = [run_case(case, n, courant / n, t_end) for n in sizes]
    order = observed_order(sizes, errors) if min(errors) > 0 else float("inf")
    return {"sizes": list(sizes), "errors": errors, "order": order}


def temporal_study(case: ManufacturedCase, n: int = 32, dts=(0.02, 0.01, 0.005),
                   t_end: float = 0.5, ref_factor: int = 16) -> dict:
    """Temporal order against a same-grid reference run with a much smaller step.

    The step sizes should divide ``t_end`` and be small enough that the
    positivity controller never shortens them; ``rejections`` reports
    whether it did.
    """
    reference, _ = _solve(case, n, min(dts) / ref_factor, t_end)
    errors, rejections = [], 0
    grid = Grid.uniform(n, case.dim)
    for dt in dts:
        y, rej = _solve(case, n, dt, t_end)
        rejections += rej
        err = np.sqrt(np.sum((y - reference) ** 2, axis=tuple(range(1, y.ndim))) * grid.cell_volume)
        errors.append(float(err.max()))
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return {"dts": list(dts), "errors": errors, "order": float(slope), "n": n,
            "rejections": rejections}


CASES = {
    "diffusion_1d": lambda: diffusion_case(1),
    "diffusion_2d": lambda: diffusion_case(2),
    "taxis_1d": taxis_case,
    "zero_1d": zero_case,
}

