"""Discrete integral quantities: masses, entropies, quasi-energies, dissipation terms.

All integrals use the midpoint rule on cell values, the same quadrature the
finite-volume scheme conserves, so ledger identities hold to round-off.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .discretization import cell_gradient_squared, d2_log_frobenius
from .errors import PositivityError
from .model import SPECIES, InitBudget, Params, SigmaSpec, State, sigma_eval

ENTROPY_FLOOR = 1e-300

DISSIPATION_NAMES = (
    "diss_grad_u", "diss_hess_v", "diss_sigv_u",
    "diss_grad_z", "diss_hess_w", "diss_sigw_z",
    "diss_quartic_v", "diss_quartic_w",
)

DIAGNOSTIC_COLUMNS = (
    "t", "mass_u", "mass_v", "mass_w", "mass_z", "y_mass",
    "linf_u", "linf_v", "linf_w", "linf_z", "energy1", "energy2",
) + DISSIPATION_NAMES + ("dt",)


@dataclass(frozen=True)
class DiagnosticsRow:
    """One output-time record; field order is the CSV column order."""

    t: float
    mass_u: float
    mass_v: float
    mass_w: float
    mass_z: float
    y_mass: float
    linf_u: float
    linf_v: float
    linf_w: float
    linf_z: float
    energy1: float
    energy2: float
    diss_grad_u: float
    diss_hess_v: float
    diss_sigv_u: float
    diss_grad_z: float
    diss_hess_w: float
    diss_sigw_z: float
    diss_quartic_v: float
    diss_quartic_w: float
    dt: float

    def values(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def dissipation(self) -> dict:
        return {name: getattr(self, name) for name in DISSIPATION_NAMES}


def _integral(values, grid) -> float:
    return float(np.sum(values) * grid.cell_volume)


def mass(field, grid) -> float:
    """``int phi`` by the midpoint rule."""
    return _integral(grid.check(field), grid)


def combined_mass(state: State, params: Params) -> float:
    """``int u + int v + g int w + (alpha_w / alpha_z) g int z`` with ``g = (gamma_u + gamma_v)/gamma_w``."""
    masses = [mass(f, state.grid) for f in state.fields]
    return weighted_mass(masses, params)


def weighted_mass(masses, params: Params) -> float:
    return float(sum(m * wt for m, wt in zip(masses, params.mass_weights)))


def entropy(field, grid, floor: float = ENTROPY_FLOOR) -> float:
    """``int (phi ln phi - phi)`` with the convention ``0 ln 0 = 0``.

    The floor only guards the logarithm's argument; the field is untouched.
    """
    phi = grid.check(field)
    if np.any(phi < 0):
        raise PositivityError("entropy needs a nonnegative field")
    return _integral(phi * np.log(np.maximum(phi, floor)) - phi, grid)


def _require_positive(field, name):
    if not np.all(field > 0):
        bad = np.flatnonzero(~(field > 0))[0]
        index = tuple(int(i) for i in np.unravel_index(bad, field.shape))
        raise PositivityError(f"{name} needs a strictly positive field (cell {index})",
                              field=name, index=index, value=float(field[index]))


def dirichlet_quotient(field, grid) -> float:
    """``int |grad phi|^2 / phi`` for a strictly positive field."""
    phi = grid.check(field)
    _require_positive(phi, "dirichlet_quotient")
    return _integral(cell_gradient_squared(phi, grid) / phi, grid)


def energy1(state: State, params: Params) -> float:
    """Quasi-energy of the (u, v) subsystem.

    ``int (u ln u - u) + chi_u/(2 gamma_v) int |grad v|^2/v
    + mu_v chi_u/(2 D_w gamma_v) int (w ln w - w)``
    """
    p, grid = params, state.grid
    _require_positive(state.v, "v")
    return (entropy(state.u, grid)
            + p.chi_u / (2 * p.gamma_v) * dirichlet_quotient(state.v, grid)
            + p.mu_v * p.chi_u / (2 * p.d_w * p.gamma_v) * entropy(state.w, grid))


def energy2(state: State, params: Params) -> float:
    """Quasi-energy of the (z, w) subsystem: ``int (z ln z - z) + chi_z/(2 alpha_w) int |grad w|^2/w``."""
    p, grid = params, state.grid
    _require_positive(state.w, "w")
    return entropy(state.z, grid) + p.chi_z / (2 * p.alpha_w) * dirichlet_quotient(state.w, grid)


def _quotient_density(phi, grad_sq, name):
    # 0/0 -> 0 where a field vanishes together with its gradient
    if np.any(phi < 0):
        raise PositivityError(f"{name} is negative")
    zero = phi == 0
    if np.any(zero & (grad_sq > 0)):
        raise PositivityError(f"|grad {name}|^2/{name} is unbounded: {name} vanishes where its gradient does not",
                              field=name)
    return np.where(zero, 0.0, grad_sq / np.where(zero, 1.0, phi))


def dissipation_ledger(state: State, params: Params, spec: SigmaSpec, strict: bool = True) -> dict:
    """The eight dissipation integrals, keyed by :data:`DISSIPATION_NAMES`.

    With ``strict=False`` an entry that cannot be evaluated (for example a
    log-Hessian of a field with zeros) is reported as ``nan`` instead of
    raising :class:`PositivityError`.
    """
    grid = state.grid
    u, v, w, z = state.fields
    results = {}
    errors = {}

    def attempt(name, fn):
        try:
            results[name] = fn()
        except PositivityError as err:
            if strict:
                raise PositivityError(f"{name}: {err}", field=err.field, index=err.index,
                                      value=err.value) from None
            errors[name] = str(err)
            results[name] = math.nan

    grads = {name: cell_gradient_squared(f, grid) for name, f in zip(SPECIES, state.fields)}
    attempt("diss_grad_u", lambda: _integral(_quotient_density(u, grads["u"], "u"), grid))
    attempt("diss_hess_v", lambda: _integral(v * d2_log_frobenius(v, grid), grid))
    attempt("diss_sigv_u", lambda: _integral(
        _quotient_density(v, grads["v"], "v") * sigma_eval(u, spec), grid))
    attempt("diss_grad_z", lambda: _integral(_quotient_density(z, grads["z"], "z"), grid))
    attempt("diss_hess_w", lambda: _integral(w * d2_log_frobenius(w, grid), grid))
    attempt("diss_sigw_z", lambda: _integral(
        _quotient_density(w, grads["w"], "w") * sigma_eval(z, spec), grid))
    attempt("diss_quartic_v", lambda: _integral(_quartic_density(v, grads["v"], "v"), grid))
    attempt("diss_quartic_w", lambda: _integral(_quartic_density(w, grads["w"], "w"), grid))
    return results


def _quartic_density(phi, grad_sq, name):
    q = _quotient_density(phi, grad_sq, name)
    return q**2 / np.where(phi == 0, 1.0, phi)


def quartic_quotient(field, grid) -> float:
    """``int |grad phi|^4 / phi^3`` for a strictly positive field."""
    phi = grid.check(field)
    _require_positive(phi, "quartic_quotient")
    return _integral(cell_gradient_squared(phi, grid) ** 2 / phi**3, grid)


def log_hessian_weighted(field, grid) -> float:
    """``int phi |D^2 ln phi|^2`` for a strictly positive field."""
    phi = grid.check(field)
    return _integral(phi * d2_log_frobenius(phi, grid), grid)


def _safe(fn, *args):
    try:
        return fn(*args)
    except PositivityError:
        return math.nan


def diagnostics_row(state: State, params: Params, spec: SigmaSpec, dt: float = math.nan) -> DiagnosticsRow:
    """Evaluate every diagnostic at ``state``; undefined entries become ``nan``."""
    grid = state.grid
    masses = [mass(f, grid) for f in state.fields]
    return DiagnosticsRow(
        state.t, *masses, weighted_mass(masses, params),
        *(float(np.max(f)) for f in state.fields),
        _safe(energy1, state, params), _safe(energy2, state, params),
        **dissipation_ledger(state, params, spec, strict=False),
        dt=dt,
    )


def init_budget(state: State, a_bound: float | None = None) -> InitBudget:
    """Contributions bounding the initial data; ``a_bound`` defaults to their sum (or 1 if that is not positive)."""
    grid = state.grid
    u, v, w, z = state.fields
    parts = dict(
        entropy_u=_integral(u * np.log(np.maximum(u, ENTROPY_FLOOR)), grid),
        sup_v=float(np.max(v)),
        l3_w=_integral(w**3, grid) ** (1.0 / 3.0),
        entropy_z=_integral(z * np.log(np.maximum(z, ENTROPY_FLOOR)), grid),
        quotient_v=_safe(dirichlet_quotient, v, grid),
        quotient_w=_safe(dirichlet_quotient, w, grid),
    )
    total = sum(parts.values())
    if a_bound is None:
        a_bound = total if total > 0 else 1.0
    return InitBudget(a_bound=a_bound, **parts)


class DiagnosticsRecorder:
    """Sink for :func:`~granuloma_fv.timestepper.integrate` collecting sampled rows.

    Rows are recorded at the initial state and at every sampled step; the
    kinetic ledger of every step is accumulated in ``ledger``.
    """

    def __init__(self, params: Params, spec: SigmaSpec):
        self.params = params
        self.spec = spec
        self.rows: list[DiagnosticsRow] = []
        self.ledger: dict = {}
        self.on_row = None

    def __call__(self, state, report):
        if report is not None:
            for key, value in report.ledger.items():
                self.ledger[key] = self.ledger.get(key, 0.0) + value
        if report is None or report.sampled:
            dt = math.nan if report is None else report.dt
            row = diagnostics_row(state, self.params, self.spec, dt)
            self.rows.append(row)
            if self.on_row is not None:
                self.on_row(state, row)


def time_integrals(rows, names=DISSIPATION_NAMES) -> dict:
    """Trapezoid-in-time integrals of the named row entries."""
    t = np.array([r.t for r in rows])
    out = {}
    for name in names:
        values = np.array([getattr(r, name) for r in rows])
        out[name] = float(np.trapezoid(values, t)) if len(rows) > 1 else 0.0
    return out
