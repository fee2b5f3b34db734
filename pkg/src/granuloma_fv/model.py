"""Domain types for the granuloma chemotaxis system.

The model couples healthy macrophages ``u``, extracellular bacteria ``v``,
infected macrophages ``w`` and lymphocytes ``z``::

    u_t = D_u Lap u - chi_u div(u s'(u) grad v) - gamma_u s(u) v - delta_u u + beta_u
    v_t = D_v Lap v + rho_v v - gamma_v s(u) v + mu_v w
    w_t = D_w Lap w + gamma_w s(u) v - alpha_w w s(z) - mu_w w
    z_t = D_z Lap z - chi_z div(z s'(z) grad w) + alpha_z f(w) s(z) - delta_z z

with homogeneous Neumann boundaries.  ``s`` is a saturation law (the identity
or a smooth cutoff regularisation) and ``f`` the lymphocyte activation law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property, lru_cache

import numpy as np

from .errors import GridShapeError, PositivityError

SPECIES = ("u", "v", "w", "z")

PARAM_NAMES = (
    "d_u", "d_v", "d_w", "d_z",
    "chi_u", "chi_z",
    "gamma_u", "gamma_v", "gamma_w",
    "mu_v", "mu_w",
    "alpha_w", "alpha_z",
    "delta_u", "delta_z",
    "rho_v",
    "beta_u",
)


@dataclass(frozen=True)
class Params:
    """The 17 positive model constants."""

    d_u: float
    d_v: float
    d_w: float
    d_z: float
    chi_u: float
    chi_z: float
    gamma_u: float
    gamma_v: float
    gamma_w: float
    mu_v: float
    mu_w: float
    alpha_w: float
    alpha_z: float
    delta_u: float
    delta_z: float
    rho_v: float
    beta_u: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"parameter {f.name} must be a number, got {value!r}")
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"parameter {f.name} must be strictly positive, got {value!r}")
            object.__setattr__(self, f.name, float(value))

    @classmethod
    def unit(cls, **overrides) -> Params:
        """All constants equal to one, optionally overridden by keyword."""
        values = {name: 1.0 for name in PARAM_NAMES}
        values.update(overrides)
        return cls(**values)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, **changes) -> Params:
        return replace(self, **changes)

    @property
    def diffusivities(self) -> tuple:
        return (self.d_u, self.d_v, self.d_w, self.d_z)

    @property
    def mass_weights(self) -> tuple:
        """Weights of the combined mass ``y = sum_k weight_k * int species_k``."""
        g = (self.gamma_u + self.gamma_v) / self.gamma_w
        return (1.0, 1.0, g, self.alpha_w * g / self.alpha_z)

    @property
    def mass_growth_rate(self) -> float:
        """Exponential rate ``c`` of the combined-mass envelope."""
        return max(self.rho_v, self.mu_v * self.gamma_w / (self.gamma_u + self.gamma_v))


@dataclass(frozen=True)
class KineticsF:
    """Lymphocyte activation law ``f``.

    ``identity``: ``f(w) = w``.  ``log_sigmoidal``: ``f(w) = w / (beta_z + w)``,
    which satisfies ``0 <= f(w) <= w`` only for ``beta_z >= 1``.
    """

    variant: str = "identity"
    beta_z: float | None = None

    def __post_init__(self):
        if self.variant == "identity":
            if self.beta_z is not None:
                raise ValueError("beta_z is only meaningful for the log_sigmoidal variant")
        elif self.variant == "log_sigmoidal":
            if self.beta_z is None or not math.isfinite(self.beta_z):
                raise ValueError("log_sigmoidal kinetics require a finite beta_z")
            if self.beta_z < 1.0:
                raise ValueError(
                    f"log_sigmoidal kinetics need beta_z >= 1 so that f(w) <= w, got {self.beta_z}")
            object.__setattr__(self, "beta_z", float(self.beta_z))
        else:
            raise ValueError(f"unknown kinetics variant {self.variant!r}")


@dataclass(frozen=True)
class SigmaSpec:
    """Saturation law: the identity or the mollified cutoff with parameter epsilon."""

    variant: str = "identity"
    epsilon: float | None = None

    def __post_init__(self):
        if self.variant == "identity":
            if self.epsilon is not None:
                raise ValueError("epsilon is only meaningful for the mollified variant")
        elif self.variant == "mollified":
            if self.epsilon is None or not (0.0 < self.epsilon < 1.0):
                raise ValueError(f"mollified sigma needs epsilon in (0, 1), got {self.epsilon}")
            object.__setattr__(self, "epsilon", float(self.epsilon))
        else:
            raise ValueError(f"unknown sigma variant {self.variant!r}")

    @classmethod
    def mollified(cls, epsilon: float) -> SigmaSpec:
        return cls("mollified", epsilon)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[0, L_x] (x [0, L_y])``.

    Fields live in arrays of shape ``cells``; axis 0 is ``x``.
    """

    cells: tuple
    lengths: tuple

    def __post_init__(self):
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        lengths = tuple(float(length) for length in np.atleast_1d(self.lengths))
        if len(cells) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if len(lengths) != len(cells):
            raise ValueError("cells and lengths must have the same number of axes")
        if any(n < 4 for n in cells):
            raise ValueError(f"every axis needs at least 4 cells, got {cells}")
        if any(not (math.isfinite(length) and length > 0) for length in lengths):
            raise ValueError(f"lengths must be positive, got {lengths}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, n: int, dim: int = 1, length: float = 1.0) -> Grid:
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple:
        return self.cells

    @cached_property
    def spacing(self) -> tuple:
        return tuple(length / n for length, n in zip(self.lengths, self.cells))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def centers(self) -> tuple:
        """Cell-centre coordinates, broadcastable to ``shape`` (``np.meshgrid`` with ij indexing)."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def check(self, array, name="field") -> np.ndarray:
        array = np.asarray(array, dtype=float)
        if array.shape != self.shape:
            raise GridShapeError(f"{name} has shape {array.shape}, grid expects {self.shape}")
        return array


@dataclass
class State:
    """Four nonnegative cell fields at time ``t``.

    A state is owned by a single simulation; steppers return new instances.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        for name in SPECIES:
            array = self.grid.check(getattr(self, name), name)
            setattr(self, name, array)

    @classmethod
    def from_stack(cls, t, stack, grid) -> State:
        return cls(t, stack[0], stack[1], stack[2], stack[3], grid)

    @property
    def fields(self) -> tuple:
        return (self.u, self.v, self.w, self.z)

    def stack(self) -> np.ndarray:
        return np.stack(self.fields)

    def copy(self) -> State:
        return State(self.t, self.u.copy(), self.v.copy(), self.w.copy(), self.z.copy(), self.grid)

    def check_nonnegative(self):
        for name, array in zip(SPECIES, self.fields):
            if np.any(array < 0) or not np.all(np.isfinite(array)):
                bad = np.flatnonzero(~(array >= 0))[0]
                index = np.unravel_index(bad, array.shape)
                raise PositivityError(
                    f"field {name} is negative or not finite at cell {index}",
                    field=name, index=tuple(int(i) for i in index),
                    value=float(array[index]), t=self.t)

    def minima(self) -> dict:
        return {name: float(array.min()) for name, array in zip(SPECIES, self.fields)}


@dataclass(frozen=True)
class InitBudget:
    """Bound ``A`` on the entropy/Dirichlet quantities of initial data.

    The six contributions are ``int u ln u``, ``max v``, ``||w||_3``,
    ``int z ln z``, ``int |grad v|^2/v`` and ``int |grad w|^2/w``.
    """

    a_bound: float
    entropy_u: float
    sup_v: float
    l3_w: float
    entropy_z: float
    quotient_v: float
    quotient_w: float

    def __post_init__(self):
        if not self.a_bound > 0:
            raise ValueError("a_bound must be positive")
        if self.total > self.a_bound:
            raise ValueError(f"contributions sum to {self.total} > a_bound = {self.a_bound}")

    @property
    def total(self) -> float:
        return (self.entropy_u + self.sup_v + self.l3_w + self.entropy_z
                + self.quotient_v + self.quotient_w)


# ---------------------------------------------------------------------------
# saturation law

def _smooth_bump_piece(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def cutoff(tau):
    """Smooth cutoff ``zeta``: 1 on ``(-inf, 1]``, 0 on ``[2, inf)``."""
    tau = np.asarray(tau, dtype=float)
    a = _smooth_bump_piece(2.0 - tau)
    b = _smooth_bump_piece(tau - 1.0)
    return a / (a + b)


@lru_cache(maxsize=None)
def _cutoff_table(intervals: int = 512, order: int = 10):
    # cumulative integral of the cutoff on [1, 2] by composite Gauss-Legendre;
    # values plus exact slopes feed a cubic Hermite interpolant
    nodes = np.linspace(1.0, 2.0, intervals + 1)
    xg, wg = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (nodes[1] - nodes[0])
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    pts = mids[:, None] + half * xg[None, :]
    pieces = half * (cutoff(pts) @ wg)
    values = 1.0 + np.concatenate(([0.0], np.cumsum(pieces)))
    slopes = cutoff(nodes)
    return nodes, values, slopes


def _cutoff_integral(x):
    """``Z(x) = int_0^x zeta`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    nodes, values, slopes = _cutoff_table()
    plateau = values[-1]
    out = np.where(x <= 1.0, x, plateau)
    mid = (x > 1.0) & (x < 2.0)
    if np.any(mid):
        xm = x[mid]
        h = nodes[1] - nodes[0]
        k = np.clip(((xm - 1.0) / h).astype(int), 0, len(nodes) - 2)
        s = (xm - nodes[k]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out[mid] = (h00 * values[k] + h10 * h * slopes[k]
                    + h01 * values[k + 1] + h11 * h * slopes[k + 1])
    return out


def _check_nonnegative_arg(s, what):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError(f"{what} is defined for nonnegative arguments only")
    return s


def _as_output(result, scalar_input):
    return float(result) if scalar_input else result


def sigma_eval(s, spec: SigmaSpec):
    """Evaluate the saturation law ``sigma(s)`` for ``s >= 0``.

    For the mollified law ``sigma_eps(s) = int_0^s zeta(eps tau) dtau``; it
    equals ``s`` on ``[0, 1/eps]`` and is constant ``1.5/eps`` on ``[2/eps, inf)``.
    """
    scalar = np.ndim(s) == 0
    s = _check_nonnegative_arg(s, "sigma")
    if spec.variant == "identity":
        return _as_output(s, scalar)
    eps = spec.epsilon
    x = eps * s
    out = np.where(x <= 1.0, s, _cutoff_integral(x) / eps)
    return _as_output(out, scalar)


def sigma_prime(s, spec: SigmaSpec):
    """Derivative of :func:`sigma_eval`; always in ``[0, 1]``."""
    scalar = np.ndim(s) == 0
    s = _check_nonnegative_arg(s, "sigma'")
    if spec.variant == "identity":
        return _as_output(np.ones_like(s), scalar)
    return _as_output(cutoff(spec.epsilon * s), scalar)


def f_eval(w, kinetics: KineticsF):
    """Lymphocyte activation ``f(w)``, with ``0 <= f(w) <= w``."""
    scalar = np.ndim(w) == 0
    w = _check_nonnegative_arg(w, "f")
    if kinetics.variant == "identity":
        return _as_output(w, scalar)
    return _as_output(w / (kinetics.beta_z + w), scalar)


def f_prime(w, kinetics: KineticsF):
    scalar = np.ndim(w) == 0
    w = _check_nonnegative_arg(w, "f'")
    if kinetics.variant == "identity":
        return _as_output(np.ones_like(w), scalar)
    return _as_output(kinetics.beta_z / (kinetics.beta_z + w) ** 2, scalar)


# ---------------------------------------------------------------------------
# kinetics

# (species, term) pairs in the row order of kinetic_terms
KINETIC_TERMS = (
    ("u", "infection"), ("u", "death"), ("u", "production"),
    ("v", "replication"), ("v", "uptake"), ("v", "release"),
    ("w", "conversion"), ("w", "necrosis"), ("w", "death"),
    ("z", "activation"), ("z", "death"),
)
_SPECIES_OFFSETS = (0, 3, 6, 9)


def _sigma_unchecked(s, spec):
    if spec.variant == "identity":
        return s
    x = spec.epsilon * s
    if np.all(x <= 1.0):
        return s
    return np.where(x <= 1.0, s, _cutoff_integral(x) / spec.epsilon)


def _f_unchecked(w, kinetics):
    if kinetics.variant == "identity":
        return w
    return w / (kinetics.beta_z + w)


def kinetic_terms(u, v, w, z, params: Params, kinetics: KineticsF, spec: SigmaSpec) -> np.ndarray:
    """Signed pointwise reaction terms, stacked in :data:`KINETIC_TERMS` order.

    Inputs are assumed nonnegative (callers validate).
    """
    p = params
    su = _sigma_unchecked(u, spec)
    sz = _sigma_unchecked(z, spec)
    suv = su * v
    out = np.empty((11,) + np.shape(u))
    out[0] = -p.gamma_u * suv
    out[1] = -p.delta_u * u
    out[2] = p.beta_u
    out[3] = p.rho_v * v
    out[4] = -p.gamma_v * suv
    out[5] = p.mu_v * w
    out[6] = p.gamma_w * suv
    out[7] = -p.alpha_w * w * sz
    out[8] = -p.mu_w * w
    out[9] = p.alpha_z * _f_unchecked(w, kinetics) * sz
    out[10] = -p.delta_z * z
    return out


def sum_terms(terms: np.ndarray) -> np.ndarray:
    """Per-species totals of :func:`kinetic_terms`, shape ``(4, ...)``."""
    return np.add.reduceat(terms, _SPECIES_OFFSETS, axis=0)


def reaction_rhs(state: State, params: Params, kinetics: KineticsF, spec: SigmaSpec) -> tuple:
    """Kinetic right-hand sides ``(F_u, F_v, F_w, F_z)`` without diffusion and taxis."""
    fields_ = [state.grid.check(a, name) for name, a in zip(SPECIES, state.fields)]
    for name, a in zip(SPECIES, fields_):
        if np.any(a < 0):
            raise PositivityError(f"reaction_rhs needs nonnegative {name}", field=name)
    stacked = sum_terms(kinetic_terms(*fields_, params, kinetics, spec))
    return tuple(stacked)
