"""Finite-volume operators on a uniform cell-centred grid with zero-flux boundaries.

Face arrays along axis ``a`` have ``n_a + 1`` entries on that axis; the two
boundary faces always carry zero flux.  Public functions validate their
inputs; the underscore kernels are the unchecked versions used by the
time stepper.
"""

from __future__ import annotations

import numpy as np

from .errors import PositivityError
from .model import Grid, SigmaSpec, sigma_prime


def _sl(axis, ndim, start=None, stop=None):
    index = [slice(None)] * ndim
    index[axis] = slice(start, stop)
    return tuple(index)


def _interior_gradients(field, spacing):
    return [np.diff(field, axis=axis) / h for axis, h in enumerate(spacing)]


def _pad_faces(interior, axis):
    shape = list(interior.shape)
    shape[axis] += 2
    out = np.zeros(shape)
    out[_sl(axis, out.ndim, 1, -1)] = interior
    return out


def _div_interior(fluxes, spacing, shape):
    """Divergence of interior face fluxes (boundary fluxes are zero).

    The flux on the face between cells ``i`` and ``i+1`` adds ``+J/h`` to
    cell ``i`` and ``-J/h`` to cell ``i+1``, so the cell sum telescopes to zero.
    """
    out = np.zeros(shape)
    ndim = len(shape)
    for axis, (flux, h) in enumerate(zip(fluxes, spacing)):
        scaled = flux / h
        out[_sl(axis, ndim, None, -1)] += scaled
        out[_sl(axis, ndim, 1, None)] -= scaled
    return out


def _laplacian(field, spacing):
    return _div_interior(_interior_gradients(field, spacing), spacing, field.shape)


def _taxis_stacked(carriers, signals, chis, mobility, spacing):
    """Taxis divergence for a stack of independent (carrier, signal) pairs.

    Axis 0 of every array indexes the pair; ``chis`` broadcasts against it.
    """
    ndim = carriers.ndim
    out = np.zeros(carriers.shape)
    for k, h in enumerate(spacing):
        lo = _sl(k + 1, ndim, None, -1)
        hi = _sl(k + 1, ndim, 1, None)
        g = (signals[hi] - signals[lo]) / h
        flux = (chis / h) * g * np.where(g > 0, mobility[lo], mobility[hi])
        out[lo] -= flux
        out[hi] += flux
    return out


def _outflow_stacked(signals, chis, spacing):
    ndim = signals.ndim
    rate = np.zeros(signals.shape)
    for k, h in enumerate(spacing):
        lo = _sl(k + 1, ndim, None, -1)
        hi = _sl(k + 1, ndim, 1, None)
        g = (signals[hi] - signals[lo]) / (h * h)
        rate[lo] += np.maximum(g, 0.0)
        rate[hi] += np.maximum(-g, 0.0)
    return chis * rate


def gradient_faces(field, grid: Grid) -> tuple:
    """Two-point face gradients, one array per axis; boundary faces are 0."""
    field = grid.check(field)
    return tuple(_pad_faces(g, axis)
                 for axis, g in enumerate(_interior_gradients(field, grid.spacing)))


def divergence(faces, grid: Grid) -> np.ndarray:
    """Cell divergence of a face-flux field (telescoping differences)."""
    out = np.zeros(grid.shape)
    for axis, (flux, h) in enumerate(zip(faces, grid.spacing)):
        out += np.diff(flux, axis=axis) / h
    return out


def laplacian_neumann(field, grid: Grid) -> np.ndarray:
    """3-point (1D) / 5-point (2D) Laplacian with mirror ghost cells."""
    return _laplacian(grid.check(field), grid.spacing)


def taxis_fluxes(carrier, signal, chi, spec: SigmaSpec, grid: Grid) -> tuple:
    """Upwind face fluxes ``chi * m(c)_up * grad s`` with ``m(c) = c sigma'(c)``."""
    carrier = grid.check(carrier, "carrier")
    signal = grid.check(signal, "signal")
    if np.any(carrier < 0) or np.any(signal < 0):
        raise PositivityError("taxis needs nonnegative carrier and signal")
    mobility = carrier * sigma_prime(carrier, spec)
    fluxes = []
    for axis, g in enumerate(_interior_gradients(signal, grid.spacing)):
        left = mobility[_sl(axis, grid.dim, None, -1)]
        right = mobility[_sl(axis, grid.dim, 1, None)]
        fluxes.append(_pad_faces(chi * g * np.where(g > 0, left, right), axis))
    return tuple(fluxes)


def taxis_divergence(carrier, signal, chi, spec: SigmaSpec, grid: Grid) -> np.ndarray:
    """Conservative upwind discretisation of ``-chi div(c sigma'(c) grad s)``."""
    return -divergence(taxis_fluxes(carrier, signal, chi, spec, grid), grid)


def taxis_outflow_rate(signal, chi, grid: Grid) -> np.ndarray:
    """Per-cell upper bound on the fraction of carrier leaving a cell per unit time.

    A face with velocity ``chi * g`` pointing out of the cell drains it at rate
    ``chi |g| / h`` times ``c sigma'(c) / c <= 1``.
    """
    rate = np.zeros(grid.shape)
    ndim = grid.dim
    for axis, (g, h) in enumerate(zip(_interior_gradients(signal, grid.spacing), grid.spacing)):
        rate[_sl(axis, ndim, None, -1)] += np.maximum(g, 0.0) / h
        rate[_sl(axis, ndim, 1, None)] += np.maximum(-g, 0.0) / h
    return chi * rate


def cell_gradient_squared(field, grid: Grid) -> np.ndarray:
    """``|grad phi|^2`` per cell: squared face gradients averaged over the interior faces.

    Boundary faces (which carry the imposed zero gradient) are left out of
    the average, so boundary cells use their single interior face.
    """
    field = grid.check(field)
    out = np.zeros(grid.shape)
    ndim = grid.dim
    for axis, g in enumerate(_interior_gradients(field, grid.spacing)):
        n = grid.shape[axis]
        acc = np.zeros(grid.shape)
        acc[_sl(axis, ndim, None, -1)] += g**2
        acc[_sl(axis, ndim, 1, None)] += g**2
        counts = np.full(n, 2.0)
        counts[0] = counts[-1] = 1.0
        shape = [1] * ndim
        shape[axis] = n
        out += acc / counts.reshape(shape)
    return out


def _extrapolate_ghosts(a, axis):
    # quadratic extrapolation: the boundary second difference then equals the
    # neighbouring interior one (exact for quadratic profiles)
    ndim = a.ndim
    n = a.shape[axis]

    def at(i):
        return a[_sl(axis, ndim, i, i + 1)]

    lo = 3 * at(0) - 3 * at(1) + at(2)
    hi = 3 * at(n - 1) - 3 * at(n - 2) + at(n - 3)
    return np.concatenate([lo, a, hi], axis=axis)


def log_hessian(field, grid: Grid) -> tuple:
    """Second differences of ``ln phi``: ``(d_xx,)`` in 1D, ``(d_xx, d_yy, d_xy)`` in 2D."""
    field = grid.check(field)
    if not np.all(field > 0):
        bad = np.flatnonzero(~(field > 0))[0]
        index = tuple(int(i) for i in np.unravel_index(bad, field.shape))
        raise PositivityError(
            f"log-Hessian needs a strictly positive field; cell {index} holds {field[index]!r}",
            index=index, value=float(field[index]))
    ext = np.log(field)
    for axis in range(grid.dim):
        ext = _extrapolate_ghosts(ext, axis)
    c = ext[(slice(1, -1),) * grid.dim]
    hx = grid.spacing[0]
    if grid.dim == 1:
        return ((ext[2:] - 2 * c + ext[:-2]) / hx**2,)
    hy = grid.spacing[1]
    dxx = (ext[2:, 1:-1] - 2 * c + ext[:-2, 1:-1]) / hx**2
    dyy = (ext[1:-1, 2:] - 2 * c + ext[1:-1, :-2]) / hy**2
    dxy = (ext[2:, 2:] - ext[2:, :-2] - ext[:-2, 2:] + ext[:-2, :-2]) / (4 * hx * hy)
    return dxx, dyy, dxy


def d2_log_frobenius(field, grid: Grid) -> np.ndarray:
    """Squared Frobenius norm ``|D^2 ln phi|^2`` per cell."""
    parts = log_hessian(field, grid)
    if grid.dim == 1:
        return parts[0] ** 2
    dxx, dyy, dxy = parts
    return dxx**2 + dyy**2 + 2 * dxy**2
