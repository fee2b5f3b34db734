"""Batched Thomas algorithm and the Neumann diffusion matrices built on it."""

from __future__ import annotations

import numpy as np


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve tridiagonal systems along axis 0 with the Thomas algorithm.

    Parameters
    ----------
    lower : ndarray
        Sub-diagonal, length ``n - 1`` along axis 0.
    diag : ndarray
        Main diagonal, length ``n`` along axis 0.
    upper : ndarray
        Super-diagonal, length ``n - 1`` along axis 0.
    rhs : ndarray
        Right-hand sides of shape ``(n, ...)``; trailing axes are independent
        systems.  Coefficient arrays broadcast against ``rhs``.

    Returns
    -------
    ndarray
        Solution with the shape of ``rhs``.

    Notes
    -----
    No pivoting: the matrices used here are strictly diagonally dominant.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    tail = rhs.shape[1:]
    lower = np.broadcast_to(lower, (n - 1,) + tail)
    diag = np.broadcast_to(diag, (n,) + tail)
    upper = np.broadcast_to(upper, (n - 1,) + tail)

    cp = np.empty((n - 1,) + tail)
    dp = np.empty((n,) + tail)
    denom = diag[0]
    if n > 1:
        cp[0] = upper[0] / denom
    dp[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / denom

    x = dp
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def second_difference(a, axis, h):
    """Neumann (mirror-ghost) second difference of ``a`` along ``axis``."""
    g = np.diff(a, axis=axis)
    shape = list(a.shape)
    shape[axis] = 1
    zeros = np.zeros(shape)
    return np.diff(np.concatenate([zeros, g, zeros], axis=axis), axis=axis) / h**2


def implicit_neumann_solve(rhs, axis, h, coef):
    """Solve ``(I - coef * Lap_axis) x = rhs`` with the Neumann Laplacian along ``axis``.

    ``coef`` broadcasts against ``rhs`` and must be constant along ``axis``
    (for example shape ``(4, 1, 1)``: one value per stacked species).
    """
    moved = np.moveaxis(rhs, axis, 0)
    n = moved.shape[0]
    r = np.broadcast_to(np.asarray(coef, dtype=float) / h**2, rhs.shape)
    r = np.moveaxis(r, axis, 0)
    off = -r[1:]
    diag = 1.0 + 2.0 * r
    diag[0] = 1.0 + r[0]
    diag[n - 1] = 1.0 + r[n - 1]
    x = solve_tridiagonal(off, diag, off, moved)
    return np.moveaxis(x, 0, axis)
