"""Exception types shared across the package."""

from __future__ import annotations


class GridShapeError(ValueError):
    """An array does not match the shape of the grid it is used with."""


class PositivityError(ValueError):
    """A field that must be nonnegative (or strictly positive) is not.

    Attributes
    ----------
    field : str
        Name of the offending field ("u", "v", "w", "z" or a descriptive label).
    index : tuple of int or None
        Cell index of the first offending value.
    value : float
        The offending value.
    t : float or None
        Simulation time, when known.
    """

    def __init__(self, message, field="?", index=None, value=float("nan"), t=None):
        super().__init__(message)
        self.field = field
        self.index = index
        self.value = value
        self.t = t


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""
