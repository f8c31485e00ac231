"""Piecewise-linear functions on a node grid."""

from __future__ import annotations

import numpy as np

from .errors import EmptyGrid, NonFinite


class GridFunction:
    """Continuous piecewise-linear function through ``(x[i], values[i])``.

    Grids produced by the solver are uniform; comparison functions built by
    :func:`~obstreg.variational.linear_replace` and
    :func:`~obstreg.variational.clip_to_admissible` carry extra inserted
    nodes, so the node array is stored explicitly.
    """

    __slots__ = ("x", "values")

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape:
            raise ValueError("x and values must be 1-D arrays of equal length")
        if x.size < 2:
            raise EmptyGrid("a grid function needs at least two nodes")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(values))):
            raise NonFinite("grid function has non-finite entries")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        self.x = x
        self.values = values

    @classmethod
    def uniform(cls, a, b, values):
        values = np.asarray(values, dtype=float)
        if values.size < 2:
            raise EmptyGrid("a grid function needs at least two nodes")
        return cls(np.linspace(a, b, values.size), values)

    @classmethod
    def sample(cls, func, a, b, n):
        x = np.linspace(a, b, n)
        return cls(x, np.broadcast_to(np.asarray(func(x), dtype=float), x.shape))

    @property
    def a(self):
        return float(self.x[0])

    @property
    def b(self):
        return float(self.x[-1])

    @property
    def n(self):
        return self.x.size

    @property
    def h(self):
        """Cell widths."""
        return np.diff(self.x)

    @property
    def midpoints(self):
        return 0.5 * (self.x[1:] + self.x[:-1])

    def slopes(self):
        return np.diff(self.values) / np.diff(self.x)

    def __call__(self, t):
        return np.interp(t, self.x, self.values)

    def with_values(self, values):
        return GridFunction(self.x, values)

    def copy(self):
        return GridFunction(self.x.copy(), self.values.copy())

    def __repr__(self):
        return f"GridFunction(n={self.n}, a={self.a:g}, b={self.b:g})"


def insert_nodes(u, points):
    """Return ``u`` with the given points added as nodes (values by interpolation)."""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    tol = 1e-12 * (u.b - u.a)
    new = []
    for p in points:
        if p < u.a - tol or p > u.b + tol:
            raise ValueError(f"point {p} outside [{u.a}, {u.b}]")
        j = np.searchsorted(u.x, p)
        near = (j < u.n and abs(u.x[j] - p) <= tol) or (j > 0 and abs(u.x[j - 1] - p) <= tol)
        if not near:
            new.append(p)
    if not new:
        return u
    x = np.concatenate([u.x, new])
    order = np.argsort(x, kind="stable")
    x = x[order]
    vals = np.concatenate([u.values, u(np.asarray(new))])[order]
    return GridFunction(x, vals)


def snap(u, p):
    """Index of the node of ``u`` at ``p`` (within the insertion tolerance)."""
    j = int(np.argmin(np.abs(u.x - p)))
    return j
