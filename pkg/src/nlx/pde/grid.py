"""Spatial grids and value fields for the finite-difference solvers."""

from dataclasses import dataclass, field

import numpy as np

NEUMANN = "neumann"     # zero-gradient ghost nodes (replicate edge value)
DIRICHLET = "dirichlet"  # freeze boundary values at the initial datum


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform tensor grid on a box in 1 or 2 dimensions."""

    lo: tuple
    hi: tuple
    dx: tuple
    boundary: str = NEUMANN

    def __post_init__(self):
        d = len(self.lo)
        if d not in (1, 2) or len(self.hi) != d or len(self.dx) != d:
            raise ValueError("grid must be 1- or 2-dimensional and consistent")
        if self.boundary not in (NEUMANN, DIRICHLET):
            raise ValueError(f"unknown boundary rule {self.boundary!r}")
        for lo, hi, dx in zip(self.lo, self.hi, self.dx):
            if dx <= 0 or not np.isfinite([lo, hi, dx]).all():
                raise ValueError("grid bounds must be finite with positive step")
            if round((hi - lo) / dx) < 9:
                raise ValueError("need at least 8 interior points per axis")

    @property
    def dim(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(int(round((hi - lo) / dx)) + 1
                     for lo, hi, dx in zip(self.lo, self.hi, self.dx))

    def axes(self):
        return [np.linspace(lo, lo + (n - 1) * dx, n)
                for lo, dx, n in zip(self.lo, self.dx, self.shape)]

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def evaluate(self, fn):
        """Sample a callable of the coordinate arrays onto the grid."""
        return np.asarray(fn(*self.meshgrid()), dtype=float)

    def interior_mask(self, margin):
        """Nodes at least ``margin`` away from every boundary."""
        mask = np.ones(self.shape, dtype=bool)
        for ax, (lo, hi, xs) in enumerate(zip(self.lo, self.hi, self.axes())):
            ok = (xs >= lo + margin) & (xs <= hi - margin)
            mask &= ok.reshape([-1 if a == ax else 1 for a in range(self.dim)])
        return mask


def grid_1d(lo, hi, dx, boundary=NEUMANN):
    return SpatialGrid((lo,), (hi,), (dx,), boundary)


@dataclass(frozen=True)
class ValueField:
    """Real values on a grid, stamped with the evolution time reached."""

    grid: SpatialGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("value field contains non-finite entries")
        object.__setattr__(self, "values", vals)

    def sup_norm(self, margin=0.0):
        if margin <= 0.0:
            return float(np.max(np.abs(self.values)))
        return float(np.max(np.abs(self.values[self.grid.interior_mask(margin)])))

    def at(self, point):
        """Value at the grid node closest to ``point``."""
        idx = tuple(int(round((p - lo) / dx))
                    for p, lo, dx in zip(np.atleast_1d(point), self.grid.lo,
                                         self.grid.dx))
        return float(self.values[idx])
