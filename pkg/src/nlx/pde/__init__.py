"""Monotone finite-difference solver for HJB-driven semigroups."""

from .grid import DIRICHLET, NEUMANN, SpatialGrid, ValueField, grid_1d
from .hjb import (CFLViolation, ComparisonReport, HamiltonianSpec, LevyReport,
                  NonFiniteField, comparison_check, evolve, hamiltonian_apply,
                  levy_invariants, nested_two_time_value, pointwise_generator,
                  semigroup_residual)

def gheat_spec(grid, a_lo=1.0, a_hi=2.0, n_controls=17):
    """Volatility-band benchmark: drift 0, diffusion coefficient in a band."""
    import numpy as np

    controls = list(np.linspace(a_lo, a_hi, n_controls))
    return HamiltonianSpec(
        grid=grid,
        controls=controls,
        drift=lambda lam, *X: np.zeros_like(X[0]),
        covariance=lambda lam, *X: np.full_like(X[0], lam),
        bound=max(abs(a_lo), abs(a_hi)) ** 0.5 * 2,
    )

__all__ = [name for name in dir() if not name.startswith("_")]
