"""Centralized numeric tolerances.

Every check in the library reads its tolerance from a single record so
that configs can override them in one place and test output always states
which tolerance was applied.
"""

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Tolerances:
    exact: float = 1e-12            # identities that hold to rounding on finite trees
    weights: float = 1e-12          # probability-weight normalization
    hull: float = 1e-9              # linear-feasibility hull membership
    duality: float = 1e-9           # duality roundtrip residual
    marginal: float = 1e-10         # finite-dimensional agreement
    scheme: float = 2e-2            # closed-form PDE benchmarks
    semigroup: float = 5e-2         # composition residual at benchmark resolution
    generator: float = 5e-2         # pointwise generator vs Hamiltonian
    translation: float = 1e-8       # interior translation equivariance
    control: float = 1e-2           # lattice control benchmarks
    cross_backend: float = 5e-2     # PDE vs lattice on shared data
    laplace: float = 3e-2           # entropic benchmarks against closed forms
    limit: float = 1e-2             # deterministic small-noise limit

    def override(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)


DEFAULT_TOL = Tolerances()
