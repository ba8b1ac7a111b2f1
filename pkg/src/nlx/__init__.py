"""nlx: numerics for nonlinear expectations.

Four numeric engines share this package:

* ``nlx.lattice`` -- exact convex/sublinear expectations, penalty duality,
  conditioning and pasting on finite scenario trees;
* ``nlx.pde`` -- monotone explicit finite differences for the sublinear
  Markovian semigroup driven by a control Hamiltonian;
* ``nlx.control`` -- Markov-chain approximation of relaxed control values
  with running costs;
* ``nlx.laplace`` -- entropic risk of controlled diffusions via two PDE
  routes and its deterministic small-noise limit.
"""

from .config import DEFAULT_TOL, Tolerances

__version__ = "0.1.0"
