"""Randomized order/convexity property drivers shared by the test modules.

Each driver runs ``n_cases`` randomized instances of one structural
property on one backend and returns the worst signed violation (positive
means the property failed by that much).  Properties checked:
monotonicity, convexity, cash additivity, positive homogeneity (sublinear
constructions only) and constants preservation.
"""

import numpy as np

from nlx.lattice import (EntropicFamily, Functional, SublinearFamily,
                         constant_functional, random_measure,
                         random_stable_ambiguity, random_tree)
from nlx.pde import evolve, gheat_spec, grid_1d

PROPERTIES = ("monotonicity", "convexity", "cash", "homogeneity", "constants")


def _lattice_case(rng, sublinear, max_steps=2):
    tree = random_tree(rng, max_steps=max_steps)
    if sublinear:
        fam = SublinearFamily(random_stable_ambiguity(tree, rng))
    else:
        fam = EntropicFamily(tree, random_measure(tree, rng),
                             float(rng.uniform(0.3, 2.0)))
    k = int(rng.integers(0, tree.n_times - 1))
    history = tree.nodes_at(k)[int(rng.integers(0, len(tree.nodes_at(k))))]
    return tree, fam, k, history


def lattice_property(name, n_cases, rng, tol=1e-10):
    """Worst violation of ``name`` over random trees and nodes."""
    worst = 0.0
    for case in range(n_cases):
        sublinear = (name == "homogeneity") or case % 2 == 0
        # an occasional deep tree keeps the big catalogues covered
        tree, fam, k, h = _lattice_case(rng, sublinear,
                                        max_steps=3 if case % 10 == 0 else 2)
        phi = Functional(rng.uniform(-1, 1, tree.n_leaves))
        psi = Functional(rng.uniform(-1, 1, tree.n_leaves))
        c = float(rng.uniform(0.0, 2.0))
        if name == "monotonicity":
            above = phi + Functional(np.abs(psi.values))
            worst = max(worst, fam.value(k, h, phi) - fam.value(k, h, above))
        elif name == "convexity":
            t = float(rng.uniform(0.0, 1.0))
            mix = Functional(t * phi.values + (1 - t) * psi.values)
            worst = max(worst, fam.value(k, h, mix)
                        - t * fam.value(k, h, phi)
                        - (1 - t) * fam.value(k, h, psi))
        elif name == "cash":
            worst = max(worst, abs(fam.value(k, h, phi + c)
                                   - fam.value(k, h, phi) - c))
        elif name == "homogeneity":
            worst = max(worst, abs(fam.value(k, h, c * phi)
                                   - c * fam.value(k, h, phi)))
        elif name == "constants":
            worst = max(worst, abs(fam.value(k, h, constant_functional(tree, c))
                                   - c))
        else:
            raise ValueError(name)
    return worst


def _pde_case(rng):
    lo, hi = sorted(rng.uniform(0.5, 2.0, 2))
    spec = gheat_spec(grid_1d(-4.0, 4.0, 0.25), a_lo=lo, a_hi=max(hi, lo + 0.1),
                      n_controls=5)
    t = float(rng.uniform(0.05, 0.3))
    u = rng.uniform(-1, 1, spec.grid.shape)
    v = rng.uniform(-1, 1, spec.grid.shape)
    return spec, t, u, v


def pde_property(name, n_cases, rng, tol=1e-10):
    """Worst violation of ``name`` for the explicit monotone scheme."""
    worst = 0.0
    for _ in range(n_cases):
        spec, t, u, v = _pde_case(rng)
        c = float(rng.uniform(0.0, 2.0))
        if name == "monotonicity":
            above = u + np.abs(v)
            worst = max(worst, float(np.max(evolve(spec, u, t).values
                                            - evolve(spec, above, t).values)))
        elif name == "convexity":
            s = float(rng.uniform(0.0, 1.0))
            mix = evolve(spec, s * u + (1 - s) * v, t).values
            bound = s * evolve(spec, u, t).values \
                + (1 - s) * evolve(spec, v, t).values
            worst = max(worst, float(np.max(mix - bound)))
        elif name == "cash":
            worst = max(worst, float(np.max(np.abs(
                evolve(spec, u + c, t).values
                - evolve(spec, u, t).values - c))))
        elif name == "homogeneity":
            worst = max(worst, float(np.max(np.abs(
                evolve(spec, c * u, t).values
                - c * evolve(spec, u, t).values))))
        elif name == "constants":
            const = np.full(spec.grid.shape, c)
            worst = max(worst, float(np.max(np.abs(
                evolve(spec, const, t).values - c))))
        else:
            raise ValueError(name)
    return worst
