"""Conditional expectation families and their structural checks.

A family assigns to every node ``(k, history)`` a value for each payoff,
the nodewise analogue of a conditional nonlinear expectation.  The checks
here probe the tower property, stability of ambiguity sets under
conditioning and pasting, determination by finite-dimensional marginals
and time-shift homogeneity.
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linprog

from ..config import DEFAULT_TOL
from .expectations import (AmbiguitySet, PenaltyTable, convex_expectation,
                           entropic_expectation, hull_membership,
                           sublinear_expectation)
from .measures import PathMeasure, expected_value, regular_conditional
from .tree import Functional


class ExpectationFamily:
    """Base interface: nodewise values and node-measurable re-reads."""

    def value(self, k, history, phi):
        raise NotImplementedError

    def condexp(self, k, phi):
        """Evaluate at every time-``k`` node, re-read as a Functional.

        The output is constant on each subtree, hence measurable at ``k``.
        """
        out = np.empty(self.tree.n_leaves)
        for history in self.tree.nodes_at(k):
            start, stop = self.tree.leaf_block(k, history)
            out[start:stop] = self.value(k, history, phi)
        return Functional(out)


@dataclass
class LinearFamily(ExpectationFamily):
    """Classical conditional expectation under one prior."""

    tree: object
    prior: PathMeasure

    def value(self, k, history, phi):
        start, stop = self.tree.leaf_block(k, history)
        mass = self.prior.weights[start:stop].sum()
        if mass > 0.0:
            return float(np.dot(self.prior.weights[start:stop],
                                phi.values[start:stop])) / mass
        return float(phi.values[start:stop].mean())


@dataclass
class EntropicFamily(ExpectationFamily):
    """Conditional entropic risk under one prior at temperature ``eps``."""

    tree: object
    prior: PathMeasure
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self._kernels = {}

    def _conditional(self, k, history):
        key = (k, tuple(history))
        if key not in self._kernels:
            self._kernels[key] = regular_conditional(
                self.tree, self.prior, k)[tuple(history)]
        return self._kernels[key]

    def value(self, k, history, phi):
        return entropic_expectation(self._conditional(k, history), self.eps, phi)


@dataclass
class SublinearFamily(ExpectationFamily):
    """Worst-case expectation over an ambiguity set."""

    ambiguity: AmbiguitySet

    @property
    def tree(self):
        return self.ambiguity.tree

    def value(self, k, history, phi):
        return sublinear_expectation(self.ambiguity, k, history, phi)


@dataclass
class PenaltyFamily(ExpectationFamily):
    """Penalized worst case over a finite catalogue."""

    table: PenaltyTable

    @property
    def tree(self):
        return self.table.tree

    def value(self, k, history, phi):
        return convex_expectation(self.table, k, history, phi)


def tower_residual(family, kt, ks, history, phi):
    """|E_t(E_s(phi)) - E_t(phi)| at one time-``kt`` node, with ``kt < ks``."""
    if not kt < ks:
        raise ValueError("need kt < ks")
    inner = family.condexp(ks, phi)
    return abs(family.value(kt, history, inner) - family.value(kt, history, phi))


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    witness: str = ""


def check_stability(amb, kt, ks, tol=None):
    """Conditioning and pasting stability of an ambiguity set between two times.

    Conditioning: every positive-mass conditional of every member at ``kt``
    must lie in the convex hull of the set at the corresponding ``ks`` node.
    Pasting: every pasted measure assembled from member vertices at ``ks``
    must lie back in the hull at ``kt`` (vertices suffice by convexity of
    both the hull and the pasting map in the kernel).
    """
    tol = DEFAULT_TOL.hull if tol is None else tol
    tree = amb.tree
    for history in tree.nodes_at(kt):
        verts_t = amb.measures(kt, history)
        # conditioning stability
        for m, P in enumerate(verts_t):
            kernel = regular_conditional(tree, P, ks)
            for g in tree.nodes_at(ks):
                start, stop = tree.leaf_block(ks, g)
                if P.weights[start:stop].sum() <= tol:
                    continue
                if not hull_membership(kernel[g], amb.measures(ks, g), tol):
                    return CheckReport(
                        "stability", False, math.inf,
                        f"conditional of member {m} at ({kt},{history}) "
                        f"leaves the hull at ({ks},{g})")
        # pasting stability over vertex kernel assemblies
        for m, P in enumerate(verts_t):
            live = [g for g in tree.nodes_at(ks)
                    if P.node_mass(tree, ks, g) > tol]
            choice_lists = [amb.measures(ks, g) for g in live]
            for combo in product(*choice_lists):
                w = np.zeros(tree.n_leaves)
                for g, Q in zip(live, combo):
                    start, stop = tree.leaf_block(ks, g)
                    w[start:stop] = P.node_mass(tree, ks, g) * Q.weights[start:stop]
                pasted = PathMeasure(w)
                if not hull_membership(pasted, verts_t, tol):
                    return CheckReport(
                        "stability", False, math.inf,
                        f"pasting member {m} at ({kt},{history}) with a vertex "
                        f"kernel at {ks} leaves the hull")
    return CheckReport("stability", True, 0.0)


def _cylinder_indicators(tree, k):
    """Indicator functionals of all coordinate cylinder sets after time ``k``.

    Spanning family for the marginal comparison: one indicator per subset
    of later time indices and state assignment, including the full-depth
    ones (leaf indicators).
    """
    coords_all = list(range(k + 1, tree.n_times))
    out = []
    for r in range(1, len(coords_all) + 1):
        for coords in _subsets(coords_all, r):
            for states in product(tree.states, repeat=r):
                vals = np.ones(tree.n_leaves)
                for j, leaf in enumerate(tree.leaves()):
                    if any(leaf[c] != s for c, s in zip(coords, states)):
                        vals[j] = 0.0
                out.append(Functional(vals))
    return out


def _subsets(items, r):
    from itertools import combinations
    return combinations(items, r)


def marginal_uniqueness_check(fam1, fam2, k, history, rng=None,
                              n_random=200, tol=None):
    """Agreement on cylinder functions versus agreement on all payoffs.

    If the two families agree on every coordinate cylinder indicator after
    ``k`` within ``tol``, they must agree on every payoff within ``tol``;
    the report records the worst gap on each test class.
    """
    tol = DEFAULT_TOL.marginal if tol is None else tol
    tree = fam1.tree
    rng = np.random.default_rng(0) if rng is None else rng
    cyl_gap = 0.0
    for phi in _cylinder_indicators(tree, k):
        cyl_gap = max(cyl_gap, abs(fam1.value(k, history, phi)
                                   - fam2.value(k, history, phi)))
    rand_gap = 0.0
    for _ in range(n_random):
        phi = Functional(rng.uniform(-1, 1, tree.n_leaves))
        rand_gap = max(rand_gap, abs(fam1.value(k, history, phi)
                                     - fam2.value(k, history, phi)))
    consistent = (cyl_gap > tol) or (rand_gap <= tol)
    witness = "" if consistent else (
        f"cylinder gap {cyl_gap:.3e} <= {tol} but payoff gap {rand_gap:.3e}")
    return CheckReport("marginal-uniqueness", consistent,
                       max(cyl_gap, rand_gap), witness)


def separating_functional(amb1, amb2, k, history, tol=None):
    """A payoff on which the two worst-case expectations provably differ.

    Searches, per vertex of either hull, for a leaf function in the unit
    sup-ball maximizing its expectation against the worst case of the other
    set (a linear program).  Returns ``(phi, gap)`` with the achieved value
    gap, or ``None`` when the hulls coincide up to ``tol``.
    """
    tol = DEFAULT_TOL.hull if tol is None else tol
    for first, second in ((amb1, amb2), (amb2, amb1)):
        others = second.measures(k, history)
        A = np.stack([Q.weights for Q in others])
        for P in first.measures(k, history):
            n = P.weights.size
            # maximize p.phi - s  s.t.  Q_i.phi - s <= 0,  |phi| <= 1
            c = np.concatenate([-P.weights, [1.0]])
            A_ub = np.hstack([A, -np.ones((A.shape[0], 1))])
            b_ub = np.zeros(A.shape[0])
            res = linprog(c, A_ub=A_ub, b_ub=b_ub,
                          bounds=[(-1, 1)] * n + [(None, None)],
                          method="highs")
            if res.success and -res.fun > tol:
                return Functional(res.x[:n]), float(-res.fun)
    return None


def shift_homogeneity_residual(family, delta, cyl, tol_pairs=True):
    """Residual of time-shift homogeneity for an integer index shift.

    Compares the value at each node ``(k, h)`` with the value of the
    shift-composed payoff at the translated node ``(k - delta, h[delta:])``,
    over all nodes where both sides are defined and the payoff reads only
    coordinates after ``k``.
    """
    if delta < 0:
        raise ValueError("shift must be nonnegative")
    tree = family.tree
    if delta >= tree.n_times:
        raise ValueError("shift leaves the time window")
    phi = cyl.materialize(tree)
    shifted = cyl.shifted(delta).materialize(tree) if delta else phi
    worst = None
    for k in range(delta, tree.n_times):
        if min(cyl.coords) <= k:
            continue
        for h in tree.nodes_at(k):
            g = h[delta:]
            if not tree.is_node(k - delta, g):
                continue
            v1 = family.value(k, h, phi)
            v2 = family.value(k - delta, g, shifted)
            gap = abs(v1 - v2)
            worst = gap if worst is None else max(worst, gap)
    if worst is None:
        raise ValueError("no node admits this shift inside the window")
    return worst
