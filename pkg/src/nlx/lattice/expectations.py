"""Convex, sublinear and entropic expectations on scenario trees.

The primal formulas take a sup over a finite measure catalogue; the dual
side (``dual_penalty``) returns the convex conjugate, with closed forms
for the entropic (relative entropy) and worst-case (hull indicator) cases
and a certified-lower-bound subgradient ascent otherwise.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp, rel_entr

from ..config import DEFAULT_TOL
from .measures import PathMeasure, expected_value
from .tree import Functional


class PenaltyViolation(ValueError):
    """A penalty table or ambiguity set breaks a structural requirement."""


@dataclass
class PenaltyTable:
    """Penalty values over a finite measure catalogue.

    ``entries[(k, history, i)]`` is the penalty charged to catalogue
    measure ``i`` when conditioning at node ``(k, history)``; missing
    entries default to ``+inf``.
    """

    tree: object
    catalogue: list
    entries: dict = field(default_factory=dict)

    def penalty(self, k, history, i):
        return self.entries.get((k, tuple(history), i), math.inf)

    def set(self, k, history, i, value):
        if value < 0:
            raise PenaltyViolation("penalties are nonnegative")
        self.entries[(k, tuple(history), i)] = float(value)

    def finite_indices(self, k, history):
        return [i for i in range(len(self.catalogue))
                if math.isfinite(self.penalty(k, history, i))]

    def validate(self, k, history, tol=None):
        """Check the normalization (min penalty 0) and support constraints."""
        tol = DEFAULT_TOL.weights if tol is None else tol
        idx = self.finite_indices(k, history)
        if not idx:
            raise PenaltyViolation(f"all penalties infinite at ({k}, {history})")
        best = min(self.penalty(k, history, i) for i in idx)
        if best > tol:
            raise PenaltyViolation(
                f"min penalty at ({k}, {history}) is {best}, not 0")
        for i in idx:
            if not self.catalogue[i].supported_on(self.tree, k, history, tol):
                raise PenaltyViolation(
                    f"measure {i} has finite penalty at ({k}, {history}) "
                    "but charges leaves outside the node")


@dataclass
class AmbiguitySet:
    """Per-node finite measure lists whose convex hulls form the uncertainty sets."""

    tree: object
    catalogue: list
    members: dict = field(default_factory=dict)   # (k, history) -> list of indices

    def indices(self, k, history):
        key = (k, tuple(history))
        if key not in self.members:
            raise PenaltyViolation(f"no uncertainty set at ({k}, {history})")
        idx = list(dict.fromkeys(self.members[key]))
        if not idx:
            raise PenaltyViolation(f"empty uncertainty set at ({k}, {history})")
        return idx

    def measures(self, k, history):
        return [self.catalogue[i] for i in self.indices(k, history)]

    def weight_matrix(self, k, history):
        """Stacked leaf weights of the node's members (cached)."""
        cache = getattr(self, "_stacked", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_stacked", cache)
        key = (k, tuple(history))
        if key not in cache:
            cache[key] = np.stack([self.catalogue[i].weights
                                   for i in self.indices(k, history)])
        return cache[key]

    def validate(self, k, history, tol=None):
        for P in self.measures(k, history):
            if not P.supported_on(self.tree, k, history, tol):
                raise PenaltyViolation(
                    f"member at ({k}, {history}) charges leaves outside the node")

    def as_penalty_table(self):
        """The {0, +inf} penalty table of the same uncertainty sets."""
        table = PenaltyTable(self.tree, self.catalogue)
        for (k, history), idx in self.members.items():
            for i in idx:
                table.set(k, history, i, 0.0)
        return table


def convex_expectation(table, k, history, phi):
    """Sup over the catalogue of linear expectation minus penalty.

    By linearity of both terms in the measure for fixed penalty values the
    sup over the catalogue equals the sup over its convex hull with the
    convexified penalty; ties go to the lowest catalogue index.
    """
    if not table.catalogue:
        raise PenaltyViolation("empty measure catalogue")
    table.tree.require_node(k, history)
    idx = table.finite_indices(k, history)
    if not idx:
        raise PenaltyViolation(f"all penalties infinite at ({k}, {history})")
    best = -math.inf
    for i in idx:
        val = expected_value(table.catalogue[i], phi) - table.penalty(k, history, i)
        if val > best:
            best = val
    return best


def sublinear_expectation(amb, k, history, phi):
    """Worst-case expectation over the node's uncertainty set."""
    amb.tree.require_node(k, history)
    W = amb.weight_matrix(k, history)
    if W.shape[1] != phi.values.size:
        raise ValueError("measure and functional live on different trees")
    return float(np.max(W @ phi.values))


def entropic_expectation(P, eps, phi):
    """eps * log E^P[exp(phi / eps)], evaluated in log-sum-exp form."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    mask = P.weights > 0
    return float(eps * logsumexp(
        phi.values[mask] / eps, b=P.weights[mask]))


def kl_divergence(P, Q):
    """Relative entropy KL(P || Q); +inf if P is not absolutely continuous."""
    p, q = P.weights, Q.weights
    if np.any((p > 0) & (q == 0)):
        return math.inf
    return float(rel_entr(p, q)[q > 0].sum())


def hull_membership(P, vertices, tol=None):
    """Whether ``P`` lies in the convex hull of ``vertices`` (linear feasibility)."""
    tol = DEFAULT_TOL.hull if tol is None else tol
    A = np.column_stack([V.weights for V in vertices])
    n = len(vertices)
    # minimize slack s with |A theta - p| <= s, theta in the simplex
    A_ub = np.block([
        [A, -np.ones((A.shape[0], 1))],
        [-A, -np.ones((A.shape[0], 1))],
    ])
    b_ub = np.concatenate([P.weights, -P.weights])
    A_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(0, None)], method="highs")
    if not res.success:
        return False
    return res.x[-1] <= tol


@dataclass
class DualPenaltyResult:
    value: float
    certified: bool   # True for closed forms, False for ascent lower bounds


def _subgradient_ascent(expectation, P, n_leaves, bound, iters=500):
    """Projected subgradient ascent on phi -> E^P[phi] - E(phi).

    The objective is concave in the leaf function; any iterate certifies a
    lower bound on the conjugate, which is what gets returned.
    """
    rng = np.random.default_rng(0)
    phi = np.zeros(n_leaves)
    best = -math.inf
    h = 1e-6
    for it in range(1, iters + 1):
        val = float(np.dot(P.weights, phi)) - expectation(Functional(phi))
        best = max(best, val)
        # forward-difference subgradient of the concave objective
        grad = np.empty(n_leaves)
        base = expectation(Functional(phi))
        for j in range(n_leaves):
            bumped = phi.copy()
            bumped[j] += h
            grad[j] = P.weights[j] - (expectation(Functional(bumped)) - base) / h
        phi = np.clip(phi + grad / it, -bound, bound)
    return max(best, 0.0)


def dual_penalty(expectation_spec, P, tol=None):
    """Convex conjugate of a constructed expectation at the measure ``P``.

    ``expectation_spec`` is one of:

    * ``("entropic", prior, eps)`` -- returns ``eps * KL(P || prior)``;
    * ``("sublinear", [vertices])`` -- returns 0 if ``P`` is in the convex
      hull of the vertices, ``+inf`` otherwise;
    * ``("generic", callable, n_leaves, bound)`` -- certified lower bound by
      subgradient ascent over leaf functions clipped at ``bound``.
    """
    kind = expectation_spec[0]
    if kind == "entropic":
        _, prior, eps = expectation_spec
        if eps <= 0:
            raise ValueError("eps must be positive")
        return DualPenaltyResult(eps * kl_divergence(P, prior), certified=True)
    if kind == "sublinear":
        _, vertices = expectation_spec
        inside = hull_membership(P, vertices, tol)
        return DualPenaltyResult(0.0 if inside else math.inf, certified=True)
    if kind == "generic":
        _, fn, n_leaves, bound = expectation_spec
        return DualPenaltyResult(
            _subgradient_ascent(fn, P, n_leaves, bound), certified=False)
    raise ValueError(f"unknown expectation spec {kind!r}")
