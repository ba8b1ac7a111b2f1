"""Path measures on scenario trees: expectations, conditioning, pasting."""

from dataclasses import dataclass

import numpy as np

from ..config import DEFAULT_TOL
from .tree import Functional, ScenarioTree


@dataclass(frozen=True)
class PathMeasure:
    """Probability weights on the leaves of a scenario tree."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -DEFAULT_TOL.weights):
            raise ValueError("negative leaf weight")
        w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > DEFAULT_TOL.weights:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", w)

    def node_mass(self, tree, k, history):
        start, stop = tree.leaf_block(k, history)
        return float(self.weights[start:stop].sum())

    def supported_on(self, tree, k, history, tol=None):
        """Whether the measure charges only leaves through the node."""
        tol = DEFAULT_TOL.weights if tol is None else tol
        return self.node_mass(tree, k, history) >= 1.0 - tol


def dirac(tree, leaf_index):
    w = np.zeros(tree.n_leaves)
    w[leaf_index] = 1.0
    return PathMeasure(w)


def uniform(tree, k=None, history=None):
    """Uniform measure, optionally restricted to a node's subtree."""
    w = np.zeros(tree.n_leaves)
    if history is None:
        w[:] = 1.0
    else:
        start, stop = tree.leaf_block(k, history)
        w[start:stop] = 1.0
    return PathMeasure(w / w.sum())


def expected_value(P, phi):
    """Linear expectation of a functional under a path measure."""
    if P.weights.shape != phi.values.shape:
        raise ValueError("measure and functional live on different trees")
    return float(np.dot(P.weights, phi.values))


def regular_conditional(tree, P, k):
    """Conditional kernel of ``P`` at time index ``k``.

    Returns a dict node-history -> PathMeasure supported on that node's
    subtree.  Nodes with zero mass receive the uniform measure on their
    subtree (fixed deterministic tie-break).
    """
    kernel = {}
    for history in tree.nodes_at(k):
        start, stop = tree.leaf_block(k, history)
        mass = P.weights[start:stop].sum()
        w = np.zeros(tree.n_leaves)
        if mass > 0.0:
            w[start:stop] = P.weights[start:stop] / mass
        else:
            w[start:stop] = 1.0 / (stop - start)
        kernel[history] = PathMeasure(w)
    return kernel


def paste_measures(tree, P, k, kernel):
    """Pasting of ``P`` with a node-indexed kernel at time index ``k``.

    The pasted measure follows ``P`` up to ``k`` and the kernel afterwards:
    each leaf weight is the ``P``-mass of its time-``k`` node times the
    kernel weight of the leaf.  Every kernel entry must be supported on its
    own node's subtree.
    """
    w = np.zeros(tree.n_leaves)
    for history in tree.nodes_at(k):
        start, stop = tree.leaf_block(k, history)
        mass = P.weights[start:stop].sum()
        if mass == 0.0:
            continue
        Q = kernel[history]
        if not Q.supported_on(tree, k, history):
            raise ValueError(f"kernel at node {history} charges leaves outside it")
        w[start:stop] = mass * Q.weights[start:stop]
    return PathMeasure(w)


def conditional_expectation(tree, P, k, phi):
    """Nodewise linear conditional expectation, returned as a Functional.

    The result is constant on each time-``k`` subtree, hence measurable at
    ``k``.  Zero-mass nodes use the uniform tie-break of the conditional
    kernel.
    """
    out = np.empty(tree.n_leaves)
    for history in tree.nodes_at(k):
        start, stop = tree.leaf_block(k, history)
        mass = P.weights[start:stop].sum()
        if mass > 0.0:
            val = float(np.dot(P.weights[start:stop], phi.values[start:stop])) / mass
        else:
            val = float(phi.values[start:stop].mean())
        out[start:stop] = val
    return Functional(out)
