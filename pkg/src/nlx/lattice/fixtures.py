"""Constructions of measures and ambiguity sets used across tests and the CLI.

The rectangular (product-form) families built here are stable under
conditioning and pasting by construction: the uncertainty at a node is the
set of all assignments of one-step kernels to future decision nodes, which
is exactly the pasting closure of the per-step uncertainty.
"""

from itertools import product

import numpy as np

from .expectations import AmbiguitySet
from .measures import PathMeasure
from .tree import ScenarioTree


def _decision_nodes(tree, k, history):
    """Future decision nodes of ``(k, history)``: one per step to branch."""
    nodes = [(k, tuple(history))]
    frontier = [tuple(history)]
    for j in range(k + 1, tree.n_times - 1):
        frontier = [h + (s,) for h in frontier for s in tree.states
                    if tree.is_node(j, h + (s,))]
        nodes.extend((j, h) for h in frontier)
    if k >= tree.n_times - 1:
        return []
    return nodes


def product_measure(tree, k, history, kernel_choice):
    """Path measure following one one-step kernel per future decision node.

    ``kernel_choice`` maps ``(j, history)`` to a probability vector over
    ``tree.states`` for the transition from time index ``j`` to ``j + 1``.
    The result is supported on the subtree of ``(k, history)``.
    """
    start, stop = tree.leaf_block(k, history)
    w = np.zeros(tree.n_leaves)
    for idx, leaf in enumerate(tree.leaves()):
        if not (start <= idx < stop):
            continue
        p = 1.0
        for j in range(k, tree.n_times - 1):
            vec = kernel_choice[(j, leaf[: j + 1])]
            p *= vec[tree.states.index(leaf[j + 1])]
        w[idx] = p
    return PathMeasure(w)


def rectangular_ambiguity(tree, step_vertices):
    """Pasting- and conditioning-stable ambiguity set from per-step kernels.

    ``step_vertices`` maps ``(j, state)`` to a list of probability vectors:
    the vertices of the one-step uncertainty when standing in ``state`` at
    time index ``j``.  The set at a node enumerates every assignment of a
    vertex kernel to each future decision node.
    """
    catalogue = []
    seen = {}
    members = {}

    def intern(w):
        key = w.tobytes()
        if key not in seen:
            seen[key] = len(catalogue)
            catalogue.append(PathMeasure(w))
        return seen[key]

    amb = AmbiguitySet(tree, catalogue, members)
    leaves = tree.leaves()
    state_index = {s: i for i, s in enumerate(tree.states)}
    for k in range(tree.n_times):
        for history in tree.nodes_at(k):
            history = tuple(history)
            nodes = _decision_nodes(tree, k, history)
            start, stop = tree.leaf_block(k, history)
            if not nodes:
                idx = [intern(product_measure(tree, k, history, {}).weights)]
                members[(k, history)] = sorted(set(idx))
                continue
            option_lists = [step_vertices[(j, h[-1])] for j, h in nodes]
            # per-node, per-vertex factors over the subtree's leaves; a leaf
            # not passing through the node contributes an exact factor 1
            contrib = []
            for (j, h), opts in zip(nodes, option_lists):
                mat = np.ones((len(opts), stop - start))
                for li in range(start, stop):
                    leaf = leaves[li]
                    if leaf[: j + 1] == h:
                        si = state_index[leaf[j + 1]]
                        for o, vec in enumerate(opts):
                            mat[o, li - start] = vec[si]
                contrib.append(mat)
            choices = np.array(list(product(*[range(len(opts))
                                              for opts in option_lists])))
            block = np.ones((choices.shape[0], stop - start))
            for i, mat in enumerate(contrib):
                block *= mat[choices[:, i]]
            full = np.zeros((choices.shape[0], tree.n_leaves))
            full[:, start:stop] = block
            idx = [intern(w) for w in full]
            members[(k, history)] = sorted(set(idx))
    return amb


def iid_band_ambiguity(tree, p_lo=0.4, p_hi=0.6):
    """Two-state i.i.d. uncertainty with per-step up-probability in a band."""
    if tree.n_states != 2:
        raise ValueError("band construction needs a two-state tree")
    verts = [np.array([1 - p_lo, p_lo]), np.array([1 - p_hi, p_hi])]
    step_vertices = {(j, s): verts
                     for j in range(tree.n_times - 1) for s in tree.states}
    return rectangular_ambiguity(tree, step_vertices)


def random_stable_ambiguity(tree, rng, n_vertices=2):
    """Random rectangular family: stable by construction."""
    step_vertices = {}
    for j in range(tree.n_times - 1):
        for s in tree.states:
            vecs = rng.dirichlet(np.ones(tree.n_states), size=n_vertices)
            step_vertices[(j, s)] = [v for v in vecs]
    return rectangular_ambiguity(tree, step_vertices)


def non_stable_fixture():
    """Two-step binary tree whose root set omits its own pasting closure.

    The root carries only the two i.i.d. product measures with up
    probability 0.4 or 0.6; the interior nodes carry both one-step kernels.
    Node-dependent kernel choices then paste to measures outside the root
    hull, so the worst-case family fails the tower property.
    """
    tree = ScenarioTree(times=(0, 1, 2), states=(0, 1), root_history=(0,))
    stable = iid_band_ambiguity(tree)
    amb = AmbiguitySet(tree, list(stable.catalogue), dict(stable.members))
    root = (0, (0,))
    iid_idx = []
    for p in (0.4, 0.6):
        target = np.array([(1 - p) ** 2, (1 - p) * p, p * (1 - p), p * p])
        for i in amb.members[root]:
            if np.allclose(amb.catalogue[i].weights, target, atol=1e-12):
                iid_idx.append(i)
                break
    amb.members[root] = iid_idx
    return tree, amb


def two_step_binary_tree():
    return ScenarioTree(times=(0, 1, 2), states=(0, 1), root_history=(0,))


def random_tree(rng, max_steps=3):
    """Small random tree: 2 or 3 free steps over 2 or 3 states."""
    n_states = int(rng.integers(2, 4))
    n_free = int(rng.integers(2, max_steps + 1))
    states = tuple(range(n_states))
    root = (int(rng.integers(0, n_states)),)
    times = tuple(range(n_free + 1))
    return ScenarioTree(times=times, states=states, root_history=root)


def random_measure(tree, rng, k=0, history=None):
    """Random measure supported on a node's subtree (default: the root)."""
    history = tree.nodes_at(k)[0] if history is None else history
    start, stop = tree.leaf_block(k, history)
    w = np.zeros(tree.n_leaves)
    w[start:stop] = rng.dirichlet(np.ones(stop - start))
    return PathMeasure(w)
