"""Finite scenario trees over a two-sided integer time window.

A tree is a product path space: the first ``len(root_history)`` coordinates
are frozen (the fixed past of the conditioning point), the remaining
coordinates range freely over the finite state set.  Leaves are full paths
in lexicographic order of their free coordinates, so the set of leaves
passing through any node is a contiguous index block.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

History = tuple


@dataclass(frozen=True)
class ScenarioTree:
    times: tuple          # strictly increasing integer time labels
    states: tuple         # finite state alphabet
    root_history: tuple   # fixed states occupying the first len(root_history) times

    def __post_init__(self):
        if len(self.times) < 2:
            raise ValueError("need at least two times")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if not self.states:
            raise ValueError("empty state set")
        if not 1 <= len(self.root_history) <= len(self.times):
            raise ValueError("root history must cover between 1 and all times")
        if any(s not in self.states for s in self.root_history):
            raise ValueError("root history uses unknown states")

    # -- basic sizes ---------------------------------------------------

    @property
    def n_times(self):
        return len(self.times)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_free(self):
        return self.n_times - len(self.root_history)

    @property
    def n_leaves(self):
        return self.n_states ** self.n_free

    def leaves(self):
        """All full paths, lexicographic in the free coordinates."""
        root = self.root_history
        return [root + tail for tail in product(self.states, repeat=self.n_free)]

    # -- nodes ---------------------------------------------------------

    def is_node(self, k, history):
        """Whether ``history`` is a valid node at time index ``k``."""
        if not 0 <= k < self.n_times or len(history) != k + 1:
            return False
        fixed = min(k + 1, len(self.root_history))
        if tuple(history[:fixed]) != self.root_history[:fixed]:
            return False
        return all(s in self.states for s in history)

    def require_node(self, k, history):
        if not self.is_node(k, history):
            raise ValueError(f"({k}, {history}) is not a node of this tree")

    def nodes_at(self, k):
        """All histories at time index ``k``."""
        if not 0 <= k < self.n_times:
            raise ValueError(f"time index {k} outside window")
        root = self.root_history
        n_free = max(0, k + 1 - len(root))
        prefix = root[: k + 1]
        return [prefix + tail for tail in product(self.states, repeat=n_free)]

    def leaf_block(self, k, history):
        """Contiguous [start, stop) of leaf indices extending the node."""
        self.require_node(k, history)
        m = self.n_states
        free = history[len(self.root_history):]
        start = 0
        for s in free:
            start = start * m + self.states.index(s)
        tail = self.n_free - len(free)
        start *= m ** tail
        return start, start + m ** tail

    def node_of_leaf(self, leaf_index, k):
        """History at time index ``k`` of the leaf with the given index."""
        m = self.n_states
        digits = []
        rem = leaf_index
        for _ in range(self.n_free):
            digits.append(rem % m)
            rem //= m
        path = self.root_history + tuple(self.states[d] for d in reversed(digits))
        return path[: k + 1]

    def node_indicator(self, k, history):
        """0/1 leaf array of the cylinder set through the node."""
        start, stop = self.leaf_block(k, history)
        out = np.zeros(self.n_leaves)
        out[start:stop] = 1.0
        return out

    def children(self, k, history):
        """Child nodes of ``(k, history)`` at time index ``k + 1``."""
        self.require_node(k, history)
        if k + 1 >= self.n_times:
            return []
        if k + 1 < len(self.root_history):
            return [history + (self.root_history[k + 1],)]
        return [history + (s,) for s in self.states]


@dataclass(frozen=True)
class Functional:
    """Bounded payoff: one real value per leaf, in leaf order."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("functional values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def bound(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __add__(self, other):
        if isinstance(other, Functional):
            return Functional(self.values + other.values)
        return Functional(self.values + float(other))

    def __rmul__(self, c):
        return Functional(float(c) * self.values)


def constant_functional(tree, c):
    return Functional(np.full(tree.n_leaves, float(c)))


@dataclass(frozen=True)
class CylinderFunctional:
    """Payoff reading finitely many path coordinates.

    ``coords`` are positions into ``tree.times``; ``fn`` maps the tuple of
    states at those positions to a real number.
    """

    coords: tuple
    fn: object

    def materialize(self, tree):
        vals = np.empty(tree.n_leaves)
        for j, leaf in enumerate(tree.leaves()):
            vals[j] = self.fn(*(leaf[c] for c in self.coords))
        return Functional(vals)

    def shifted(self, delta):
        """Composition with the path shift by ``delta`` index positions.

        Reading coordinate ``c`` of the shifted path equals reading
        ``c - delta`` of the original, so the composed payoff reads the
        translated coordinates with the same state function.
        """
        coords = tuple(c - delta for c in self.coords)
        if any(c < 0 for c in coords):
            raise ValueError("shift leaves the time window")
        return CylinderFunctional(coords, self.fn)
