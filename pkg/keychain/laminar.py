"""Laminar families, the forests they induce, and the (k-disjoint) antichain set function oracles."""
import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, NamedTuple, Tuple

import numpy as np

from .exceptions import LaminarityError, ValidationError

logger = logging.getLogger(__name__)


class LaminarFamily:
    """Type sets T_i, one per element, any two of which are disjoint or nested.

    Validation also records the containment structure: elements are visited by
    decreasing set size (ties by element id), and the parent of an element is
    the smallest earlier set containing it. Identical sets therefore end up as
    a chain ordered by element id.
    """

    def __init__(self, type_sets):
        self.type_sets = tuple(frozenset(t) for t in type_sets)
        self.parents = self._containment_parents()

    def __len__(self):
        return len(self.type_sets)

    def _containment_parents(self):
        order = sorted(range(len(self.type_sets)), key=lambda i: (-len(self.type_sets[i]), i))
        owner = {}
        parents = [None] * len(self.type_sets)
        for i in order:
            members = self.type_sets[i]
            owners = {owner.get(e) for e in members}
            if len(owners) > 1:
                other = next(j for j in owners if j is not None and not members <= self.type_sets[j])
                raise LaminarityError('type sets of elements {} and {} overlap without nesting'.format(
                    min(i, other), max(i, other)), pair=(min(i, other), max(i, other)))
            if owners:
                parents[i] = owners.pop()
            for e in members:
                owner[e] = i
        return tuple(parents)


class LaminarForest:
    """Forest over a subset of elements: the parent of a node is its nearest ancestor inside the subset."""

    def __init__(self, family: LaminarFamily, subset, weights):
        self.family = family
        self.nodes = tuple(sorted(set(int(i) for i in subset)))
        members = set(self.nodes)
        self.weights = {i: weights[i] for i in self.nodes}
        self.parent = {}
        for i in self.nodes:
            parent = family.parents[i]
            while parent is not None and parent not in members:
                parent = family.parents[parent]
            self.parent[i] = parent
        children = {i: [] for i in self.nodes}
        for i in self.nodes:
            if self.parent[i] is not None:
                children[self.parent[i]].append(i)
        self.children = {i: tuple(c) for i, c in children.items()}
        self.roots = tuple(i for i in self.nodes if self.parent[i] is None)

    def post_order(self):
        order = []
        stack = [(r, False) for r in reversed(self.roots)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(self.children[node]))
        return order

    def height(self):
        depth = {}
        for node in reversed(self.post_order()):
            parent = self.parent[node]
            depth[node] = 1 if parent is None else depth[parent] + 1
        return max(depth.values(), default=0)

    def is_ancestor(self, i, j):
        parent = self.parent[j]
        while parent is not None:
            if parent == i:
                return True
            parent = self.parent[parent]
        return False


def build_forest(family: LaminarFamily, subset, weights) -> LaminarForest:
    return LaminarForest(family, subset, weights)


class AntichainResult(NamedTuple):
    value: float
    antichains: Tuple[FrozenSet[int], ...]

    def union(self):
        return frozenset().union(*self.antichains)


def disjoint_antichains(forest: LaminarForest, k: int) -> AntichainResult:
    """Up to k pairwise-disjoint antichains of maximum total weight.

    best[i][u] is the best weight of u disjoint antichains inside the subtree
    of i: either i is unused, or i forms one antichain on its own within the
    subtree and the children supply the other u - 1.
    """
    if k < 1:
        raise ValidationError('k must be at least 1, got {}'.format(k))
    best = {}
    include = {}
    for node in forest.post_order():
        below = np.zeros(k + 1)
        for child in forest.children[node]:
            below += best[child]
        with_node = np.concatenate(([-np.inf], forest.weights[node] + below[:-1]))
        include[node] = with_node >= below
        include[node][0] = False
        best[node] = np.where(include[node], with_node, below)

    antichains = [set() for _ in range(k)]
    stack = [(r, tuple(range(k))) for r in forest.roots]
    while stack:
        node, labels = stack.pop()
        if not labels:
            continue
        if include[node][len(labels)]:
            antichains[labels[0]].add(node)
            labels = labels[1:]
        stack.extend((child, labels) for child in forest.children[node])

    value = math.fsum(best[r][k] for r in forest.roots)
    return AntichainResult(value, tuple(frozenset(a) for a in antichains))


@dataclass(frozen=True)
class AntichainValuation:
    """k-disjoint antichain set function: v(S) is the heaviest union of k disjoint antichains inside S."""
    weights: Tuple[float, ...]
    family: LaminarFamily
    k: int = 1

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 1 or len(weights) != len(self.family):
            raise ValidationError('weights: expected one weight per element of the family')
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValidationError('weights: entries must be finite and nonnegative')
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValidationError('k must be an integer >= 1, got {!r}'.format(self.k))
        object.__setattr__(self, 'weights', tuple(float(w) for w in weights))
        object.__setattr__(self, 'k', int(self.k))

    @property
    def ground_set(self):
        return frozenset(range(len(self.family)))

    def solve(self, subset, weights=None) -> AntichainResult:
        forest = build_forest(self.family, subset, self.weights if weights is None else weights)
        return disjoint_antichains(forest, self.k)


def value_query(valuation: AntichainValuation, subset) -> float:
    return valuation.solve(subset).value


class DemandResult(NamedTuple):
    bundle: FrozenSet[int]
    utility: float


def demand_query(valuation: AntichainValuation, prices) -> DemandResult:
    prices = np.array(prices, dtype=float)
    if prices.shape != (len(valuation.family),):
        raise ValidationError('prices: expected one price per element')
    if not np.all(np.isfinite(prices)) or np.any(prices < 0):
        raise ValidationError('prices: must be finite and nonnegative')
    adjusted = np.array(valuation.weights) - prices
    result = valuation.solve(valuation.ground_set, adjusted)
    bundle = frozenset(i for i in result.union() if adjusted[i] > 0)
    return DemandResult(bundle, math.fsum(adjusted[i] for i in bundle))


def supporting_prices(valuation: AntichainValuation, subset) -> np.ndarray:
    """w_i on the maximizing antichains inside ``subset``, zero elsewhere."""
    prices = np.zeros(len(valuation.family))
    for i in valuation.solve(subset).union():
        prices[i] = valuation.weights[i]
    return prices

