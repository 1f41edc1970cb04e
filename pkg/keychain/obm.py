"""Weighted online bipartite one-sided b-matching against the Bayes-optimal online benchmark.

Arrivals reveal one weight column at a time; the prefixes of revealed columns
play the part of information sets, so the keychain machinery carries over
with per-node capacities.
"""
import logging
import math
from dataclasses import dataclass
from numbers import Real
from typing import NamedTuple, Tuple

import numpy as np

from .assignment import max_weight_assignment
from .exceptions import SizeGuardError, ValidationError
from .model import NULL, PrefixForest, as_probability, check_sums_to_one
from .scenarios import (LaminarMatchingInstance, PreallocationRounding, RoundingEstimate, solve_lp_relaxation)

logger = logging.getLogger(__name__)

MAX_PHILOSOPHER_CELLS = 12
DEFAULT_TRIALS = 100_000


class WeightProfile(NamedTuple):
    weights: Tuple[Tuple[float, ...], ...]
    prob: Real


@dataclass(frozen=True)
class WobmInstance:
    """``support`` lists weight matrices (offline nodes by arrivals) with their probabilities."""
    capacities: Tuple[int, ...]
    support: Tuple[WeightProfile, ...]

    def __post_init__(self):
        capacities = tuple(self.capacities)
        if not capacities or any(isinstance(b, bool) or int(b) != b or b < 1 for b in capacities):
            raise ValidationError('capacities: expected a positive integer per offline node')
        capacities = tuple(int(b) for b in capacities)
        profiles = []
        shape = None
        for s, raw in enumerate(self.support):
            weights, prob = raw
            field = 'support[{}]'.format(s)
            w = np.array(weights, dtype=float)
            if w.ndim != 2 or w.shape[0] != len(capacities) or w.shape[1] == 0:
                raise ValidationError('{}.weights: expected {} rows and at least one arrival'.format(
                    field, len(capacities)))
            if shape is not None and w.shape != shape:
                raise ValidationError('{}.weights: shape {} differs from {}'.format(field, w.shape, shape))
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValidationError('{}.weights: entries must be finite and nonnegative'.format(field))
            shape = w.shape
            profiles.append(WeightProfile(tuple(tuple(float(v) for v in row) for row in w),
                                          as_probability(prob, field + '.prob')))
        if not profiles:
            raise ValidationError('support: at least one weight profile is required')
        check_sums_to_one([p.prob for p in profiles], 'support')
        object.__setattr__(self, 'capacities', capacities)
        object.__setattr__(self, 'support', tuple(profiles))

    @property
    def num_offline(self):
        return len(self.capacities)

    @property
    def num_arrivals(self):
        return len(self.support[0].weights[0])

    def columns(self, s):
        return tuple(zip(*self.support[s].weights))


class ArrivalForest(PrefixForest):
    """Prefixes of revealed weight columns; ``weights[i, o]`` is p_o times the weight of node i at o."""

    def __init__(self, instance: WobmInstance):
        super().__init__([instance.columns(s) for s in range(len(instance.support))],
                         [p.prob for p in instance.support])
        self.instance = instance
        self.columns = np.array([prefix[-1] for prefix in self.prefixes], dtype=float).T
        self.weights = self.columns * np.array([float(p) for p in self.probs])[None, :]

    def weight_matrix(self):
        return self.weights


def reduce_wobm_to_mwlbm(instance: WobmInstance) -> LaminarMatchingInstance:
    forest = ArrivalForest(instance)
    return LaminarMatchingInstance(forest.weights, [frozenset(c) for c in forest.consistent], instance.capacities)


class WobmResult(NamedTuple):
    forest: ArrivalForest
    lp_value: float
    expected_value: float
    estimate: RoundingEstimate
    rounding: PreallocationRounding
    marginal_deviation: float


def split_capacities(forest: PrefixForest, x, capacities):
    """Unit copies of every offline node, with the fractional load wrapped across them.

    Along any path node i fills the interval [0, b_i) in order; copy c takes
    the part of each info set that falls in [c, c + 1). Every copy then carries
    at most one unit per path, and the copies of a node add up to its load at
    each info set. Returns (owner of each copy, x over copies).
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    owner = [i for i, b in enumerate(capacities) for _ in range(b)]
    first = np.cumsum([0] + list(capacities))
    split = np.zeros((len(owner), forest.num_info_sets))
    end = np.zeros(x.shape)
    for o in range(forest.num_info_sets):
        parent = forest.parents[o]
        start = end[:, parent] if parent >= 0 else np.zeros(x.shape[0])
        end[:, o] = np.minimum(start + x[:, o], capacities)
        for i, b in enumerate(capacities):
            for c in range(b):
                split[first[i] + c, o] = max(0.0, min(end[i, o], c + 1) - max(start[i], c))
    return np.array(owner), split


def solve_wobm(instance: WobmInstance, seed, trials=DEFAULT_TRIALS, backend='simplex') -> WobmResult:
    """Capacitated LP plus preallocation rounding over unit copies, valued exactly and by Monte Carlo."""
    forest = ArrivalForest(instance)
    fractional = solve_lp_relaxation(forest, forest.weights, instance.capacities, backend)
    owner, split = split_capacities(forest, fractional.x, instance.capacities)
    rounding = PreallocationRounding(forest, forest.weights[owner], split)
    columns = forest.columns[owner]

    def reward(o, played, sids):
        return np.where(played != NULL, columns[np.maximum(played, 0), o], 0.0)

    estimate = rounding.monte_carlo(trials, seed, reward)
    expected = rounding.expected_value()
    logger.info('wobm: LP %.9g, rounding expectation %.9g, simulated %.9g +/- %.3g',
                fractional.value, expected, estimate.mean, estimate.stderr)
    return WobmResult(forest, fractional.value, expected, estimate, rounding, rounding.marginal_deviation)


def philosopher_oracle(instance: WobmInstance) -> float:
    """Bayes-optimal online value by backward induction over (arrival prefix, residual capacities)."""
    cells = instance.num_offline * instance.num_arrivals
    if cells > MAX_PHILOSOPHER_CELLS:
        raise SizeGuardError('philosopher oracle refuses {} offline nodes times {} arrivals (bound {})'.format(
            instance.num_offline, instance.num_arrivals, MAX_PHILOSOPHER_CELLS),
            bounds={'cells': MAX_PHILOSOPHER_CELLS})
    forest = ArrivalForest(instance)
    memo = {}

    def value(o, residual):
        state = (o, residual)
        if state not in memo:
            below = forest.children[o]
            best = math.fsum(value(c, residual) for c in below)
            for i in range(instance.num_offline):
                if residual[i] and forest.weights[i, o] > 0:
                    after = residual[:i] + (residual[i] - 1,) + residual[i + 1:]
                    best = max(best, forest.weights[i, o] + math.fsum(value(c, after) for c in below))
            memo[state] = best
        return memo[state]

    total = math.fsum(value(r, instance.capacities) for r in forest.roots)
    logger.debug('philosopher oracle: %d states, value %.12g', len(memo), total)
    return total


def offline_b_matching(weights, capacities) -> float:
    """Offline optimum of a single weight matrix: node i copied b_i times, then an assignment."""
    w = np.asarray(weights, dtype=float)
    copies = np.repeat(w, capacities, axis=0)
    return max_weight_assignment(copies).value
