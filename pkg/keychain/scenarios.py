"""Probabilistic Scenarios: laminar-matching and auction reductions, the assignment LP with
preallocation rounding, the sample-based weight estimator and the greedy baseline.
"""
import logging
import math
from collections import Counter
from typing import FrozenSet, NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import AdmissibilityError, SamplerError, ValidationError
from .laminar import AntichainValuation, LaminarFamily, supporting_prices, value_query
from .lp import FEASIBILITY_TOLERANCE, LinearProgram, solve_lp
from .model import (NULL, InformationForest, Policy, PrefixForest, ScenarioInstance, build_information_forest,
                    eval_scenario_policy, sampling_probabilities, trial_blocks)

logger = logging.getLogger(__name__)

ROUNDING_REPETITIONS = 64
EXHAUSTED_TOLERANCE = 1e-12


class LaminarMatchingInstance:
    """Left nodes with capacities, right nodes with laminar type sets, nonnegative edge weights."""

    def __init__(self, weights, type_sets, capacities=None):
        self.weights = np.array(weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValidationError('weights: expected a left-by-right matrix')
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValidationError('weights: entries must be finite and nonnegative')
        self.num_left, self.num_right = self.weights.shape
        if len(type_sets) != self.num_right:
            raise ValidationError('type_sets: expected one type set per right node')
        self.family = LaminarFamily(type_sets)
        capacities = [1] * self.num_left if capacities is None else [int(b) for b in capacities]
        if len(capacities) != self.num_left or min(capacities, default=1) < 1:
            raise ValidationError('capacities: expected a positive integer per left node')
        self.capacities = tuple(capacities)

    @property
    def type_sets(self):
        return self.family.type_sets


class LaminarMatching(NamedTuple):
    edges: FrozenSet[Tuple[int, int]]

    @classmethod
    def of(cls, edges):
        return cls(frozenset((int(i), int(j)) for i, j in edges))


def matching_violation(instance: LaminarMatchingInstance, matching: LaminarMatching) -> Optional[str]:
    matched_right = {}
    per_type = Counter()
    for i, j in sorted(matching.edges):
        if not (0 <= i < instance.num_left and 0 <= j < instance.num_right):
            return 'edge ({}, {}) is out of range'.format(i, j)
        if j in matched_right:
            return 'right node {} is matched to both {} and {}'.format(j, matched_right[j], i)
        matched_right[j] = i
        for t in instance.type_sets[j]:
            per_type[i, t] += 1
            if per_type[i, t] > instance.capacities[i]:
                return 'left node {} has more than {} neighbors of type {}'.format(i, instance.capacities[i], t)
    return None


def matching_weight(instance: LaminarMatchingInstance, matching: LaminarMatching):
    return math.fsum(instance.weights[i, j] for i, j in matching.edges)


def reduce_to_mwlm(forest: InformationForest) -> LaminarMatchingInstance:
    """Keys on the left, info sets on the right with type set C(o) and edge weight p_o * r_{k,o}."""
    return LaminarMatchingInstance(forest.weight_matrix(), [frozenset(c) for c in forest.consistent])


def matching_to_policy(instance: LaminarMatchingInstance, matching: LaminarMatching) -> Policy:
    problem = matching_violation(instance, matching)
    if problem is not None:
        raise AdmissibilityError('invalid laminar matching: ' + problem)
    actions = [NULL] * instance.num_right
    for i, j in matching.edges:
        actions[j] = i
    return Policy.scenario(actions)


def policy_to_matching(policy: Policy) -> LaminarMatching:
    return LaminarMatching.of((k, o) for o, k in enumerate(policy.actions) if k != NULL)


class AuctionReduction(NamedTuple):
    instance: LaminarMatchingInstance
    bidders: Tuple[AntichainValuation, ...]


def reduce_mwlm_to_auction(instance: LaminarMatchingInstance) -> AuctionReduction:
    bidders = tuple(AntichainValuation(tuple(instance.weights[i]), instance.family, instance.capacities[i])
                    for i in range(instance.num_left))
    return AuctionReduction(instance, bidders)


def _check_allocation(reduction, allocation):
    if len(allocation) != len(reduction.bidders):
        raise ValidationError('allocation: expected one bundle per bidder')
    owner = {}
    for i, bundle in enumerate(allocation):
        for j in bundle:
            if not 0 <= j < reduction.instance.num_right:
                raise ValidationError('allocation[{}]: item {} out of range'.format(i, j))
            if j in owner:
                raise ValidationError('item {} is allocated to bidders {} and {}'.format(j, owner[j], i))
            owner[j] = i


def allocation_welfare(reduction: AuctionReduction, allocation):
    _check_allocation(reduction, allocation)
    return math.fsum(value_query(v, bundle) for v, bundle in zip(reduction.bidders, allocation))


def allocation_to_matching(reduction: AuctionReduction, allocation) -> LaminarMatching:
    """Keeps, for every bidder, the items carrying a non-zero supporting price."""
    _check_allocation(reduction, allocation)
    edges = []
    for i, (valuation, bundle) in enumerate(zip(reduction.bidders, allocation)):
        prices = supporting_prices(valuation, bundle)
        edges.extend((i, j) for j in bundle if prices[j] > 0)
    return LaminarMatching.of(edges)


class FractionalPolicy(NamedTuple):
    x: np.ndarray
    value: float


def _capacities(num_keys, capacities):
    caps = np.ones(num_keys, dtype=np.int64) if capacities is None else np.array(capacities, dtype=np.int64)
    if caps.shape != (num_keys,) or np.any(caps < 1):
        raise ValidationError('capacities: expected a positive integer per key')
    return caps


def assignment_lp(structure: PrefixForest, weights, capacities=None):
    """max sum w x  s.t.  sum_k x[k,o] <= 1 per info set,  sum_{o on P(s)} x[k,o] <= b_k per key and path.

    Only positive-weight pairs become variables; rows that cannot bind are left out.
    """
    weights = np.asarray(weights, dtype=float)
    caps = _capacities(weights.shape[0], capacities)
    variables = [(k, o) for o in range(weights.shape[1]) for k in range(weights.shape[0]) if weights[k, o] > 0]
    column = {v: j for j, v in enumerate(variables)}
    rows = []
    for o in range(weights.shape[1]):
        members = [column[k, o] for k in range(weights.shape[0]) if (k, o) in column]
        if members:
            rows.append((frozenset(members), 1))
    seen = set()
    for path in sorted(set(structure.paths)):
        for k in range(weights.shape[0]):
            members = frozenset(column[k, o] for o in path if (k, o) in column)
            if len(members) > caps[k] and members not in seen:
                seen.add(members)
                rows.append((members, caps[k]))
    a_ub = np.zeros((len(rows), len(variables)))
    for r, (members, _) in enumerate(rows):
        a_ub[r, sorted(members)] = 1.0
    b_ub = [bound for _, bound in rows]
    objective = [weights[k, o] for k, o in variables]
    names = ['x_{}_{}'.format(k, o) for k, o in variables]
    return LinearProgram(objective, a_ub, b_ub, variable_names=names), variables


def solve_lp_relaxation(forest: PrefixForest, weights=None, capacities=None, backend='simplex') -> FractionalPolicy:
    weights = forest.weight_matrix() if weights is None else np.asarray(weights, dtype=float)
    lp, variables = assignment_lp(forest, weights, capacities)
    x = np.zeros(weights.shape)
    if not variables:
        return FractionalPolicy(x, 0.0)
    result = solve_lp(lp, backend)
    for (k, o), value in zip(variables, result.x):
        x[k, o] = min(value, 1.0)
    logger.info('LP relaxation over %d variables and %d rows: value %.9g', lp.num_variables, lp.num_rows, result.value)
    return FractionalPolicy(x, result.value)


def check_fractional(structure: PrefixForest, x, capacities=None):
    x = np.asarray(x, dtype=float)
    caps = _capacities(x.shape[0], capacities)
    if x.shape[1] != structure.num_info_sets:
        raise ValidationError('x: expected one column per info set')
    if np.any(x < -FEASIBILITY_TOLERANCE) or np.any(x > 1 + FEASIBILITY_TOLERANCE):
        raise ValidationError('x: entries must lie in [0, 1]')
    over = np.nonzero(x.sum(axis=0) > 1 + FEASIBILITY_TOLERANCE)[0]
    if over.size:
        raise ValidationError('x: info set {} is offered more than one unit'.format(over[0]))
    for s, path in enumerate(structure.paths):
        load = x[:, list(path)].sum(axis=1)
        over = np.nonzero(load > caps + FEASIBILITY_TOLERANCE)[0]
        if over.size:
            raise ValidationError('x: key {} exceeds its capacity along the path of scenario {}'.format(over[0], s))
    return np.clip(x, 0.0, 1.0), caps


class RoundingEstimate(NamedTuple):
    mean: float
    stderr: float
    marginals: np.ndarray
    visits: np.ndarray


class PreallocationRounding:
    """Online rounding of a fractional solution along the realized path of info sets.

    At info set o every key with spare capacity joins A_o independently with
    probability x[k,o] / Pr[key has spare capacity at o]; that probability is
    tracked exactly by a small dynamic program over allocation counts, so for
    capacity one it is x[k,o] / (1 - x allocated earlier on the path). The key
    of A_o with the largest weight (smallest id on ties) is played.
    """

    def __init__(self, structure: PrefixForest, weights, x, capacities=None):
        self.structure = structure
        self.weights = np.asarray(weights, dtype=float)
        self.x, self.capacities = check_fractional(structure, x, capacities)
        self.num_keys = self.weights.shape[0]
        self.preference = [np.array(sorted(range(self.num_keys), key=lambda k: (-self.weights[k, o], k)))
                           for o in range(structure.num_info_sets)]
        self.inclusion, self.marginals = self._inclusion_probabilities()
        self.marginal_deviation = float(np.max(self.x - self.marginals, initial=0.0))
        if self.marginal_deviation > FEASIBILITY_TOLERANCE:
            logger.info('capacity stopping shifts preallocation marginals by up to %.3g', self.marginal_deviation)

    def _inclusion_probabilities(self):
        n, width = self.num_keys, int(self.capacities.max()) + 1
        below_cap = np.arange(width)[None, :] < self.capacities[:, None]
        start = np.zeros((n, width))
        start[:, 0] = 1.0
        after = {}
        inclusion = np.zeros_like(self.x)
        marginals = np.zeros_like(self.x)
        for o in range(self.structure.num_info_sets):
            parent = self.structure.parents[o]
            before = start if parent < 0 else after[parent]
            room = np.where(below_cap, before, 0.0).sum(axis=1)
            with np.errstate(divide='ignore', invalid='ignore'):
                q = np.where(room > EXHAUSTED_TOLERANCE, np.minimum(1.0, self.x[:, o] / room), 0.0)
            inclusion[:, o] = q
            marginals[:, o] = q * room
            moved = before * q[:, None] * below_cap
            nxt = before - moved
            nxt[:, 1:] += moved[:, :-1]
            after[o] = nxt
        return inclusion, marginals

    def pick(self, o, allocated):
        for k in self.preference[o]:
            if allocated[k]:
                return int(k)
        return NULL

    def allocate(self, o, counts, rng):
        return (counts < self.capacities) & (rng.random(self.num_keys) < self.inclusion[:, o])

    def expected_value(self):
        """Exact expected reward: inclusions at one info set are independent with the tracked marginals."""
        terms = []
        for o in range(self.structure.num_info_sets):
            survive = 1.0
            for k in self.preference[o]:
                m = self.marginals[k, o]
                terms.append(self.weights[k, o] * m * survive)
                survive *= 1.0 - m
        return math.fsum(terms)

    def realize(self, rng) -> Policy:
        """Draws the coins of every info set at once, giving one deterministic policy."""
        counts = {}
        actions = []
        for o in range(self.structure.num_info_sets):
            parent = self.structure.parents[o]
            before = np.zeros(self.num_keys, dtype=np.int64) if parent < 0 else counts[parent]
            allocated = self.allocate(o, before, rng)
            counts[o] = before + allocated
            actions.append(self.pick(o, allocated))
        return Policy.scenario(actions)

    def session(self, rng, chain_of=None):
        return OnlineSession(self, rng, chain_of)

    def monte_carlo(self, trials, seed, reward) -> RoundingEstimate:
        """Vectorized runs; ``reward(o, played, scenario_ids)`` scores the keys played at o."""
        structure = self.structure
        paths = structure.path_matrix()
        probs = sampling_probabilities(structure.scenario_probs)
        inclusions = np.zeros_like(self.x)
        visits = np.zeros(structure.num_info_sets, dtype=np.int64)
        totals = []
        for rng, size in trial_blocks(trials, seed):
            sids = rng.choice(structure.num_scenarios, size=size, p=probs)
            counts = np.zeros((size, self.num_keys), dtype=np.int64)
            rewards = np.zeros(size)
            for depth in range(paths.shape[1]):
                at = paths[sids, depth]
                for o in np.unique(at[at >= 0]):
                    idx = np.nonzero(at == o)[0]
                    allocated = (counts[idx] < self.capacities) & \
                        (rng.random((idx.size, self.num_keys)) < self.inclusion[:, o])
                    counts[idx] += allocated
                    inclusions[:, o] += allocated.sum(axis=0)
                    visits[o] += idx.size
                    ranked = allocated[:, self.preference[o]]
                    played = np.where(ranked.any(axis=1), self.preference[o][ranked.argmax(axis=1)], NULL)
                    rewards[idx] += reward(o, played, sids[idx])
            totals.append(rewards)
        rewards = np.concatenate(totals)
        with np.errstate(divide='ignore', invalid='ignore'):
            marginals = np.where(visits > 0, inclusions / np.maximum(visits, 1), np.nan)
        stderr = float(rewards.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        return RoundingEstimate(float(rewards.mean()), stderr, marginals, visits)


class OnlineSession:
    """One run of the rounding, fed one info set at a time.

    With ``chain_of`` the session is exploitative: once feedback reports the
    played key as correct, that key is replayed whenever it is on the chain.
    """

    def __init__(self, rounding: PreallocationRounding, rng, chain_of=None):
        self.rounding = rounding
        self.rng = rng
        self.chain_of = chain_of
        self.counts = np.zeros(rounding.num_keys, dtype=np.int64)
        self.found = None
        self.last = NULL
        self.allocations = []

    def step(self, o):
        allocated = self.rounding.allocate(o, self.counts, self.rng)
        self.counts += allocated
        self.allocations.append((o, frozenset(int(k) for k in np.nonzero(allocated)[0])))
        if self.found is not None:
            self.last = self.found if self.found in self.chain_of(o) else NULL
        else:
            self.last = self.rounding.pick(o, allocated)
        return self.last

    def feedback(self, accepted):
        if accepted and self.chain_of is not None and self.last != NULL:
            self.found = self.last


def keychain_reward(forest: InformationForest):
    counts = np.zeros((forest.num_info_sets, forest.num_scenarios))
    for o, row in enumerate(forest.future_counts):
        for s, c in row.items():
            counts[o, s] = c
    correct = np.array(forest.correct)

    def reward(o, played, sids):
        return np.where(played == correct[sids], counts[o, sids], 0.0)

    return reward


def greedy_policy(forest: InformationForest) -> Policy:
    """Top down along every path: the untested key with the largest r_{k,o}, smallest id on ties."""
    tested = {}
    actions = []
    for o in range(forest.num_info_sets):
        parent = forest.parents[o]
        before = tested[parent] if parent >= 0 else frozenset()
        candidates = [k for k in forest.chain(o) if k not in before and forest.weights[o][k] > 0]
        choice = max(candidates, key=lambda k: (forest.weights[o][k], -k)) if candidates else NULL
        actions.append(choice)
        tested[o] = before | {choice} if choice != NULL else before
    return Policy.scenario(actions)


class ApproxResult(NamedTuple):
    forest: InformationForest
    lp_value: float
    expected_value: float
    rounding: PreallocationRounding
    policy: Policy
    policy_value: float


def best_of_roundings(forest, rounding, seed, repetitions=ROUNDING_REPETITIONS, weights=None):
    """Best realized deterministic policy over independently seeded repetitions, scored exactly."""
    if repetitions < 1:
        raise ValidationError('repetitions must be at least 1, got {}'.format(repetitions))
    entropy = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    best, best_value = None, None
    for r in range(repetitions):
        policy = rounding.realize(np.random.default_rng(entropy + [r]))
        if weights is None:
            value = eval_scenario_policy(forest, policy)
        else:
            value = math.fsum(weights[k, o] for o, k in enumerate(policy.actions) if k != NULL)
        if best is None or value > best_value:
            best, best_value = policy, value
    return best, best_value


def approx_solve(instance: ScenarioInstance, seed, repetitions=ROUNDING_REPETITIONS, backend='simplex'):
    forest = build_information_forest(instance)
    fractional = solve_lp_relaxation(forest, backend=backend)
    rounding = PreallocationRounding(forest, forest.weight_matrix(), fractional.x)
    policy, value = best_of_roundings(forest, rounding, seed, repetitions)
    expected = rounding.expected_value()
    logger.info('LP %.9g, rounding expectation %.9g, best of %d roundings %.9g',
                fractional.value, expected, repetitions, float(value))
    return ApproxResult(forest, fractional.value, expected, rounding, policy, value)


def sample_count(num_keys, max_rounds, num_info_sets, epsilon, delta):
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValidationError('epsilon and delta must lie in (0, 1)')
    return math.ceil(2 * max_rounds ** 2 * num_info_sets ** 2
                     * (math.log(num_keys * num_info_sets / delta) + 1) / epsilon ** 2)


class WeightEstimate(NamedTuple):
    weights: np.ndarray
    samples: int


def estimate_weights_from_samples(sampler, forest: InformationForest, epsilon, delta, seed,
                                  num_info_sets=None) -> WeightEstimate:
    """Empirical p_o * r_{k,o} from i.i.d. draws; the info-set structure is taken from ``forest``."""
    bound = forest.num_info_sets if num_info_sets is None else num_info_sets
    h = sample_count(forest.num_keys, forest.instance.max_rounds, bound, epsilon, delta)
    draws = sampler.draw(h, np.random.default_rng(seed))
    if len(draws) != h:
        raise SamplerError('sampler returned {} draws, expected {}'.format(len(draws), h))
    weights = np.zeros((forest.num_keys, forest.num_info_sets))
    for (chains, k), times in Counter((d.chains, d.correct_key) for d in draws).items():
        try:
            path = forest.path_of(chains)
        except KeyError as e:
            raise SamplerError('sampled prefix {} is not an info set of the forest'.format(e.args[0]))
        remaining = sum(k in chain for chain in chains)
        for t, o in enumerate(path):
            if k in chains[t]:
                weights[k, o] += times * remaining
                remaining -= 1
    logger.debug('estimated weights from %d draws', h)
    return WeightEstimate(weights / h, h)


class SampleResult(NamedTuple):
    estimate: WeightEstimate
    lp_value: float
    policy: Policy
    estimated_value: float
    value: float


def sample_based_solve(sampler, forest: InformationForest, epsilon, delta, seed,
                       repetitions=ROUNDING_REPETITIONS, backend='simplex') -> SampleResult:
    """LP and rounding on estimated weights; ``value`` is exact under the forest's own prior."""
    estimate = estimate_weights_from_samples(sampler, forest, epsilon, delta, seed)
    fractional = solve_lp_relaxation(forest, estimate.weights, backend=backend)
    rounding = PreallocationRounding(forest, estimate.weights, fractional.x)
    policy, estimated = best_of_roundings(forest, rounding, seed, repetitions, weights=estimate.weights)
    return SampleResult(estimate, fractional.value, policy, estimated, eval_scenario_policy(forest, policy))
