"""Core types of the Keychain Problem family, exact policy evaluation and simulation.

Keys are 0-based integers and ``NULL`` is the "play nothing useful" action.
Chains are stored canonically as sorted tuples of distinct key ids, so two
information sets are the same exactly when their chain prefixes compare equal.

Probabilities may be floats or :class:`fractions.Fraction`; evaluation keeps
rationals rational, so golden values can be checked exactly.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import AdmissibilityError, ValidationError

logger = logging.getLogger(__name__)

NULL = -1
PROBABILITY_TOLERANCE = 1e-9
TRIAL_BLOCK_SIZE = 4096


def exact_sum(values):
    values = list(values)
    if any(isinstance(v, Fraction) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(values)


def as_probability(value, field):
    if isinstance(value, bool) or not isinstance(value, (Real, np.number)):
        raise ValidationError('{}: expected a number, got {!r}'.format(field, value))
    if isinstance(value, np.number):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        raise ValidationError('{}: must be finite'.format(field))
    if value < 0:
        raise ValidationError('{}: must be nonnegative, got {}'.format(field, value))
    return value


def check_sums_to_one(probs, field):
    total = exact_sum(probs)
    if abs(total - 1) > PROBABILITY_TOLERANCE:
        raise ValidationError('{}: probabilities sum to {}, not 1'.format(field, float(total)))


def canonical_chain(chain, num_keys, field='chain'):
    try:
        keys = {int(k) for k in chain}
    except (TypeError, ValueError):
        raise ValidationError('{}: expected a list of key ids, got {!r}'.format(field, chain))
    if not keys:
        raise ValidationError('{}: chain must be nonempty'.format(field))
    for k in keys:
        if not 0 <= k < num_keys:
            raise ValidationError('{}: key {} out of range [0, {})'.format(field, k, num_keys))
    return tuple(sorted(keys))


def canonical_chains(chains, num_keys, field='chains'):
    chains = tuple(canonical_chain(c, num_keys, '{}[{}]'.format(field, t)) for t, c in enumerate(chains))
    if not chains:
        raise ValidationError('{}: at least one chain is required'.format(field))
    return chains


def _check_num_keys(num_keys):
    if isinstance(num_keys, bool) or not isinstance(num_keys, (int, np.integer)) or num_keys < 1:
        raise ValidationError('num_keys: expected a positive integer, got {!r}'.format(num_keys))
    return int(num_keys)


@dataclass(frozen=True)
class KnownOrderInstance:
    num_keys: int
    chains: Tuple[Tuple[int, ...], ...]
    prior: Tuple[Real, ...]

    def __post_init__(self):
        num_keys = _check_num_keys(self.num_keys)
        object.__setattr__(self, 'num_keys', num_keys)
        object.__setattr__(self, 'chains', canonical_chains(self.chains, num_keys))
        prior = tuple(as_probability(p, 'prior[{}]'.format(k)) for k, p in enumerate(self.prior))
        if len(prior) != num_keys:
            raise ValidationError('prior: expected {} entries, got {}'.format(num_keys, len(prior)))
        check_sums_to_one(prior, 'prior')
        object.__setattr__(self, 'prior', prior)

    @property
    def num_rounds(self):
        return len(self.chains)

    def appearances(self):
        table = np.zeros((self.num_keys, self.num_rounds), dtype=np.int64)
        for t, chain in enumerate(self.chains):
            table[list(chain), t] = 1
        return table

    def reward_table(self):
        """r[k][t] = p_k * 1{k in C_t} * (appearances of k from round t on), exact when the prior is."""
        appearances = self.appearances()
        remaining = np.cumsum(appearances[:, ::-1], axis=1)[:, ::-1]
        return [[self.prior[k] * int(remaining[k, t]) if appearances[k, t] else 0
                 for t in range(self.num_rounds)]
                for k in range(self.num_keys)]

    def reward_matrix(self):
        return np.array([[float(r) for r in row] for row in self.reward_table()], dtype=float)


class Scenario(NamedTuple):
    chains: Tuple[Tuple[int, ...], ...]
    correct_key: int
    prob: Real


@dataclass(frozen=True)
class ScenarioInstance:
    num_keys: int
    scenarios: Tuple[Scenario, ...]

    def __post_init__(self):
        num_keys = _check_num_keys(self.num_keys)
        object.__setattr__(self, 'num_keys', num_keys)
        scenarios = []
        for s, raw in enumerate(self.scenarios):
            chains, correct_key, prob = raw
            field = 'scenarios[{}]'.format(s)
            chains = canonical_chains(chains, num_keys, field + '.chains')
            if isinstance(correct_key, bool) or not isinstance(correct_key, (int, np.integer)) \
                    or not 0 <= correct_key < num_keys:
                raise ValidationError('{}.correct_key: invalid key id {!r}'.format(field, correct_key))
            scenarios.append(Scenario(chains, int(correct_key), as_probability(prob, field + '.prob')))
        if not scenarios:
            raise ValidationError('scenarios: at least one scenario is required')
        check_sums_to_one([sc.prob for sc in scenarios], 'scenarios')
        object.__setattr__(self, 'scenarios', tuple(scenarios))

    @property
    def num_scenarios(self):
        return len(self.scenarios)

    @property
    def max_rounds(self):
        return max(len(sc.chains) for sc in self.scenarios)

    def probabilities(self):
        return tuple(sc.prob for sc in self.scenarios)

    def with_probabilities(self, probs):
        if len(probs) != self.num_scenarios:
            raise ValidationError('expected {} probabilities, got {}'.format(self.num_scenarios, len(probs)))
        return ScenarioInstance(self.num_keys, tuple(sc._replace(prob=p) for sc, p in zip(self.scenarios, probs)))

    def merge_duplicates(self):
        """Sums the probabilities of byte-identical scenarios. Returns the merged instance and the merge count."""
        merged = {}
        for sc in self.scenarios:
            key = (sc.chains, sc.correct_key)
            merged[key] = merged[key] + [sc.prob] if key in merged else [sc.prob]
        count = self.num_scenarios - len(merged)
        if not count:
            return self, 0
        scenarios = tuple(Scenario(chains, k, exact_sum(probs)) for (chains, k), probs in merged.items())
        return ScenarioInstance(self.num_keys, scenarios), count


class PrefixForest:
    """Deduplicated prefixes of per-scenario observation sequences.

    Info-set ids are assigned depth by depth, and within a depth in order of
    the first scenario reaching the prefix.
    """

    def __init__(self, sequences: Sequence[tuple], probs: Sequence[Real]):
        index = {}
        prefixes, parents, depths = [], [], []
        paths = [[] for _ in sequences]
        max_depth = max(len(seq) for seq in sequences)
        for depth in range(max_depth):
            for s, seq in enumerate(sequences):
                if len(seq) <= depth:
                    continue
                prefix = tuple(seq[:depth + 1])
                o = index.get(prefix)
                if o is None:
                    o = index[prefix] = len(prefixes)
                    prefixes.append(prefix)
                    parents.append(paths[s][-1] if depth else -1)
                    depths.append(depth)
                paths[s].append(o)

        children = [[] for _ in prefixes]
        consistent = [[] for _ in prefixes]
        for o, parent in enumerate(parents):
            if parent >= 0:
                children[parent].append(o)
        for s, path in enumerate(paths):
            for o in path:
                consistent[o].append(s)

        self._index = index
        self.prefixes = tuple(prefixes)
        self.parents = tuple(parents)
        self.depths = tuple(depths)
        self.children = tuple(tuple(c) for c in children)
        self.roots = tuple(o for o, parent in enumerate(parents) if parent < 0)
        self.paths = tuple(tuple(p) for p in paths)
        self.consistent = tuple(tuple(c) for c in consistent)
        self.scenario_probs = tuple(probs)
        self.probs = tuple(exact_sum(self.scenario_probs[s] for s in c) for c in self.consistent)

    @property
    def num_info_sets(self):
        return len(self.prefixes)

    @property
    def num_scenarios(self):
        return len(self.paths)

    def index(self, prefix) -> Optional[int]:
        return self._index.get(tuple(prefix))

    def path_of(self, sequence):
        path = []
        for depth in range(len(sequence)):
            o = self._index.get(tuple(sequence[:depth + 1]))
            if o is None:
                raise KeyError(tuple(sequence[:depth + 1]))
            path.append(o)
        return tuple(path)

    def path_matrix(self):
        """Info-set ids along every scenario path, padded with -1 to a common depth."""
        depth = max(len(p) for p in self.paths)
        matrix = np.full((self.num_scenarios, depth), -1, dtype=np.int64)
        for s, path in enumerate(self.paths):
            matrix[s, :len(path)] = path
        return matrix


class InformationForest(PrefixForest):
    """Information sets of a :class:`ScenarioInstance` with consistency sets and rewards.

    ``weights[o][k]`` is p_o * r_{k,o}: the probability mass of scenarios in C(o)
    whose correct key is k, each weighted by the remaining appearances of k
    from the round of o on (zero when k is not on the chain of o).
    """

    def __init__(self, instance: ScenarioInstance):
        super().__init__([sc.chains for sc in instance.scenarios], instance.probabilities())
        self.instance = instance
        self.num_keys = instance.num_keys
        self.correct = tuple(sc.correct_key for sc in instance.scenarios)

        counts = [dict() for _ in self.prefixes]
        terms = [dict() for _ in self.prefixes]
        for s, sc in enumerate(instance.scenarios):
            k = sc.correct_key
            remaining = 0
            future = [0] * len(sc.chains)
            for t in range(len(sc.chains) - 1, -1, -1):
                remaining += k in sc.chains[t]
                future[t] = remaining
            for t, o in enumerate(self.paths[s]):
                if k in sc.chains[t]:
                    counts[o][s] = future[t]
                    terms[o].setdefault(k, []).append(sc.prob * future[t])
        self.future_counts = tuple(counts)
        self.weights = tuple(
            tuple(exact_sum(row[k]) if k in row else 0 for k in range(self.num_keys)) for row in terms)
        logger.debug('built information forest: %d info sets over %d scenarios',
                     self.num_info_sets, self.num_scenarios)

    def chain(self, o):
        return self.prefixes[o][-1]

    def reward(self, k, o):
        p = self.probs[o]
        return self.weights[o][k] / p if p else 0

    def weight_matrix(self):
        return np.array([[float(self.weights[o][k]) for o in range(self.num_info_sets)]
                         for k in range(self.num_keys)], dtype=float).reshape(self.num_keys, self.num_info_sets)

    def correct_keys(self, o):
        return frozenset(self.correct[s] for s in self.consistent[o] if self.scenario_probs[s] > 0)

    def reweighted(self, probs):
        return InformationForest(self.instance.with_probabilities(probs))


def build_information_forest(instance: ScenarioInstance) -> InformationForest:
    return InformationForest(instance)


@dataclass(frozen=True)
class Policy:
    """Deterministic exploitative policy: a key (or NULL) per round or per information set."""
    kind: str
    actions: Tuple[int, ...]

    KNOWN_ORDER = 'known_order'
    SCENARIO = 'scenario'

    def __post_init__(self):
        if self.kind not in (self.KNOWN_ORDER, self.SCENARIO):
            raise ValidationError('policy kind must be {!r} or {!r}, got {!r}'.format(
                self.KNOWN_ORDER, self.SCENARIO, self.kind))
        actions = []
        for i, a in enumerate(self.actions):
            a = NULL if a is None else a
            if isinstance(a, bool) or not isinstance(a, (int, np.integer)) or a < NULL:
                raise ValidationError('actions[{}]: expected a key id or null, got {!r}'.format(i, a))
            actions.append(int(a))
        object.__setattr__(self, 'actions', tuple(actions))

    @classmethod
    def null(cls, kind, size):
        return cls(kind, (NULL,) * size)

    @classmethod
    def scenario(cls, actions):
        return cls(cls.SCENARIO, tuple(actions))

    @classmethod
    def known_order(cls, actions):
        return cls(cls.KNOWN_ORDER, tuple(actions))

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, index):
        return self.actions[index]

    def as_scenario_policy(self):
        return Policy(self.SCENARIO, self.actions)


class Violation(NamedTuple):
    scenario: int
    key: int
    info_sets: Tuple[int, int]

    def describe(self):
        return 'key {} is assigned to info sets {} and {}, both on the path of scenario {}'.format(
            self.key, self.info_sets[0], self.info_sets[1], self.scenario)


def _check_policy_shape(policy, kind, size, num_keys):
    if policy.kind != kind:
        raise ValidationError('expected a {} policy, got a {} policy'.format(kind, policy.kind))
    if len(policy) != size:
        raise ValidationError('policy has {} actions, expected {}'.format(len(policy), size))
    for i, k in enumerate(policy.actions):
        if k >= num_keys:
            raise ValidationError('actions[{}]: key {} out of range [0, {})'.format(i, k, num_keys))


def validate_admissible(forest: InformationForest, policy: Policy) -> Optional[Violation]:
    _check_policy_shape(policy, Policy.SCENARIO, forest.num_info_sets, forest.num_keys)
    for s, path in enumerate(forest.paths):
        seen = {}
        for o in path:
            k = policy[o]
            if k == NULL:
                continue
            if k in seen:
                return Violation(s, k, (seen[k], o))
            seen[k] = o
    return None


def check_admissible(forest, policy):
    violation = validate_admissible(forest, policy)
    if violation is not None:
        raise AdmissibilityError('inadmissible policy: ' + violation.describe(),
                                 scenario=violation.scenario, key=violation.key, info_sets=violation.info_sets)


def eval_scenario_policy(forest: InformationForest, policy: Policy):
    check_admissible(forest, policy)
    return exact_sum(forest.weights[o][k] for o, k in enumerate(policy.actions) if k != NULL)


def _check_injective(policy):
    seen = {}
    for t, k in enumerate(policy.actions):
        if k == NULL:
            continue
        if k in seen:
            raise AdmissibilityError('inadmissible policy: key {} is played in rounds {} and {}'.format(
                k, seen[k], t), key=k, info_sets=(seen[k], t))
        seen[k] = t


def eval_known_order_policy(instance: KnownOrderInstance, policy: Policy):
    _check_policy_shape(policy, Policy.KNOWN_ORDER, instance.num_rounds, instance.num_keys)
    _check_injective(policy)
    table = instance.reward_table()
    return exact_sum(table[k][t] for t, k in enumerate(policy.actions) if k != NULL)


def embed_known_order(instance: KnownOrderInstance) -> ScenarioInstance:
    """One scenario per key, all sharing the chain sequence; the forest then has one info set per round."""
    return ScenarioInstance(instance.num_keys,
                            tuple(Scenario(instance.chains, k, p) for k, p in enumerate(instance.prior)))


def policy_trace(forest: InformationForest, policy: Policy):
    """Per-scenario, per-round rewards of the exploitative protocol driven by ``policy``."""
    check_admissible(forest, policy)
    trace = np.zeros((forest.num_scenarios, forest.instance.max_rounds), dtype=np.int64)
    for s, path in enumerate(forest.paths):
        correct = forest.correct[s]
        found = False
        for t, o in enumerate(path):
            on_chain = correct in forest.chain(o)
            if not found and policy[o] == correct and on_chain:
                found = True
            trace[s, t] = found and on_chain
    return trace


def scenario_rewards(forest, policy):
    return policy_trace(forest, policy).sum(axis=1)


class SimulationResult(NamedTuple):
    mean: float
    stderr: float
    rewards: np.ndarray
    traces: np.ndarray
    scenario_ids: np.ndarray


def trial_blocks(trials, seed):
    """Yields (block generator, block size); block b is seeded with (seed, b) regardless of who runs it."""
    if trials < 1:
        raise ValidationError('trials must be at least 1, got {}'.format(trials))
    if seed < 0:
        raise ValidationError('seed must be nonnegative, got {}'.format(seed))
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK_SIZE)):
        yield np.random.default_rng([seed, block]), min(TRIAL_BLOCK_SIZE, trials - start)


def sampling_probabilities(probs):
    p = np.array([float(v) for v in probs], dtype=float)
    return p / p.sum()


def simulate(instance, policy: Policy, seed: int, trials: int) -> SimulationResult:
    if isinstance(instance, KnownOrderInstance):
        _check_policy_shape(policy, Policy.KNOWN_ORDER, instance.num_rounds, instance.num_keys)
        _check_injective(policy)
        instance, policy = embed_known_order(instance), policy.as_scenario_policy()
    forest = build_information_forest(instance)
    per_scenario = policy_trace(forest, policy)
    probs = sampling_probabilities(forest.scenario_probs)

    ids = np.concatenate([rng.choice(forest.num_scenarios, size=size, p=probs)
                          for rng, size in trial_blocks(trials, seed)])
    traces = per_scenario[ids]
    rewards = traces.sum(axis=1)
    stderr = float(rewards.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    logger.debug('simulated %d trials with seed %d', trials, seed)
    return SimulationResult(float(rewards.mean()), stderr, rewards, traces, ids)


@dataclass(frozen=True)
class MultiKeyInstance:
    """Lock with several correct keys.

    In ``independent`` mode ``probs[k]`` is the acceptance probability of key k.
    In ``dueling`` mode keys 2i and 2i+1 form pair i, exactly one of them opens
    the lock, and ``probs[i]`` is the probability that it is key 2i.
    """
    num_keys: int
    chains: Tuple[Tuple[int, ...], ...]
    mode: str
    probs: Tuple[Real, ...]

    INDEPENDENT = 'independent'
    DUELING = 'dueling'

    def __post_init__(self):
        num_keys = _check_num_keys(self.num_keys)
        object.__setattr__(self, 'num_keys', num_keys)
        object.__setattr__(self, 'chains', canonical_chains(self.chains, num_keys))
        if self.mode not in (self.INDEPENDENT, self.DUELING):
            raise ValidationError('mode must be {!r} or {!r}, got {!r}'.format(
                self.INDEPENDENT, self.DUELING, self.mode))
        if self.mode == self.DUELING and num_keys % 2:
            raise ValidationError('num_keys must be even in dueling mode, got {}'.format(num_keys))
        expected = num_keys if self.mode == self.INDEPENDENT else num_keys // 2
        probs = tuple(as_probability(p, 'probs[{}]'.format(i)) for i, p in enumerate(self.probs))
        if len(probs) != expected:
            raise ValidationError('probs: expected {} entries, got {}'.format(expected, len(probs)))
        for i, p in enumerate(probs):
            if p > 1:
                raise ValidationError('probs[{}]: must lie in [0, 1], got {}'.format(i, p))
        object.__setattr__(self, 'probs', probs)

    @property
    def num_rounds(self):
        return len(self.chains)

    @property
    def num_pairs(self):
        return self.num_keys // 2

    def to_scenarios(self) -> ScenarioInstance:
        """A single dueling pair has exactly one correct key, so it is a two-scenario instance."""
        if self.mode != self.DUELING or self.num_pairs != 1:
            raise ValidationError('only a single dueling pair converts to scenarios')
        p = self.probs[0]
        return ScenarioInstance(2, (Scenario(self.chains, 0, p), Scenario(self.chains, 1, 1 - p)))
