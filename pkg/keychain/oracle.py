"""Exact Bayes-optimal solvers by memoized backward induction, for checking the other solvers on small instances."""
import logging
from typing import FrozenSet, NamedTuple

from .exceptions import SizeGuardError
from .model import NULL, InformationForest, MultiKeyInstance, Policy, ScenarioInstance, build_information_forest

logger = logging.getLogger(__name__)

MAX_KEYS = 20
MAX_INFO_SETS = 5000
MAX_LIVE_KEYS = 16
MAX_LIVE_PAIRS = 12
MAX_MULTI_KEY_ROUNDS = 32
TIE_TOLERANCE = 1e-12


class OneKeyState(NamedTuple):
    info_set: int
    tested: FrozenSet[int]


class MultiKeyState(NamedTuple):
    round: int
    correct: FrozenSet[int]
    incorrect: FrozenSet[int]


class OracleResult(NamedTuple):
    value: object
    policy: Policy
    states: int


class MultiKeyResult(NamedTuple):
    value: float
    first_action: int
    exploit_value: float
    states: int


def _better(candidate, incumbent):
    return incumbent is None or candidate > incumbent + TIE_TOLERANCE


def solve_forest_mdp(forest: InformationForest) -> OracleResult:
    """Best admissible policy over the forest's own weights.

    The state is the info set plus the keys already tested on the path to it,
    restricted to the keys that are still correct somewhere below it. Failed
    tests are conditioned on implicitly: a tested key earns nothing further.
    """
    if forest.num_keys > MAX_KEYS or forest.num_info_sets > MAX_INFO_SETS:
        raise SizeGuardError('oracle refuses {} keys and {} info sets (bounds {} and {})'.format(
            forest.num_keys, forest.num_info_sets, MAX_KEYS, MAX_INFO_SETS),
            bounds={'num_keys': MAX_KEYS, 'info_sets': MAX_INFO_SETS})
    relevant = [forest.correct_keys(o) for o in range(forest.num_info_sets)]
    memo = {}

    def candidates(o, tested):
        live = relevant[o] - tested
        return [k for k in forest.chain(o) if k in live] + [NULL]

    def value(o, tested):
        state = OneKeyState(o, tested & relevant[o])
        if state in memo:
            return memo[state]
        if relevant[o] <= tested:
            memo[state] = 0
            return 0
        best = None
        for k in candidates(o, state.tested):
            after = state.tested | {k} if k != NULL else state.tested
            total = (forest.weights[o][k] if k != NULL else 0) + sum(value(c, after) for c in forest.children[o])
            if best is None or total > best:
                best = total
        memo[state] = best
        return best

    optimum = sum(value(r, frozenset()) for r in forest.roots)

    actions = [NULL] * forest.num_info_sets
    tested = {}
    for o in range(forest.num_info_sets):
        parent = forest.parents[o]
        before = frozenset() if parent < 0 else tested[parent]
        best, choice = None, NULL
        if not relevant[o] <= before:
            for k in candidates(o, before):
                after = before | {k} if k != NULL else before
                total = (forest.weights[o][k] if k != NULL else 0) + sum(value(c, after) for c in forest.children[o])
                if best is None or total > best:
                    best, choice = total, k
        actions[o] = choice
        tested[o] = before | {choice} if choice != NULL else before

    logger.debug('one-key oracle visited %d states, optimum %s', len(memo), optimum)
    return OracleResult(optimum, Policy.scenario(actions), len(memo))


def solve_one_key_mdp(instance: ScenarioInstance) -> OracleResult:
    return solve_forest_mdp(build_information_forest(instance))


class _MultiKeyGame:
    """Transitions shared by the optimal solver and strategy evaluation."""

    def __init__(self, instance: MultiKeyInstance):
        self.instance = instance
        self.dueling = instance.mode == MultiKeyInstance.DUELING
        future = [frozenset()] * (instance.num_rounds + 1)
        for t in range(instance.num_rounds - 1, -1, -1):
            future[t] = future[t + 1] | set(instance.chains[t])
        self.future = future

    def live_counts(self):
        """Keys (pairs in dueling mode) seen before a round boundary that appear again after it, per boundary."""
        counts = []
        seen = set()
        for t in range(1, self.instance.num_rounds):
            seen |= set(self.instance.chains[t - 1])
            if self.dueling:
                counts.append(len({k // 2 for k in seen} & {k // 2 for k in self.future[t]}))
            else:
                counts.append(len(seen & self.future[t]))
        return counts

    def check_size(self):
        live = max(self.live_counts(), default=0)
        bound = MAX_LIVE_PAIRS if self.dueling else MAX_LIVE_KEYS
        over = live > bound
        report = '{} live {} (bound {})'.format(live, 'pairs' if self.dueling else 'keys', bound)
        if over or self.instance.num_rounds > MAX_MULTI_KEY_ROUNDS:
            raise SizeGuardError('multi-key oracle refuses {} and {} chains (bound {})'.format(
                report, self.instance.num_rounds, MAX_MULTI_KEY_ROUNDS),
                bounds={'live_keys': MAX_LIVE_KEYS, 'live_pairs': MAX_LIVE_PAIRS, 'rounds': MAX_MULTI_KEY_ROUNDS})

    def masked(self, state):
        live = self.future[state.round]
        return MultiKeyState(state.round, state.correct & live, state.incorrect & live)

    def success_probability(self, k):
        probs = self.instance.probs
        if self.dueling:
            return probs[k // 2] if k % 2 == 0 else 1 - probs[k // 2]
        return probs[k]

    def outcomes(self, state, k):
        """(probability, reward, next state) of testing untested key k; zero-probability branches are dropped."""
        q = self.success_probability(k)
        t = state.round + 1
        if self.dueling:
            partner = k ^ 1
            success = MultiKeyState(t, state.correct | {k}, state.incorrect | {partner})
            failure = MultiKeyState(t, state.correct | {partner}, state.incorrect | {k})
        else:
            success = MultiKeyState(t, state.correct | {k}, state.incorrect)
            failure = MultiKeyState(t, state.correct, state.incorrect | {k})
        return [(p, r, s) for p, r, s in ((q, 1, success), (1 - q, 0, failure)) if p > 0]

    def step(self, state, k):
        """Expected immediate reward and weighted successors of playing k (or NULL)."""
        if k == NULL or k in state.incorrect or k not in self.instance.chains[state.round]:
            return 0, [(1, MultiKeyState(state.round + 1, state.correct, state.incorrect))]
        if k in state.correct:
            return 1, [(1, MultiKeyState(state.round + 1, state.correct, state.incorrect))]
        branches = self.outcomes(state, k)
        return sum(p * r for p, r, _ in branches), [(p, s) for p, _, s in branches]

    def certain(self, k):
        return self.success_probability(k) >= 1

    def actions(self, state, exploit_only):
        """Exploitative play must take a key known to open, counting keys that open with certainty."""
        chain = self.instance.chains[state.round]
        known = [k for k in chain if k in state.correct]
        if exploit_only and not known:
            known = [k for k in chain if k not in state.incorrect and self.certain(k)]
        if known:
            return known[:1] if exploit_only else known[:1] + [k for k in chain if k not in state.correct
                                                                and k not in state.incorrect] + [NULL]
        return [k for k in chain if k not in state.incorrect] + [NULL]


def solve_multi_key_mdp(instance: MultiKeyInstance) -> MultiKeyResult:
    """Optimal value and first action, plus the best value of policies forced to replay known-correct keys."""
    game = _MultiKeyGame(instance)
    game.check_size()
    start = MultiKeyState(0, frozenset(), frozenset())

    def solver(exploit_only):
        memo = {}

        def action_value(state, k):
            reward, successors = game.step(state, k)
            return reward + sum(p * value(s) for p, s in successors)

        def value(state):
            if state.round == instance.num_rounds:
                return 0.0
            state = game.masked(state)
            if state not in memo:
                memo[state] = max(action_value(state, k) for k in game.actions(state, exploit_only))
            return memo[state]

        return value, action_value, memo

    value, action_value, memo = solver(exploit_only=False)
    optimum = value(start)
    best, first = None, NULL
    for k in game.actions(start, exploit_only=False):
        candidate = action_value(start, k)
        if _better(candidate, best):
            best, first = candidate, k
    exploit, _, exploit_memo = solver(exploit_only=True)
    exploit_value = exploit(start)
    logger.debug('multi-key oracle: optimum %.12g, exploitative %.12g, %d states',
                 optimum, exploit_value, len(memo) + len(exploit_memo))
    return MultiKeyResult(float(optimum), first, float(exploit_value), len(memo) + len(exploit_memo))


def evaluate_multi_key_strategy(instance: MultiKeyInstance, chooser) -> float:
    """Expected reward of ``chooser(round, correct, incorrect, chain) -> key or NULL`` played to the end."""
    game = _MultiKeyGame(instance)
    memo = {}

    def value(state):
        if state.round == instance.num_rounds:
            return 0.0
        if state not in memo:
            k = chooser(state.round, state.correct, state.incorrect, instance.chains[state.round])
            reward, successors = game.step(state, NULL if k is None else k)
            memo[state] = reward + sum(p * value(s) for p, s in successors)
        return memo[state]

    return float(value(MultiKeyState(0, frozenset(), frozenset())))
