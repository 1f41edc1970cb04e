"""Policies that are robust to the prior: the prior is only known to lie in a convex set K.

The adversary picks priors by follow-the-regularized-leader with negative
entropy over K; the locksmith best-responds each round, and the uniform
mixture of the best responses is returned with its exact worst case over K.
"""
import logging
import math
from typing import NamedTuple, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, softmax

from .exceptions import ConvergenceError, InfeasibleError, SizeGuardError, ValidationError
from .lp import LinearProgram, solve_lp
from .model import NULL, InformationForest, Policy, ScenarioInstance, build_information_forest, scenario_rewards
from .oracle import solve_forest_mdp
from .scenarios import PreallocationRounding, best_of_roundings, solve_lp_relaxation

logger = logging.getLogger(__name__)

LEADER_GAP_TOLERANCE = 1e-7
LEADER_FEASIBILITY_TOLERANCE = 1e-9
LEADER_MAX_SWEEPS = 10_000
PRIOR_FLOOR = 1e-12
MAX_MULTIPLIER = 1e12
MAX_CATALOG_POLICIES = 5000


class PriorSet:
    """K = {p in the simplex over the instance's scenarios : a @ p <= b}.

    Construction certifies that K is nonempty and records the range of every
    coordinate over K; a scenario whose probability is zero throughout K is
    dropped from the leader's support.
    """

    def __init__(self, instance: ScenarioInstance, a, b, box=None):
        self.instance = instance
        size = instance.num_scenarios
        self.a = np.array(a, dtype=float).reshape(-1, size) if np.size(a) else np.zeros((0, size))
        self.b = np.array(b, dtype=float).reshape(-1)
        if self.b.shape != (self.a.shape[0],):
            raise ValidationError('prior set: expected one bound per constraint row')
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValidationError('prior set: constraints must be finite')
        self.box = box
        try:
            self.lower = np.array([self._extreme(s, -1.0) for s in range(size)])
            self.upper = np.array([self._extreme(s, 1.0) for s in range(size)])
        except InfeasibleError:
            raise ValidationError('prior set is empty: no distribution over the scenarios meets the constraints')
        self.support = self.upper > PRIOR_FLOOR

    @classmethod
    def simplex(cls, instance):
        return cls.with_box(instance, [0.0] * instance.num_scenarios, [1.0] * instance.num_scenarios)

    @classmethod
    def with_box(cls, instance, lower, upper):
        lower = np.array(lower, dtype=float)
        upper = np.array(upper, dtype=float)
        size = instance.num_scenarios
        if lower.shape != (size,) or upper.shape != (size,) or np.any(lower > upper):
            raise ValidationError('prior box: expected lower <= upper with one entry per scenario')
        eye = np.eye(size)
        return cls(instance, np.vstack((eye, -eye)), np.concatenate((upper, -lower)), box=(lower, upper))

    @classmethod
    def point(cls, instance, prior):
        return cls.with_box(instance, prior, prior)

    @property
    def num_scenarios(self):
        return self.instance.num_scenarios

    def _lp(self, objective):
        ones = np.ones((1, self.num_scenarios))
        return LinearProgram(objective, self.a, self.b, ones, [1.0])

    def _extreme(self, s, direction):
        objective = np.zeros(self.num_scenarios)
        objective[s] = direction
        return direction * solve_lp(self._lp(objective)).value

    def is_point(self):
        return bool(np.all(self.upper - self.lower <= PRIOR_FLOOR))

    def contains(self, p, tolerance=LEADER_FEASIBILITY_TOLERANCE):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= -tolerance) and abs(p.sum() - 1) <= tolerance
                    and np.all(self.a @ p <= self.b + tolerance))

    def worst_case(self, utilities):
        """min over K of p @ utilities, as one LP; returns (value, minimizing prior)."""
        result = solve_lp(self._lp(-np.asarray(utilities, dtype=float)))
        return -result.value, result.x


class LeaderStep(NamedTuple):
    prior: np.ndarray
    multipliers: np.ndarray
    gap: float
    sweeps: int


def _box_leader(prior_set, logits):
    lower, upper = (bound[prior_set.support] for bound in prior_set.box)
    log_q = logits - logsumexp(logits)

    def excess(shift):
        return np.clip(np.exp(log_q + shift), lower, upper).sum() - 1.0

    lo = float(np.min(np.log(np.maximum(lower, 1e-300)) - log_q)) - 1.0
    hi = float(np.max(np.log(upper) - log_q)) + 1.0
    shift = lo if excess(lo) >= 0 else hi if excess(hi) <= 0 else brentq(excess, lo, hi, xtol=1e-14)
    p = np.clip(np.exp(log_q + shift), lower, upper)
    return p, np.zeros(0), abs(p.sum() - 1.0), 1


def _projection_leader(prior_set, logits, warm):
    """Dual coordinate ascent: each constraint's multiplier is set so the row holds with equality or is zero."""
    a = prior_set.a[:, prior_set.support]
    b = prior_set.b
    lam = np.zeros(len(b)) if warm is None or len(warm) != len(b) else np.array(warm, dtype=float)

    def prior_for(multipliers):
        return softmax(logits - a.T @ multipliers)

    for sweep in range(1, LEADER_MAX_SWEEPS + 1):
        for i in range(len(b)):
            def excess(value):
                trial = lam.copy()
                trial[i] = value
                return a[i] @ prior_for(trial) - b[i]

            if excess(0.0) <= 0:
                lam[i] = 0.0
                continue
            hi = 1.0
            while excess(hi) > 0:
                hi *= 2.0
                if hi > MAX_MULTIPLIER:
                    raise ConvergenceError('leader multiplier for row {} diverged'.format(i), gap=math.inf)
            lam[i] = brentq(excess, 0.0, hi, xtol=1e-15)
        p = prior_for(lam)
        slack = b - a @ p
        violation = max(0.0, float(-slack.min(initial=0.0)))
        gap = abs(float(lam @ slack)) + violation
        if violation <= LEADER_FEASIBILITY_TOLERANCE and gap <= LEADER_GAP_TOLERANCE:
            return p, lam, gap, sweep
    raise ConvergenceError('leader step did not converge in {} sweeps (gap {:.3g})'.format(LEADER_MAX_SWEEPS, gap),
                           gap=gap)


def ftrl_leader_step(cumulative_utility, eta, prior_set: PriorSet, warm=None) -> LeaderStep:
    """argmin over K of <U, p> + (1/eta) sum p ln p, for the utilities U summed over past rounds."""
    if eta < 0 or not math.isfinite(eta):
        raise ValidationError('eta must be a nonnegative finite number, got {}'.format(eta))
    size = prior_set.num_scenarios
    if prior_set.is_point():
        return LeaderStep(np.clip(prior_set.lower, 0.0, None), np.zeros(0), 0.0, 0)
    logits = -eta * np.asarray(cumulative_utility, dtype=float)[prior_set.support]
    if prior_set.box is not None:
        p, lam, gap, sweeps = _box_leader(prior_set, logits)
    else:
        p, lam, gap, sweeps = _projection_leader(prior_set, logits, warm)
    prior = np.zeros(size)
    prior[prior_set.support] = np.maximum(p, PRIOR_FLOOR)
    prior /= prior.sum()
    return LeaderStep(prior, lam, gap, sweeps)


def ftrl_rounds(max_rounds, num_scenarios, epsilon):
    if not epsilon > 0:
        raise ValidationError('epsilon must be positive, got {}'.format(epsilon))
    return max(1, math.ceil(4 * max_rounds ** 2 * math.log(num_scenarios) / epsilon ** 2))


def ftrl_eta(max_rounds, num_scenarios, rounds):
    return math.sqrt(math.log(num_scenarios)) / (max_rounds * math.sqrt(rounds))


class PolicyCatalog:
    """Every deterministic admissible policy of a small forest, up to equal or dominated utility vectors.

    ``utilities[i, s]`` is the reward of ``policies[i]`` when scenario s is realized.
    """

    def __init__(self, forest: InformationForest, limit=MAX_CATALOG_POLICIES):
        self.forest = forest
        self.limit = limit
        self._relevant = [frozenset(forest.correct[s] for s in forest.consistent[o])
                          for o in range(forest.num_info_sets)]
        self._memo = {}
        entries = [((), {})]
        for root in forest.roots:
            entries = self._combine(entries, self._frontier(root, frozenset()))
        entries = self._prune(entries)
        self.utilities = np.array([self._dense(u) for u, _ in entries], dtype=float)
        self.policies = tuple(Policy.scenario(actions.get(o, NULL) for o in range(forest.num_info_sets))
                              for _, actions in entries)

    def __len__(self):
        return len(self.policies)

    def _dense(self, utility):
        row = np.zeros(self.forest.num_scenarios)
        for s, value in utility:
            row[s] += value
        return row

    def _combine(self, left, right):
        combined = [(u1 + u2, {**a1, **a2}) for u1, a1 in left for u2, a2 in right]
        if len(combined) > self.limit:
            raise SizeGuardError('policy catalog exceeds {} entries'.format(self.limit),
                                 bounds={'policies': self.limit})
        return combined

    def _prune(self, entries):
        by_vector = {}
        for utility, actions in entries:
            by_vector.setdefault(tuple(self._dense(utility)), (utility, actions))
        vectors = list(by_vector)
        keep = [v for v in vectors
                if not any(w != v and all(x >= y for x, y in zip(w, v)) for w in vectors)]
        return [by_vector[v] for v in keep]

    def _frontier(self, o, tested):
        forest = self.forest
        key = (o, tested & self._relevant[o])
        if key in self._memo:
            return self._memo[key]
        tested = key[1]
        options = [NULL] + [k for k in forest.chain(o) if k in self._relevant[o] and k not in tested]
        entries = []
        for k in options:
            own = tuple((s, c) for s, c in forest.future_counts[o].items() if forest.correct[s] == k)
            after = tested | {k} if k != NULL else tested
            branch = [(own, {o: k})]
            for child in forest.children[o]:
                branch = self._combine(branch, self._frontier(child, after))
            entries.extend(branch)
        self._memo[key] = self._prune(entries)
        return self._memo[key]

    def best_response(self, prior):
        return int(np.argmax(self.utilities @ np.asarray(prior, dtype=float)))


def exact_minimax(catalog: PolicyCatalog, prior_set: PriorSet):
    """min over K of max over policies of the expected utility: one LP in (p, z). Returns (value, prior)."""
    size = prior_set.num_scenarios
    count = len(catalog)
    objective = np.zeros(size + 1)
    objective[-1] = -1.0
    a_ub = np.zeros((count + len(prior_set.b), size + 1))
    a_ub[:count, :size] = catalog.utilities
    a_ub[:count, -1] = -1.0
    a_ub[count:, :size] = prior_set.a
    b_ub = np.concatenate((np.zeros(count), prior_set.b))
    a_eq = np.zeros((1, size + 1))
    a_eq[0, :size] = 1.0
    result = solve_lp(LinearProgram(objective, a_ub, b_ub, a_eq, [1.0]))
    return -result.value, result.x[:size]


class MixedPolicy(NamedTuple):
    """Uniform mixture over deterministic admissible policies."""
    forest: InformationForest
    policies: Tuple[Policy, ...]
    utilities: np.ndarray

    def expected_utilities(self):
        return self.utilities.mean(axis=0)

    def value(self, prior):
        return float(self.expected_utilities() @ np.asarray(prior, dtype=float))


class FtrlResult(NamedTuple):
    mixture: MixedPolicy
    worst_case_value: float
    worst_case_prior: np.ndarray
    rounds: int
    eta: float
    priors: np.ndarray
    regret: float
    regret_bound: float
    seed: int


def _best_response(mode, forest, catalog, prior, seed, t):
    if mode == 'catalog':
        i = catalog.best_response(prior)
        return catalog.policies[i], catalog.utilities[i]
    if mode == 'oracle':
        policy = solve_forest_mdp(forest.reweighted(tuple(prior))).policy
    elif mode == 'lp-round':
        reweighted = forest.reweighted(tuple(prior))
        fractional = solve_lp_relaxation(reweighted)
        rounding = PreallocationRounding(reweighted, reweighted.weight_matrix(), fractional.x)
        policy, _ = best_of_roundings(reweighted, rounding, (seed, t))
    else:
        policy = mode(forest.reweighted(tuple(prior)))
    return policy, scenario_rewards(forest, policy).astype(float)


def ftrl_solve(instance: ScenarioInstance, prior_set: PriorSet, epsilon, best_response='oracle', seed=0):
    """``best_response`` is 'oracle', 'catalog', 'lp-round' or a callable taking the reweighted forest."""
    if prior_set.instance is not instance and prior_set.instance != instance:
        raise ValidationError('prior set was built for a different instance')
    if not callable(best_response) and best_response not in ('oracle', 'catalog', 'lp-round'):
        raise ValidationError('unknown best response {!r}'.format(best_response))
    forest = build_information_forest(instance)
    size = instance.num_scenarios
    rounds = ftrl_rounds(instance.max_rounds, size, epsilon)
    eta = ftrl_eta(instance.max_rounds, size, rounds)
    catalog = PolicyCatalog(forest) if best_response == 'catalog' else None

    cumulative = np.zeros(size)
    priors = np.zeros((rounds, size))
    policies, utilities = [], np.zeros((rounds, size))
    warm = None
    for t in range(rounds):
        step = ftrl_leader_step(cumulative, eta, prior_set, warm)
        warm = step.multipliers
        priors[t] = step.prior
        policy, utility = _best_response(best_response, forest, catalog, step.prior, seed, t)
        policies.append(policy)
        utilities[t] = utility
        cumulative += utility

    played = float(np.einsum('ts,ts->', priors, utilities))
    best_fixed, _ = prior_set.worst_case(cumulative)
    regret = played - best_fixed
    regret_bound = (math.log(size) / eta if eta > 0 else 0.0) + eta * float(np.sum(priors * utilities ** 2))

    mixture = MixedPolicy(forest, tuple(policies), utilities)
    value, worst_prior = prior_set.worst_case(mixture.expected_utilities())
    logger.info('ftrl: %d rounds, eta %.4g, worst-case value %.9g, regret %.4g (bound %.4g)',
                rounds, eta, value, regret, regret_bound)
    return FtrlResult(mixture, value, worst_prior, rounds, eta, priors, regret, regret_bound, seed)
