"""Keychain Order Selection: the learner also picks the order in which the chains are presented."""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import NamedTuple, Tuple

import numpy as np

from .assignment import max_weight_assignment, solve_known_order
from .exceptions import AdmissibilityError, SizeGuardError, ValidationError
from .model import (NULL, PROBABILITY_TOLERANCE, KnownOrderInstance, Policy, _check_num_keys, as_probability,
                    canonical_chains, check_sums_to_one, exact_sum)

logger = logging.getLogger(__name__)

MAX_BRUTE_FORCE_CHAINS = 7


@dataclass(frozen=True)
class OrderInstance:
    """Keys, a multiset of chains in no particular order, and a prior over the correct key."""
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
    def num_chains(self):
        return len(self.chains)

    def adjacency(self):
        """a[k, j] = 1 when key k is on chain j."""
        a = np.zeros((self.num_keys, self.num_chains), dtype=np.int64)
        for j, chain in enumerate(self.chains):
            a[list(chain), j] = 1
        return a

    def appearances(self):
        return self.adjacency().sum(axis=1)

    def is_uniform(self):
        return all(abs(p - self.prior[0]) <= PROBABILITY_TOLERANCE for p in self.prior)

    def in_order(self, ordering) -> KnownOrderInstance:
        return KnownOrderInstance(self.num_keys, tuple(self.chains[j] for j in ordering), self.prior)


@dataclass(frozen=True)
class OrderPolicy:
    """``ordering[t]`` is the chain presented at round t; ``selection[j]`` is the key played on chain j."""
    ordering: Tuple[int, ...]
    selection: Tuple[int, ...]

    def __post_init__(self):
        ordering = tuple(int(j) for j in self.ordering)
        if sorted(ordering) != list(range(len(ordering))):
            raise ValidationError('ordering: expected a permutation of the chains, got {}'.format(list(ordering)))
        if len(self.selection) != len(ordering):
            raise ValidationError('selection: expected {} entries, got {}'.format(len(ordering), len(self.selection)))
        selection = tuple(NULL if k is None else int(k) for k in self.selection)
        object.__setattr__(self, 'ordering', ordering)
        object.__setattr__(self, 'selection', selection)

    def reversed(self):
        return OrderPolicy(self.ordering[::-1], self.selection)

    def as_known_order_policy(self):
        return Policy.known_order(self.selection[j] for j in self.ordering)


class OrderResult(NamedTuple):
    value: Real
    policy: OrderPolicy


def check_order_policy(instance: OrderInstance, policy: OrderPolicy):
    if len(policy.ordering) != instance.num_chains:
        raise ValidationError('policy covers {} chains, instance has {}'.format(
            len(policy.ordering), instance.num_chains))
    seen = {}
    for j, k in enumerate(policy.selection):
        if k == NULL:
            continue
        if k not in instance.chains[j]:
            raise AdmissibilityError('key {} selected for chain {} is not on it'.format(k, j), key=k, info_sets=(j,))
        if k in seen:
            raise AdmissibilityError('key {} is selected for chains {} and {}'.format(k, seen[k], j),
                                     key=k, info_sets=(seen[k], j))
        seen[k] = j


def eval_order_policy(instance: OrderInstance, policy: OrderPolicy):
    """sum over chains C of p_{k(C)} times the appearances of k(C) from the round of C on."""
    check_order_policy(instance, policy)
    position = {j: t for t, j in enumerate(policy.ordering)}
    terms = []
    for j, k in enumerate(policy.selection):
        if k == NULL:
            continue
        later = sum(1 for i, chain in enumerate(instance.chains) if k in chain and position[i] >= position[j])
        terms.append(instance.prior[k] * later)
    return exact_sum(terms)


def _policy_from_rounds(ordering, actions):
    selection = [NULL] * len(ordering)
    for t, j in enumerate(ordering):
        selection[j] = actions[t]
    return OrderPolicy(tuple(ordering), tuple(selection))


def solve_for_ordering(instance: OrderInstance, ordering) -> OrderResult:
    value, policy = solve_known_order(instance.in_order(ordering))
    return OrderResult(value, _policy_from_rounds(ordering, policy.actions))


def best_of_two(instance: OrderInstance) -> OrderResult:
    """The input order and its reverse, each solved exactly; the forward order wins ties."""
    forward = solve_for_ordering(instance, tuple(range(instance.num_chains)))
    backward = solve_for_ordering(instance, tuple(range(instance.num_chains - 1, -1, -1)))
    return backward if backward.value > forward.value else forward


def brute_force_order_opt(instance: OrderInstance) -> OrderResult:
    """Every ordering in lexicographic order; a later ordering must be strictly better to replace the incumbent."""
    if instance.num_chains > MAX_BRUTE_FORCE_CHAINS:
        raise SizeGuardError('brute force refuses {} chains (bound {})'.format(
            instance.num_chains, MAX_BRUTE_FORCE_CHAINS), bounds={'chains': MAX_BRUTE_FORCE_CHAINS})
    adjacency = instance.adjacency()
    prior = np.array([float(p) for p in instance.prior])
    best, best_ordering = None, None
    for ordering in itertools.permutations(range(instance.num_chains)):
        a = adjacency[:, ordering]
        remaining = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
        value = max_weight_assignment(prior[:, None] * a * remaining).value
        if best is None or value > best + 1e-12:
            best, best_ordering = value, ordering
    logger.debug('brute force over %d chains: best %.12g at ordering %s', instance.num_chains, best, best_ordering)
    return solve_for_ordering(instance, best_ordering)


def reversal_identity(instance: OrderInstance, policy: OrderPolicy):
    """Both sides of r(k, s) + r(k, reversed s) = sum over played chains of p_k * (appearances of k + 1)."""
    lhs = eval_order_policy(instance, policy) + eval_order_policy(instance, policy.reversed())
    counts = instance.appearances()
    rhs = exact_sum(instance.prior[k] * (int(counts[k]) + 1) for k in policy.selection if k != NULL)
    return lhs, rhs


def utmp_gadget(matrix) -> OrderInstance:
    """Order instance whose optimum reaches (n + 2) / 2 exactly when ``matrix`` can be permuted upper triangular."""
    m = np.array(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError('matrix: expected a nonempty square matrix, got shape {}'.format(m.shape))
    if not np.isin(m, (0, 1)).all():
        raise ValidationError('matrix: entries must be 0 or 1')
    n = m.shape[0]
    b = np.ones((n + 1, n + 1), dtype=np.int64)
    b[:n, 1:] = 1 - m
    # chain j holds key i exactly when b[j, i] = 1
    chains = tuple(tuple(int(i) for i in np.nonzero(b[j])[0]) for j in range(n + 1))
    return OrderInstance(n + 1, chains, (Fraction(1, n + 1),) * (n + 1))


def reaches_upper_bound(instance: OrderInstance) -> bool:
    if instance.num_keys != instance.num_chains or not instance.is_uniform():
        raise ValidationError('the (n + 1) / 2 bound needs a square instance with a uniform prior')
    value = brute_force_order_opt(instance).value
    return abs(value - Fraction(instance.num_keys + 1, 2)) <= 1e-9
