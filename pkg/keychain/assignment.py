"""Maximum-weight bipartite assignment and the exact known-order solver built on it."""
import logging
import math
from typing import NamedTuple, Tuple

import numpy as np

from .exceptions import ValidationError
from .model import NULL, KnownOrderInstance, Policy, eval_known_order_policy

logger = logging.getLogger(__name__)


class AssignmentResult(NamedTuple):
    value: float
    pairs: Tuple[Tuple[int, int], ...]

    def as_dict(self):
        return dict(self.pairs)


def as_weight_matrix(weights):
    try:
        w = np.array(weights, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError('weights: expected a numeric matrix')
    if w.ndim != 2:
        raise ValidationError('weights: expected a 2-d matrix, got {} dimensions'.format(w.ndim))
    if not np.all(np.isfinite(w)):
        raise ValidationError('weights: entries must be finite')
    if np.any(w < 0):
        row, col = np.argwhere(w < 0)[0]
        raise ValidationError('weights[{}][{}]: must be nonnegative, got {}'.format(row, col, w[row, col]))
    return w


def _min_cost_assignment(cost):
    """Shortest augmenting path Hungarian method on a square matrix; returns the row of every column."""
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        min_slack = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            slack = cost[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (slack < min_slack[1:])
            min_slack[1:][better] = slack[better]
            way[1:][better] = j0
            candidates = np.where(free, min_slack[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            u[row_of[used]] += delta
            v[used] -= delta
            min_slack[~used] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    return row_of[1:] - 1


def max_weight_assignment(weights) -> AssignmentResult:
    """Maximum-weight matching of rows to columns; zero-weight pairs are left out of the result."""
    w = as_weight_matrix(weights)
    rows, cols = w.shape
    if rows == 0 or cols == 0 or not np.any(w > 0):
        return AssignmentResult(0.0, ())
    size = max(rows, cols)
    padded = np.zeros((size, size))
    padded[:rows, :cols] = w
    row_of = _min_cost_assignment(padded.max() - padded)
    pairs = tuple(sorted((int(r), int(c)) for c, r in enumerate(row_of)
                         if r < rows and c < cols and w[r, c] > 0))
    return AssignmentResult(math.fsum(w[r, c] for r, c in pairs), pairs)


def solve_known_order(instance: KnownOrderInstance):
    """Bayes-optimal policy for a known chain order: an assignment of keys to rounds weighted by r_{k,t}."""
    result = max_weight_assignment(instance.reward_matrix())
    actions = [NULL] * instance.num_rounds
    for key, t in result.pairs:
        actions[t] = key
    policy = Policy.known_order(actions)
    value = eval_known_order_policy(instance, policy)
    logger.debug('known-order optimum %s over %d keys and %d rounds', value, instance.num_keys, instance.num_rounds)
    return value, policy
