"""Benchmark suites: seeded instance sweeps, every applicable algorithm, and an exact oracle where size permits."""
import csv
import logging
import time

from .exceptions import ValidationError
from .gen import exploit_counterexample, random_instance
from .model import ScenarioInstance, eval_scenario_policy
from .obm import WobmInstance, philosopher_oracle, solve_wobm
from .oracle import solve_multi_key_mdp, solve_one_key_mdp
from .order import OrderInstance, best_of_two, brute_force_order_opt
from .scenarios import approx_solve, greedy_policy

logger = logging.getLogger(__name__)

COLUMNS = ('instance', 'n', 'm', 'scenarios', 'algo', 'value', 'oracle', 'lp', 'ratio', 'wall_ms')
SUITE_SIZE = 10
WOBM_TRIALS = 20_000


def _number(value):
    return '' if value is None else '{:.12g}'.format(float(value))


def instance_size(instance):
    """(n, m, scenarios) columns of a report row."""
    if isinstance(instance, ScenarioInstance):
        return instance.num_keys, instance.max_rounds, instance.num_scenarios
    if isinstance(instance, WobmInstance):
        return instance.num_offline, instance.num_arrivals, len(instance.support)
    if isinstance(instance, OrderInstance):
        return instance.num_keys, instance.num_chains, 1
    return instance.num_keys, instance.num_rounds, 1


class ReportRows:
    """Accumulates report rows; wall time is recorded only when timing is on, so untimed reports are reproducible."""

    def __init__(self, timing):
        self.timing = timing
        self.rows = []

    def add(self, instance, n, m, scenarios, algo, value, oracle=None, lp=None, started=None):
        ratio = float(value) / float(oracle) if oracle else None
        wall = (time.perf_counter() - started) * 1000 if self.timing and started is not None else None
        self.rows.append({'instance': instance, 'n': n, 'm': m, 'scenarios': scenarios, 'algo': algo,
                          'value': _number(value), 'oracle': _number(oracle), 'lp': _number(lp),
                          'ratio': _number(ratio), 'wall_ms': '' if wall is None else '{:.1f}'.format(wall)})


def scenarios_suite(seed, rows):
    for i in range(SUITE_SIZE):
        instance = random_instance('scenarios', 3, 3, 4, seed=(seed, i))
        name = 'scenarios-{}'.format(i)
        size = instance_size(instance)
        oracle = solve_one_key_mdp(instance).value
        started = time.perf_counter()
        result = approx_solve(instance, seed)
        rows.add(name, *size, 'lp-round', result.expected_value, oracle, result.lp_value, started)
        rows.add(name, *size, 'lp-round-best', result.policy_value, oracle, result.lp_value, started)
        started = time.perf_counter()
        greedy = eval_scenario_policy(result.forest, greedy_policy(result.forest))
        rows.add(name, *size, 'greedy', greedy, oracle, None, started)


def order_suite(seed, rows):
    for i in range(SUITE_SIZE):
        instance = random_instance('order_selection', 4, 5, seed=(seed, i))
        name = 'order-{}'.format(i)
        oracle = brute_force_order_opt(instance).value
        started = time.perf_counter()
        value = best_of_two(instance).value
        rows.add(name, *instance_size(instance), 'best2', value, oracle, None, started)


def wobm_suite(seed, rows):
    for i in range(SUITE_SIZE):
        instance = random_instance('wobm', 2, 3, 3, seed=(seed, i))
        name = 'wobm-{}'.format(i)
        size = instance_size(instance)
        oracle = philosopher_oracle(instance)
        started = time.perf_counter()
        result = solve_wobm(instance, seed, trials=WOBM_TRIALS)
        rows.add(name, *size, 'lp-round', result.expected_value, oracle, result.lp_value, started)
        rows.add(name, *size, 'lp-round-mc', result.estimate.mean, oracle, result.lp_value, started)


def multikey_suite(seed, rows):
    for x in (1, 2, 3):
        instance = exploit_counterexample(x, 1e-3)
        started = time.perf_counter()
        result = solve_multi_key_mdp(instance)
        name = 'counterexample-{}'.format(x)
        rows.add(name, *instance_size(instance), 'exploit', result.exploit_value, result.value, None, started)
    for i in range(SUITE_SIZE):
        instance = random_instance('multi_key', 5, 4, seed=(seed, i))
        started = time.perf_counter()
        result = solve_multi_key_mdp(instance)
        rows.add('multikey-{}'.format(i), *instance_size(instance), 'exploit',
                 result.exploit_value, result.value, None, started)


SUITES = {
    'scenarios': scenarios_suite,
    'order': order_suite,
    'wobm': wobm_suite,
    'multikey': multikey_suite,
}


def run_suite(name, seed, timing=False):
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValidationError('unknown suite {!r}; known: {}'.format(name, ', '.join(sorted(SUITES))))
    rows = ReportRows(timing)
    suite(seed, rows)
    logger.info('suite %s produced %d rows', name, len(rows.rows))
    return rows.rows


def write_csv(rows, stream):
    writer = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator='\n')
    writer.writeheader()
    writer.writerows(rows)
