import argparse
import logging
import os
import sys
from collections import Counter

import networkx as nx
import numpy as np

from . import PACKAGE_VERSION
from .adversarial import PolicyCatalog, PriorSet, exact_minimax, ftrl_solve
from .assignment import solve_known_order
from .bench import SUITES, ReportRows, instance_size, run_suite, write_csv
from .exceptions import ValidationError
from .flusher import CommandGuard
from .gen import (advisor_instance, exploit_counterexample, random_formula, random_instance, threesat_gadget,
                  vertex_cover_gadget)
from .handler import ExtraFieldsLogFilter, JsonLogHandler
from .logger import get_logger
from .model import (KnownOrderInstance, MultiKeyInstance, Policy, ScenarioInstance, build_information_forest,
                    embed_known_order, eval_known_order_policy, eval_scenario_policy, simulate)
from .obm import DEFAULT_TRIALS, philosopher_oracle, solve_wobm
from .oracle import solve_multi_key_mdp, solve_one_key_mdp
from .order import OrderInstance, best_of_two, brute_force_order_opt, eval_order_policy, utmp_gadget
from .sampling import HttpScenarioSampler, PriorSampler
from .scenarios import ROUNDING_REPETITIONS, approx_solve, greedy_policy, sample_based_solve
from .schema import (dumps, instance_kind, instance_to_document, load_instance, order_policy_from_document,
                     order_policy_to_document, policy_from_document, policy_to_document, read_document, save_instance,
                     write_document)

SEED_ENVIRONMENT_VARIABLE = 'KEYCHAIN_SEED'
KIND_ALIASES = {'order': 'order_selection'}
ALGORITHMS = {
    'known_order': ('exact',),
    'scenarios': ('lp-round', 'greedy', 'oracle', 'sample'),
    'multi_key': ('oracle', 'exploit'),
    'order_selection': ('best2', 'brute'),
    'wobm': ('lp-round',),
}
GENERATORS = ('advisor', 'counterexample', 'vertex-cover', 'threesat', 'utmp', 'random')


def resolve_seed(seed):
    """The --seed flag wins over KEYCHAIN_SEED, which wins over 0."""
    if seed is None:
        raw = os.environ.get(SEED_ENVIRONMENT_VARIABLE, '0')
        try:
            seed = int(raw)
        except ValueError:
            raise ValidationError('{}: expected an integer seed, got {!r}'.format(SEED_ENVIRONMENT_VARIABLE, raw))
    if seed < 0:
        raise ValidationError('seed must be nonnegative, got {}'.format(seed))
    return seed


def configure_logging(logger, log_json, extra):
    for handler in [h for h in logger.handlers if getattr(h, 'keychain_cli', False)]:
        logger.removeHandler(handler)
    if log_json:
        handler = JsonLogHandler()
        handler.addFilter(ExtraFieldsLogFilter(extra))
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    handler.keychain_cli = True
    logger.addHandler(handler)


def _emit(document, out):
    if out:
        write_document(document, out)
    else:
        sys.stdout.write(dumps(document))


def _report(args, **fields):
    fields.update(seed=args.seed, version=PACKAGE_VERSION)
    return fields


def _loaded(args, expected=None):
    loaded = load_instance(args.input)
    kind = instance_kind(loaded.instance)
    if expected is not None and kind != expected:
        raise ValidationError('{}: expected a {} instance, got {}'.format(args.input, expected, kind))
    return loaded, kind


def _oracle_value(instance):
    if isinstance(instance, ScenarioInstance):
        return solve_one_key_mdp(instance).value
    if isinstance(instance, KnownOrderInstance):
        return solve_one_key_mdp(embed_known_order(instance)).value
    if isinstance(instance, MultiKeyInstance):
        return solve_multi_key_mdp(instance).value
    if isinstance(instance, OrderInstance):
        return brute_force_order_opt(instance).value
    return philosopher_oracle(instance)


def _simulated(instance, policy, args):
    if not args.trials:
        return None
    result = simulate(instance, policy, args.seed, args.trials)
    return {'mean': result.mean, 'stderr': result.stderr, 'trials': args.trials}


def _solve_scenarios(instance, args):
    forest = build_information_forest(instance)
    if args.algo == 'lp-round':
        result = approx_solve(instance, args.seed, args.repetitions, args.backend)
        fields = {'value': result.policy_value, 'lp_value': result.lp_value, 'expected_value': result.expected_value}
        policy = result.policy
    elif args.algo == 'greedy':
        policy = greedy_policy(forest)
        fields = {'value': eval_scenario_policy(forest, policy)}
    elif args.algo == 'oracle':
        result = solve_one_key_mdp(instance)
        policy = result.policy
        fields = {'value': result.value, 'states': result.states}
    else:
        if args.sampler_url:
            sampler = HttpScenarioSampler(args.sampler_url, instance.num_keys)
        else:
            sampler = PriorSampler(instance)
        result = sample_based_solve(sampler, forest, args.epsilon, args.delta, args.seed, args.repetitions,
                                    args.backend)
        policy = result.policy
        fields = {'value': result.value, 'lp_value': result.lp_value, 'estimated_value': result.estimated_value,
                  'samples': result.estimate.samples}
    fields['policy'] = policy_to_document(policy, forest)
    fields['simulated'] = _simulated(instance, policy, args)
    return fields


def _solve(instance, kind, args):
    if kind == 'known_order':
        value, policy = solve_known_order(instance)
        return {'value': value, 'policy': policy_to_document(policy),
                'simulated': _simulated(instance, policy, args)}
    if kind == 'scenarios':
        return _solve_scenarios(instance, args)
    if kind == 'multi_key':
        result = solve_multi_key_mdp(instance)
        if args.algo == 'exploit':
            return {'value': result.exploit_value}
        return {'value': result.value, 'first_action': result.first_action, 'exploit_value': result.exploit_value,
                'states': result.states}
    if kind == 'order_selection':
        result = best_of_two(instance) if args.algo == 'best2' else brute_force_order_opt(instance)
        return {'value': result.value, 'policy': order_policy_to_document(result.policy)}
    result = solve_wobm(instance, args.seed, args.trials or DEFAULT_TRIALS, args.backend)
    return {'value': result.expected_value, 'lp_value': result.lp_value,
            'simulated': {'mean': result.estimate.mean, 'stderr': result.estimate.stderr,
                          'trials': args.trials or DEFAULT_TRIALS},
            'marginal_deviation': result.marginal_deviation}


def cmd_solve(args):
    kind = KIND_ALIASES.get(args.kind, args.kind)
    algo = args.algo or ALGORITHMS[kind][0]
    if algo not in ALGORITHMS[kind]:
        raise ValidationError('--algo {} does not apply to {} instances; choose from {}'.format(
            algo, kind, ', '.join(ALGORITHMS[kind])))
    args.algo = algo
    loaded, _ = _loaded(args, kind)
    fields = _solve(loaded.instance, kind, args)
    if args.oracle and 'oracle_value' not in fields:
        fields['oracle_value'] = fields['value'] if algo == 'oracle' else _oracle_value(loaded.instance)
    logging.getLogger(__name__).info('%s/%s on %s: value %s', kind, algo, args.input, fields['value'])
    report = _report(args, kind='result', instance_kind=kind, algo=algo, instance=args.input,
                     merged_duplicates=loaded.merged_duplicates, **fields)
    _emit(report, args.out)
    if args.csv:
        rows = ReportRows(timing=False)
        rows.add(os.path.basename(args.input), *instance_size(loaded.instance), algo, fields['value'],
                 fields.get('oracle_value'), fields.get('lp_value'))
        with open(args.csv, 'w', encoding='utf-8', newline='') as f:
            write_csv(rows.rows, f)


def cmd_eval(args):
    loaded, kind = _loaded(args)
    instance = loaded.instance
    document = read_document(args.policy)
    if isinstance(document, dict) and document.get('kind') == 'result' and 'policy' in document:
        document = document['policy']
    if isinstance(document, dict) and document.get('kind') == 'order_policy':
        if kind != 'order_selection':
            raise ValidationError('an order policy needs an order_selection instance, got {}'.format(kind))
        value = eval_order_policy(instance, order_policy_from_document(document))
        simulated = None
    elif kind == 'known_order':
        policy = policy_from_document(document)
        if policy.kind != Policy.KNOWN_ORDER:
            raise ValidationError('a known_order instance needs a known_order policy')
        value = eval_known_order_policy(instance, policy)
        simulated = _simulated(instance, policy, args)
    elif kind == 'scenarios':
        forest = build_information_forest(instance)
        policy = policy_from_document(document, forest)
        value = eval_scenario_policy(forest, policy)
        simulated = _simulated(instance, policy, args)
    else:
        raise ValidationError('{} instances have no policy files to evaluate'.format(kind))
    logging.getLogger(__name__).info('policy %s on %s: value %s', args.policy, args.input, value)
    _emit(_report(args, kind='evaluation', instance=args.input, policy=args.policy, value=value,
                  simulated=simulated), args.out)


def cmd_oracle(args):
    loaded, kind = _loaded(args)
    instance = loaded.instance
    fields = {}
    if kind in ('scenarios', 'known_order'):
        scenarios = instance if kind == 'scenarios' else embed_known_order(instance)
        result = solve_one_key_mdp(scenarios)
        fields.update(value=result.value, states=result.states,
                      policy=policy_to_document(result.policy, build_information_forest(scenarios)))
    elif kind == 'multi_key':
        result = solve_multi_key_mdp(instance)
        fields.update(value=result.value, first_action=result.first_action, exploit_value=result.exploit_value,
                      states=result.states)
    elif kind == 'order_selection':
        result = brute_force_order_opt(instance)
        fields.update(value=result.value, policy=order_policy_to_document(result.policy))
    else:
        fields['value'] = philosopher_oracle(instance)
    _emit(_report(args, kind='oracle', instance_kind=kind, instance=args.input, **fields), args.out)


def _parse_edges(text):
    graph = nx.Graph()
    for item in filter(None, (part.strip() for part in text.split(','))):
        try:
            u, v = (int(end) for end in item.split('-'))
        except ValueError:
            raise ValidationError('--edges: expected "u-v" pairs, got {!r}'.format(item))
        graph.add_edge(u, v)
    return graph


def _generate(args):
    family = args.family
    if family == 'advisor':
        return advisor_instance(exact=not args.floats)
    if family == 'counterexample':
        return exploit_counterexample(args.x, args.epsilon)
    if family == 'vertex-cover':
        if not args.edges:
            raise ValidationError('vertex-cover needs --edges')
        return vertex_cover_gadget(_parse_edges(args.edges))
    if family == 'threesat':
        clauses = random_formula(args.vars, np.random.default_rng(args.seed))
        logging.getLogger(__name__).info('formula: %s', clauses)
        return threesat_gadget(clauses, args.vars)
    if family == 'utmp':
        if not args.matrix:
            raise ValidationError('utmp needs --matrix')
        document = read_document(args.matrix)
        matrix = document.get('matrix') if isinstance(document, dict) else document
        if not isinstance(matrix, list):
            raise ValidationError("{}: expected a matrix or an object with field 'matrix'".format(args.matrix))
        return utmp_gadget(matrix)
    return random_instance(KIND_ALIASES.get(args.kind, args.kind), args.n, args.m, args.scenarios, args.seed)


def cmd_gen(args):
    instance = _generate(args)
    if args.out:
        save_instance(instance, args.out)
    else:
        sys.stdout.write(dumps(instance_to_document(instance)))


def cmd_bench(args):
    rows = run_suite(args.suite, args.seed, args.timing)
    if args.out:
        with open(args.out, 'w', encoding='utf-8', newline='') as f:
            write_csv(rows, f)
    else:
        write_csv(rows, sys.stdout)


def _prior_set(instance, path):
    document = read_document(path)
    if not isinstance(document, dict):
        raise ValidationError('{}: expected an object'.format(path))
    if 'a' in document:
        return PriorSet(instance, document['a'], document.get('b', []))
    size = instance.num_scenarios
    return PriorSet.with_box(instance, document.get('lower', [0.0] * size), document.get('upper', [1.0] * size))


def cmd_adv(args):
    loaded, _ = _loaded(args, 'scenarios')
    instance = loaded.instance
    prior_set = _prior_set(instance, args.constraints)
    result = ftrl_solve(instance, prior_set, args.epsilon, args.algo, args.seed)
    counts = Counter(result.mixture.policies)
    forest = result.mixture.forest
    mixture = [{'weight': count / result.rounds, 'policy': policy_to_document(policy, forest)}
               for policy, count in sorted(counts.items(), key=lambda item: (-item[1], item[0].actions))]
    fields = {'worst_case_value': result.worst_case_value, 'worst_case_prior': result.worst_case_prior,
              'rounds': result.rounds, 'eta': result.eta, 'regret': result.regret,
              'regret_bound': result.regret_bound, 'mixture': mixture}
    if args.exact:
        fields['minimax_value'], _ = exact_minimax(PolicyCatalog(forest), prior_set)
    _emit(_report(args, kind='adversarial', instance=args.input, algo=args.algo, **fields), args.out)


def build_parser():
    parser = argparse.ArgumentParser(prog='keychain', description='Keychain Problem solvers')
    parser.add_argument('--debug', action='store_true', help='log at DEBUG level')
    parser.add_argument('--log-json', action='store_true', help='write log records as JSON lines')
    parser.add_argument('--seed', type=int, default=None,
                        help='random seed (default: ${} or 0)'.format(SEED_ENVIRONMENT_VARIABLE))
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help='solve an instance')
    solve.add_argument('--kind', required=True, choices=sorted(set(ALGORITHMS) | set(KIND_ALIASES)))
    solve.add_argument('--algo', help='algorithm; the first listed for the kind by default')
    solve.add_argument('--in', dest='input', required=True)
    solve.add_argument('--out')
    solve.add_argument('--csv', help='also write a one-row CSV report')
    solve.add_argument('--trials', type=int, default=0, help='Monte Carlo trials for the simulated value')
    solve.add_argument('--repetitions', type=int, default=ROUNDING_REPETITIONS)
    solve.add_argument('--oracle', action='store_true', help='also compute the exact optimum')
    solve.add_argument('--backend', default='simplex', help='LP backend: simplex or scipy')
    solve.add_argument('--epsilon', type=float, default=0.1)
    solve.add_argument('--delta', type=float, default=0.1)
    solve.add_argument('--sampler-url', help='draw scenarios from this endpoint instead of the prior')
    solve.set_defaults(handler=cmd_solve)

    evaluate = commands.add_parser('eval', help='evaluate a policy file against an instance')
    evaluate.add_argument('--in', dest='input', required=True)
    evaluate.add_argument('--policy', required=True)
    evaluate.add_argument('--trials', type=int, default=0)
    evaluate.add_argument('--out')
    evaluate.set_defaults(handler=cmd_eval)

    oracle = commands.add_parser('oracle', help='exact optimum by dynamic programming or search')
    oracle.add_argument('--in', dest='input', required=True)
    oracle.add_argument('--out')
    oracle.set_defaults(handler=cmd_oracle)

    gen = commands.add_parser('gen', help='write a generated instance')
    gen.add_argument('family', choices=GENERATORS)
    gen.add_argument('--out')
    gen.add_argument('--floats', action='store_true', help='advisor: float probabilities')
    gen.add_argument('--x', type=int, default=1, help='counterexample: number of gadget pairs')
    gen.add_argument('--epsilon', type=float, default=1e-3)
    gen.add_argument('--edges', help='vertex-cover: comma separated u-v pairs')
    gen.add_argument('--vars', type=int, default=3, help='threesat: number of variables')
    gen.add_argument('--matrix', help='utmp: JSON file with a 0/1 matrix')
    gen.add_argument('--kind', default='scenarios', choices=sorted(set(ALGORITHMS) | set(KIND_ALIASES)))
    gen.add_argument('--n', type=int, default=3)
    gen.add_argument('--m', type=int, default=3)
    gen.add_argument('--scenarios', type=int, default=2)
    gen.set_defaults(handler=cmd_gen)

    bench = commands.add_parser('bench', help='run a benchmark suite into a CSV table')
    bench.add_argument('suite', choices=sorted(SUITES))
    bench.add_argument('--out')
    bench.add_argument('--timing', action='store_true', help='fill the wall_ms column')
    bench.set_defaults(handler=cmd_bench)

    adv = commands.add_parser('adv', help='robust mixed policy against a set of priors')
    adv.add_argument('--in', dest='input', required=True)
    adv.add_argument('--constraints', required=True, help='JSON with lower/upper bounds or rows a, b')
    adv.add_argument('--epsilon', type=float, required=True)
    adv.add_argument('--algo', default='oracle', choices=('oracle', 'lp-round', 'catalog'))
    adv.add_argument('--exact', action='store_true', help='also solve the minimax exactly over all policies')
    adv.add_argument('--out')
    adv.set_defaults(handler=cmd_adv)
    return parser


def _run(args, logger):
    extra = {'seed': args.seed, 'version': PACKAGE_VERSION, 'command': args.command}
    configure_logging(logger, args.log_json, extra)
    args.seed = extra['seed'] = resolve_seed(args.seed)
    return args.handler(args)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger = get_logger(args.debug)
    return CommandGuard(logger)(_run)(args, logger)


if __name__ == '__main__':
    sys.exit(main())
