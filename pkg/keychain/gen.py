"""Instance generators: worked examples, hardness gadgets and seeded random families."""
import itertools
import logging
from fractions import Fraction

import networkx as nx
import numpy as np

from .exceptions import ValidationError
from .model import NULL, KnownOrderInstance, MultiKeyInstance, Scenario, ScenarioInstance
from .obm import WeightProfile, WobmInstance
from .order import OrderInstance

logger = logging.getLogger(__name__)

ALICE, BOB, CAROL = 0, 1, 2
MAX_FORMULA_ATTEMPTS = 10_000


def advisor_instance(exact=True) -> ScenarioInstance:
    """Three advisors over three rotations; Alice skips the second rotation with probability 2/3.

    Scenarios are (good fit, Alice on sabbatical?) in the order
    (Alice, yes), (Alice, no), (Bob, yes), (Bob, no), (Carol, yes), (Carol, no).
    """
    fit = {ALICE: Fraction(3, 7), BOB: Fraction(2, 7), CAROL: Fraction(2, 7)}
    away = Fraction(2, 3)
    everyone = (ALICE, BOB, CAROL)
    scenarios = []
    for key in everyone:
        for sabbatical, p in ((True, away), (False, 1 - away)):
            second = (BOB, CAROL) if sabbatical else everyone
            prob = fit[key] * p
            scenarios.append(Scenario((everyone, second, everyone), key, prob if exact else float(prob)))
    return ScenarioInstance(3, tuple(scenarios))


def exploit_counterexample(x, epsilon) -> MultiKeyInstance:
    """Independent keys where replaying a known-correct key is not optimal.

    Key 0 always opens, key 1 opens with probability 1 - epsilon, and pair
    i adds keys a_i = 2 + 3i, b_i = 3 + 3i, c_i = 4 + 3i with probabilities
    0.51, 0.5 and 0.51. Chains: {0, 1}, then every {a_i, b_i}, then every
    {1, b_i, c_i}.
    """
    if isinstance(x, bool) or not isinstance(x, int) or x < 1:
        raise ValidationError('x must be a positive integer, got {!r}'.format(x))
    if not 0 < epsilon <= 1e-3:
        raise ValidationError('epsilon must lie in (0, 1/1000], got {}'.format(epsilon))
    probs = [1.0, 1.0 - epsilon] + [0.51, 0.5, 0.51] * x
    chains = [(0, 1)]
    chains += [(2 + 3 * i, 3 + 3 * i) for i in range(x)]
    chains += [(1, 3 + 3 * i, 4 + 3 * i) for i in range(x)]
    return MultiKeyInstance(2 + 3 * x, tuple(chains), MultiKeyInstance.INDEPENDENT, tuple(probs))


def _first_untested(chain, correct, incorrect, priority):
    known = [k for k in chain if k in correct]
    if known:
        return known[0]
    for k in priority:
        if k in chain and k not in incorrect:
            return k
    return NULL


def exploit_first_strategy(x):
    """Key 0 first, then every a_i; key 1 is tried on its first chain, then c_i."""
    a = [2 + 3 * i for i in range(x)]
    b = [3 + 3 * i for i in range(x)]
    c = [4 + 3 * i for i in range(x)]
    priority = [0] + a + [1] + c + b

    def choose(t, correct, incorrect, chain):
        return _first_untested(chain, correct, incorrect, priority)

    return choose


def explore_first_strategy(x):
    """Key 1 first; b_i is explored only when key 1 failed."""
    a = [2 + 3 * i for i in range(x)]
    b = [3 + 3 * i for i in range(x)]
    c = [4 + 3 * i for i in range(x)]

    def choose(t, correct, incorrect, chain):
        if 1 in chain and 1 not in correct and 1 not in incorrect:
            return 1
        priority = a + c + b if 1 in correct else b + c + a
        return _first_untested(chain, correct, incorrect, priority)

    return choose


def exploit_first_value(x, epsilon):
    return 1 - 0.51 * epsilon + (1.51 - 0.49 * epsilon) * x


def explore_first_value(x, epsilon):
    return 1 - epsilon + (1.51 - 0.255 * epsilon) * x


def vertex_cover_gadget(graph: nx.Graph) -> MultiKeyInstance:
    """Dueling pairs per vertex (keys 2i and 2i + 1 for the i-th vertex in sorted order), one chain per edge."""
    if graph.is_multigraph() or graph.is_directed():
        raise ValidationError('graph: expected a simple undirected graph')
    loops = list(nx.selfloop_edges(graph))
    if loops:
        raise ValidationError('graph: self loop at vertex {!r}'.format(loops[0][0]))
    for node, degree in sorted(graph.degree, key=lambda item: str(item[0])):
        if degree > 3:
            raise ValidationError('graph: vertex {!r} has degree {} > 3'.format(node, degree))
    if graph.number_of_edges() == 0:
        raise ValidationError('graph: at least one edge is required')
    index = {node: i for i, node in enumerate(sorted(graph.nodes))}
    edges = sorted(tuple(sorted((index[u], index[v]))) for u, v in graph.edges)
    chains = tuple((2 * i, 2 * i + 1, 2 * j, 2 * j + 1) for i, j in edges)
    return MultiKeyInstance(2 * len(index), chains, MultiKeyInstance.DUELING, (Fraction(1, 2),) * len(index))


def min_vertex_cover_size(graph: nx.Graph) -> int:
    """Exact, by enumerating vertex subsets in increasing size."""
    nodes = sorted(graph.nodes)
    for size in range(len(nodes) + 1):
        for cover in itertools.combinations(nodes, size):
            chosen = set(cover)
            if all(u in chosen or v in chosen for u, v in graph.edges):
                return size
    return len(nodes)


def literal_key(literal):
    """x_t (literal t) is key 2(t - 1) and not x_t (literal -t) is key 2(t - 1) + 1."""
    return 2 * (abs(literal) - 1) + (literal < 0)


def check_formula(clauses, num_vars):
    """Every clause has three distinct literals and every literal occurs exactly twice."""
    counts = {literal: 0 for t in range(1, num_vars + 1) for literal in (t, -t)}
    for c, clause in enumerate(clauses):
        if len(clause) != 3 or len(set(clause)) != 3:
            raise ValidationError('clause {}: expected three distinct literals, got {}'.format(c, list(clause)))
        for literal in clause:
            if literal not in counts:
                raise ValidationError('clause {}: literal {} is out of range'.format(c, literal))
            counts[literal] += 1
    for literal, count in sorted(counts.items(), key=lambda item: (abs(item[0]), item[0] < 0)):
        if count != 2:
            raise ValidationError('literal {} occurs {} times, expected exactly 2'.format(literal, count))


def threesat_gadget(clauses, num_vars) -> ScenarioInstance:
    """One scenario per (clause, literal of the clause), uniform prior.

    Every scenario sees the chains {x_t, not x_t} for t = 1..n and then the
    clause's literals; the correct key is the scenario's literal.
    """
    check_formula(clauses, num_vars)
    variables = tuple((literal_key(t), literal_key(-t)) for t in range(1, num_vars + 1))
    prob = Fraction(1, 3 * len(clauses))
    scenarios = tuple(Scenario(variables + (tuple(literal_key(lit) for lit in clause),), literal_key(literal), prob)
                      for clause in clauses for literal in clause)
    return ScenarioInstance(2 * num_vars, scenarios)


def satisfied_clauses(clauses, assignment):
    """``assignment[t - 1]`` is the truth value of x_t."""
    return sum(any((lit > 0) == assignment[abs(lit) - 1] for lit in clause) for clause in clauses)


def policy_assignment(forest, policy, num_vars):
    """Truth assignment of a gadget policy: the literal tested on {x_t, not x_t} is made false."""
    assignment = []
    path = forest.paths[0]
    for t in range(num_vars):
        key = policy[path[t]]
        assignment.append(key == literal_key(-(t + 1)))
    return assignment


def random_formula(num_vars, rng):
    """Shuffles the literal occurrences into clauses, rejecting clauses that repeat a variable."""
    if num_vars < 3 or num_vars % 3:
        raise ValidationError('num_vars must be a positive multiple of 3, got {}'.format(num_vars))
    slots = np.array([literal for t in range(1, num_vars + 1) for literal in (t, t, -t, -t)])
    for _ in range(MAX_FORMULA_ATTEMPTS):
        clauses = [tuple(int(v) for v in c) for c in rng.permutation(slots).reshape(-1, 3)]
        if all(len({abs(lit) for lit in clause}) == 3 for clause in clauses):
            return clauses
    raise ValidationError('no balanced formula found in {} attempts'.format(MAX_FORMULA_ATTEMPTS))


def _random_chain(rng, n):
    size = int(rng.integers(1, n + 1))
    return tuple(sorted(int(k) for k in rng.choice(n, size=size, replace=False)))


def random_instance(kind, n, m, scenarios=1, seed=0):
    """Seeded instance of the given kind with n keys (offline nodes), m rounds (arrivals) and a support size.

    Scenario and weight supports draw each round from a pool of two
    alternatives, so prefixes are shared and the forests branch.
    """
    if min(n, m, scenarios) < 1:
        raise ValidationError('n, m and scenarios must be positive')
    rng = np.random.default_rng(seed)
    if kind in ('known_order', 'order_selection'):
        chains = tuple(_random_chain(rng, n) for _ in range(m))
        prior = tuple(float(p) for p in rng.dirichlet(np.ones(n)))
        return (KnownOrderInstance if kind == 'known_order' else OrderInstance)(n, chains, prior)
    if kind == 'multi_key':
        chains = tuple(_random_chain(rng, n) for _ in range(m))
        return MultiKeyInstance(n, chains, MultiKeyInstance.INDEPENDENT,
                                tuple(float(p) for p in rng.uniform(0, 1, n)))
    probs = [float(p) for p in rng.dirichlet(np.ones(scenarios))]
    if kind == 'scenarios':
        pool = [[_random_chain(rng, n) for _ in range(2)] for _ in range(m)]
        items = []
        for s in range(scenarios):
            chains = tuple(pool[t][int(rng.integers(2))] for t in range(m))
            on_chains = sorted(set().union(*chains))
            items.append(Scenario(chains, int(rng.choice(on_chains)), probs[s]))
        return ScenarioInstance(n, tuple(items))
    if kind == 'wobm':
        pool = [rng.integers(0, 10, size=(2, n)).astype(float) for _ in range(m)]
        capacities = tuple(int(b) for b in rng.integers(1, 3, size=n))
        support = []
        for s in range(scenarios):
            columns = [pool[t][int(rng.integers(2))] for t in range(m)]
            support.append(WeightProfile(np.column_stack(columns).tolist(), probs[s]))
        return WobmInstance(capacities, tuple(support))
    raise ValidationError('unknown instance kind {!r}'.format(kind))
