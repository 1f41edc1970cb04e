import itertools
from fractions import Fraction
from unittest import TestCase

import networkx as nx
import numpy as np

from keychain.exceptions import SizeGuardError
from keychain.gen import (advisor_instance, exploit_counterexample, exploit_first_strategy, exploit_first_value,
                          explore_first_strategy, explore_first_value, min_vertex_cover_size, vertex_cover_gadget)
from keychain.model import (NULL, MultiKeyInstance, Policy, Scenario, ScenarioInstance, build_information_forest,
                            eval_scenario_policy, validate_admissible)
from keychain.oracle import evaluate_multi_key_strategy, solve_multi_key_mdp, solve_one_key_mdp

EPSILON = 1e-3


def graphs_up_to_five_edges():
    """Every graph with one to five edges, no isolated vertices and degree at most 3, up to isomorphism.

    Such a graph is a disjoint union of connected pieces, each with at most six vertices.
    """
    pieces = [g for g in nx.graph_atlas_g()
              if 1 <= g.number_of_edges() <= 5 and nx.is_connected(g)]
    for size in range(1, 6):
        for combination in itertools.combinations_with_replacement(pieces, size):
            if sum(g.number_of_edges() for g in combination) > 5:
                continue
            graph = nx.disjoint_union_all(combination)
            if max(d for _, d in graph.degree) <= 3:
                yield graph


class TestOneKeyOracle(TestCase):

    def test_advisor(self):
        result = solve_one_key_mdp(advisor_instance())
        self.assertEqual(result.value, Fraction(40, 21))
        self.assertGreater(result.states, 0)

    def test_single_key(self):
        result = solve_one_key_mdp(ScenarioInstance(1, (Scenario(((0,), (0,), (0,)), 0, 1),)))
        self.assertEqual(result.value, 3)
        self.assertEqual(result.policy.actions[0], 0)

    def test_two_keys_one_path(self):
        half = Fraction(1, 2)
        instance = ScenarioInstance(2, tuple(Scenario(((0, 1), (0, 1), (0,)), k, half) for k in (0, 1)))
        self.assertEqual(solve_one_key_mdp(instance).value, 2)

    def test_policy_is_admissible_and_attains_value(self):
        instance = advisor_instance()
        result = solve_one_key_mdp(instance)
        forest = build_information_forest(instance)
        self.assertIsNone(validate_admissible(forest, result.policy))
        self.assertEqual(eval_scenario_policy(forest, result.policy), result.value)

    def test_dominates_random_policies(self):
        instance = advisor_instance()
        forest = build_information_forest(instance)
        optimum = solve_one_key_mdp(instance).value
        rng = np.random.default_rng(1)
        for _ in range(300):
            policy = Policy.scenario([int(k) for k in rng.integers(-1, 3, size=forest.num_info_sets)])
            if validate_admissible(forest, policy) is None:
                self.assertLessEqual(eval_scenario_policy(forest, policy), optimum)

    def test_size_guard(self):
        instance = ScenarioInstance(21, (Scenario((tuple(range(21)),), 0, 1),))
        with self.assertRaises(SizeGuardError) as context:
            solve_one_key_mdp(instance)
        self.assertIn('num_keys', context.exception.bounds)


class TestMultiKeyOracle(TestCase):

    def test_single_edge(self):
        result = solve_multi_key_mdp(vertex_cover_gadget(nx.Graph([(0, 1)])))
        self.assertAlmostEqual(result.value, 0.5)

    def test_vertex_cover_identity(self):
        for graph in graphs_up_to_five_edges():
            result = solve_multi_key_mdp(vertex_cover_gadget(graph))
            expected = graph.number_of_edges() - min_vertex_cover_size(graph) / 2
            self.assertAlmostEqual(result.value, expected)

    def test_triangle_and_path(self):
        self.assertAlmostEqual(solve_multi_key_mdp(vertex_cover_gadget(nx.cycle_graph(3))).value, 2.0)
        self.assertAlmostEqual(solve_multi_key_mdp(vertex_cover_gadget(nx.path_graph(3))).value, 1.5)

    def test_counterexample_exploit_value(self):
        result = solve_multi_key_mdp(exploit_counterexample(1, EPSILON))
        self.assertAlmostEqual(result.exploit_value, 2.509, places=9)
        self.assertGreaterEqual(result.value, result.exploit_value - 1e-12)

    def test_exploitation_is_not_optimal(self):
        for x in (3, 5, 8):
            result = solve_multi_key_mdp(exploit_counterexample(x, EPSILON))
            self.assertAlmostEqual(result.exploit_value, exploit_first_value(x, EPSILON), places=9)
            self.assertGreaterEqual(result.value - result.exploit_value, (0.235 * x - 0.49) * EPSILON - 1e-9)
            self.assertEqual(result.first_action, 1)

    def test_strategy_closed_forms(self):
        for x in (1, 2, 3):
            instance = exploit_counterexample(x, EPSILON)
            self.assertAlmostEqual(evaluate_multi_key_strategy(instance, exploit_first_strategy(x)),
                                   exploit_first_value(x, EPSILON), places=9)
            self.assertAlmostEqual(evaluate_multi_key_strategy(instance, explore_first_strategy(x)),
                                   explore_first_value(x, EPSILON), places=9)

    def test_single_pair_matches_scenario_oracle(self):
        instance = MultiKeyInstance(2, ((0, 1), (0, 1), (1,)), MultiKeyInstance.DUELING, (Fraction(1, 3),))
        result = solve_multi_key_mdp(instance)
        self.assertAlmostEqual(result.value, 7 / 3)
        self.assertEqual(result.first_action, 1)
        self.assertAlmostEqual(result.value, float(solve_one_key_mdp(instance.to_scenarios()).value))

    def test_off_chain_choice_earns_nothing(self):
        instance = MultiKeyInstance(2, ((0,), (1,)), MultiKeyInstance.INDEPENDENT, (1.0, 1.0))
        self.assertEqual(evaluate_multi_key_strategy(instance, lambda t, correct, incorrect, chain: 1), 1.0)
        self.assertEqual(evaluate_multi_key_strategy(instance, lambda t, correct, incorrect, chain: NULL), 0.0)

    def test_size_guard(self):
        chain = tuple(range(17))
        instance = MultiKeyInstance(17, (chain, chain), MultiKeyInstance.INDEPENDENT, (0.5,) * 17)
        with self.assertRaises(SizeGuardError):
            solve_multi_key_mdp(instance)

    def test_guard_counts_live_keys_only(self):
        chains = tuple(tuple(range(4 * t, 4 * t + 4)) for t in range(10))
        instance = MultiKeyInstance(40, chains, MultiKeyInstance.INDEPENDENT, (0.5,) * 40)
        self.assertAlmostEqual(solve_multi_key_mdp(instance).value, 10 * 0.5)
