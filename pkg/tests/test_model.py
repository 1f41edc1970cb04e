from fractions import Fraction
from unittest import TestCase

import numpy as np

from keychain.exceptions import AdmissibilityError, ValidationError
from keychain.gen import advisor_instance
from keychain.model import (NULL, TRIAL_BLOCK_SIZE, KnownOrderInstance, MultiKeyInstance, Policy, Scenario,
                            ScenarioInstance, build_information_forest, embed_known_order, eval_known_order_policy,
                            eval_scenario_policy, simulate, trial_blocks, validate_admissible)
from keychain.oracle import solve_one_key_mdp

HALF = Fraction(1, 2)


def two_key_instance():
    return KnownOrderInstance(2, ((0, 1), (0, 1), (0,)), (HALF, HALF))


class TestInstances(TestCase):

    def test_chains_are_canonical(self):
        instance = KnownOrderInstance(3, ([2, 0], (1,)), (0.2, 0.3, 0.5))
        self.assertEqual(instance.chains, ((0, 2), (1,)))

    def test_rejects_key_out_of_range(self):
        with self.assertRaisesRegex(ValidationError, r'chains\[0\]'):
            KnownOrderInstance(2, ((0, 2),), (0.5, 0.5))

    def test_rejects_empty_chain(self):
        with self.assertRaises(ValidationError):
            KnownOrderInstance(2, ((),), (0.5, 0.5))

    def test_rejects_prior_not_summing_to_one(self):
        with self.assertRaisesRegex(ValidationError, 'prior'):
            KnownOrderInstance(2, ((0, 1),), (0.5, 0.6))

    def test_rejects_negative_probability(self):
        with self.assertRaisesRegex(ValidationError, 'nonnegative'):
            ScenarioInstance(2, (Scenario(((0,),), 0, 1.5), Scenario(((1,),), 1, -0.5)))

    def test_rejects_bad_correct_key(self):
        with self.assertRaisesRegex(ValidationError, 'correct_key'):
            ScenarioInstance(2, (Scenario(((0,),), 5, 1.0),))

    def test_reward_table_is_exact(self):
        table = two_key_instance().reward_table()
        self.assertEqual(table[0], [Fraction(3, 2), 1, HALF])
        self.assertEqual(table[1], [1, HALF, 0])

    def test_merge_duplicates(self):
        instance = ScenarioInstance(2, (Scenario(((0, 1),), 0, Fraction(1, 4)),
                                        Scenario(((0, 1),), 0, Fraction(1, 4)),
                                        Scenario(((0, 1),), 1, HALF)))
        merged, count = instance.merge_duplicates()
        self.assertEqual(count, 1)
        self.assertEqual(merged.probabilities(), (HALF, HALF))

    def test_merge_duplicates_without_duplicates(self):
        instance = advisor_instance()
        merged, count = instance.merge_duplicates()
        self.assertEqual(count, 0)
        self.assertIs(merged, instance)

    def test_single_dueling_pair_converts_to_scenarios(self):
        instance = MultiKeyInstance(2, ((0, 1), (1,)), MultiKeyInstance.DUELING, (Fraction(1, 3),))
        scenarios = instance.to_scenarios()
        self.assertEqual([sc.correct_key for sc in scenarios.scenarios], [0, 1])
        self.assertEqual(scenarios.probabilities(), (Fraction(1, 3), Fraction(2, 3)))

    def test_multi_key_rejects_odd_dueling(self):
        with self.assertRaisesRegex(ValidationError, 'even'):
            MultiKeyInstance(3, ((0, 1),), MultiKeyInstance.DUELING, (0.5,))


class TestInformationForest(TestCase):

    def test_advisor_forest(self):
        forest = build_information_forest(advisor_instance())
        self.assertEqual(forest.num_info_sets, 5)
        self.assertEqual(forest.roots, (0,))
        self.assertEqual(forest.probs[0], 1)
        self.assertEqual(forest.probs[1], Fraction(2, 3))
        self.assertEqual(forest.probs[2], Fraction(1, 3))
        self.assertEqual(forest.children[0], (1, 2))
        self.assertEqual(forest.chain(1), (1, 2))

    def test_single_scenario_rewards(self):
        forest = build_information_forest(ScenarioInstance(2, (Scenario(((1,), (1,)), 1, 1),)))
        self.assertEqual(forest.num_info_sets, 2)
        self.assertEqual(forest.reward(1, 0), 2)
        self.assertEqual(forest.reward(1, 1), 1)
        self.assertEqual(forest.reward(0, 0), 0)

    def test_shared_prefix_splits_mass(self):
        forest = build_information_forest(ScenarioInstance(2, (Scenario(((0, 1),), 0, 0.5),
                                                               Scenario(((0, 1),), 1, 0.5))))
        self.assertEqual(forest.num_info_sets, 1)
        self.assertAlmostEqual(forest.reward(0, 0), 0.5)
        self.assertAlmostEqual(forest.reward(1, 0), 0.5)

    def test_consistency_sets_are_laminar(self):
        forest = build_information_forest(advisor_instance())
        sets = [set(c) for c in forest.consistent]
        for a in sets:
            for b in sets:
                self.assertIn(a & b, [set(), a, b])

    def test_path_matrix_pads_short_paths(self):
        instance = ScenarioInstance(2, (Scenario(((0,),), 0, 0.5), Scenario(((0,), (1,)), 1, 0.5)))
        forest = build_information_forest(instance)
        np.testing.assert_array_equal(forest.path_matrix(), [[0, -1], [0, 1]])

    def test_path_of_unknown_prefix(self):
        forest = build_information_forest(advisor_instance())
        with self.assertRaises(KeyError):
            forest.path_of(((0,),))


class TestEvaluation(TestCase):

    def test_known_order_values(self):
        instance = two_key_instance()
        self.assertEqual(eval_known_order_policy(instance, Policy.known_order([0, 1, None])), 2)
        self.assertEqual(eval_known_order_policy(instance, Policy.known_order([1, 0, None])), 2)
        self.assertEqual(eval_known_order_policy(instance, Policy.null(Policy.KNOWN_ORDER, 3)), 0)

    def test_known_order_rejects_repeated_key(self):
        with self.assertRaises(AdmissibilityError) as context:
            eval_known_order_policy(two_key_instance(), Policy.known_order([0, 0, None]))
        self.assertEqual(context.exception.key, 0)

    def test_known_order_rejects_wrong_length(self):
        with self.assertRaisesRegex(ValidationError, 'actions'):
            eval_known_order_policy(two_key_instance(), Policy.known_order([0, 1]))

    def test_advisor_values(self):
        forest = build_information_forest(advisor_instance())
        self.assertEqual(eval_scenario_policy(forest, Policy.null(Policy.SCENARIO, 5)), 0)
        self.assertEqual(eval_scenario_policy(forest, solve_one_key_mdp(advisor_instance()).policy),
                         Fraction(40, 21))

    def test_embedding_preserves_value(self):
        instance = two_key_instance()
        policy = Policy.known_order([1, 0, None])
        forest = build_information_forest(embed_known_order(instance))
        self.assertEqual(forest.num_info_sets, 3)
        self.assertEqual(eval_scenario_policy(forest, policy.as_scenario_policy()),
                         eval_known_order_policy(instance, policy))

    def test_policy_rejects_bad_action(self):
        with self.assertRaises(ValidationError):
            Policy.scenario([0, -2])
        with self.assertRaises(ValidationError):
            Policy.scenario([True])


class TestAdmissibility(TestCase):

    def setUp(self):
        self.forest = build_information_forest(advisor_instance())

    def test_injective_policy(self):
        self.assertIsNone(validate_admissible(self.forest, Policy.scenario([0, 1, 1, 2, 2])))

    def test_repeat_on_one_path(self):
        violation = validate_admissible(self.forest, Policy.scenario([0, NULL, NULL, 0, NULL]))
        self.assertEqual(violation.scenario, 0)
        self.assertEqual(violation.key, 0)
        self.assertEqual(violation.info_sets, (0, 3))
        self.assertIn('info sets 0 and 3', violation.describe())

    def test_repeat_on_disjoint_paths(self):
        self.assertIsNone(validate_admissible(self.forest, Policy.scenario([NULL, NULL, NULL, 0, 0])))

    def test_evaluation_raises_on_violation(self):
        with self.assertRaises(AdmissibilityError) as context:
            eval_scenario_policy(self.forest, Policy.scenario([1, 1, NULL, NULL, NULL]))
        self.assertEqual(context.exception.info_sets, (0, 1))


class TestSimulation(TestCase):

    def test_deterministic_instance(self):
        instance = ScenarioInstance(2, (Scenario(((0, 1), (0,)), 0, 1.0),))
        result = simulate(instance, Policy.scenario([0, NULL]), seed=3, trials=50)
        self.assertTrue(np.all(result.rewards == 2))
        self.assertEqual(result.stderr, 0.0)

    def test_null_policy_traces(self):
        result = simulate(advisor_instance(), Policy.null(Policy.SCENARIO, 5), seed=0, trials=1000)
        self.assertFalse(result.traces.any())

    def test_mean_approaches_value(self):
        instance = advisor_instance()
        policy = solve_one_key_mdp(instance).policy
        result = simulate(instance, policy, seed=7, trials=100_000)
        self.assertAlmostEqual(result.mean, 40 / 21, delta=0.02)
        self.assertLess(abs(result.mean - 40 / 21), 4 * result.stderr + 1e-12)

    def test_known_order_simulation(self):
        result = simulate(two_key_instance(), Policy.known_order([0, 1, None]), seed=1, trials=20_000)
        self.assertAlmostEqual(result.mean, 2.0, delta=4 * result.stderr + 1e-9)

    def test_same_seed_same_trials(self):
        instance = advisor_instance()
        policy = solve_one_key_mdp(instance).policy
        first = simulate(instance, policy, seed=11, trials=5000)
        second = simulate(instance, policy, seed=11, trials=5000)
        np.testing.assert_array_equal(first.scenario_ids, second.scenario_ids)

    def test_trial_blocks(self):
        sizes = [size for _, size in trial_blocks(2 * TRIAL_BLOCK_SIZE + 5, 0)]
        self.assertEqual(sizes, [TRIAL_BLOCK_SIZE, TRIAL_BLOCK_SIZE, 5])
        with self.assertRaises(ValidationError):
            list(trial_blocks(0, 0))
        with self.assertRaises(ValidationError):
            list(trial_blocks(10, -1))
