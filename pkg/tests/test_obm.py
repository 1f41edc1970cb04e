import math
from unittest import TestCase

import numpy as np

from keychain.exceptions import SizeGuardError, ValidationError
from keychain.gen import random_instance
from keychain.obm import (ArrivalForest, WeightProfile, WobmInstance, offline_b_matching, philosopher_oracle,
                          reduce_wobm_to_mwlbm, solve_wobm, split_capacities)


def wait_or_take():
    """The first arrival is worth 2 for sure; the second is worth 5 or nothing."""
    return WobmInstance((1,), (WeightProfile([[2, 5]], 0.5), WeightProfile([[2, 0]], 0.5)))


class TestWobmInstance(TestCase):

    def test_shape(self):
        instance = wait_or_take()
        self.assertEqual((instance.num_offline, instance.num_arrivals), (1, 2))
        self.assertEqual(instance.columns(0), ((2.0,), (5.0,)))

    def test_rejects_bad_capacity(self):
        with self.assertRaises(ValidationError):
            WobmInstance((0,), (WeightProfile([[1]], 1),))

    def test_rejects_mismatched_shapes(self):
        with self.assertRaises(ValidationError):
            WobmInstance((1,), (WeightProfile([[1, 2]], 0.5), WeightProfile([[1]], 0.5)))

    def test_rejects_negative_weight(self):
        with self.assertRaises(ValidationError):
            WobmInstance((1,), (WeightProfile([[-1]], 1),))

    def test_rejects_unnormalized_support(self):
        with self.assertRaises(ValidationError):
            WobmInstance((1,), (WeightProfile([[1]], 0.5),))


class TestReduction(TestCase):

    def test_arrival_forest(self):
        forest = ArrivalForest(wait_or_take())
        self.assertEqual(forest.num_info_sets, 3)
        self.assertEqual(len(forest.roots), 1)
        self.assertEqual(sorted(forest.weights[0]), [0.0, 2.0, 2.5])

    def test_matching_instance(self):
        matching = reduce_wobm_to_mwlbm(wait_or_take())
        self.assertEqual((matching.num_left, matching.num_right), (1, 3))
        self.assertEqual(tuple(matching.capacities), (1,))


class TestSolvers(TestCase):

    def test_philosopher_waits(self):
        self.assertAlmostEqual(philosopher_oracle(wait_or_take()), 2.5)

    def test_philosopher_uses_capacity(self):
        instance = WobmInstance((2,), (WeightProfile([[2, 5]], 0.5), WeightProfile([[2, 0]], 0.5)))
        self.assertAlmostEqual(philosopher_oracle(instance), 2 + 2.5)

    def test_philosopher_size_guard(self):
        instance = WobmInstance((1,) * 4, (WeightProfile(np.ones((4, 4)).tolist(), 1),))
        with self.assertRaises(SizeGuardError):
            philosopher_oracle(instance)

    def test_offline_b_matching(self):
        self.assertEqual(offline_b_matching([[2, 5]], (1,)), 5)
        self.assertEqual(offline_b_matching([[2, 5]], (2,)), 7)
        self.assertEqual(offline_b_matching([[1, 0], [0, 1]], (1, 1)), 2)

    def test_solve_small(self):
        result = solve_wobm(wait_or_take(), seed=3, trials=20_000)
        self.assertAlmostEqual(result.lp_value, 2.5)
        self.assertLessEqual(result.expected_value, result.lp_value + 1e-9)
        self.assertAlmostEqual(result.estimate.mean, result.expected_value,
                               delta=4 * result.estimate.stderr + 1e-9)

    def test_lp_bounds_online_optimum(self):
        for seed in range(8):
            instance = random_instance('wobm', 2, 3, 3, seed=seed)
            result = solve_wobm(instance, seed=seed, trials=2_000)
            online = philosopher_oracle(instance)
            offline = sum(p.prob * offline_b_matching(p.weights, instance.capacities) for p in instance.support)
            self.assertGreaterEqual(result.lp_value, online - 1e-7)
            self.assertGreaterEqual(offline, online - 1e-9)
            self.assertLessEqual(result.expected_value, online + 1e-7)
            self.assertGreaterEqual(result.marginal_deviation, 0.0)

    def test_split_capacities_wraps_load(self):
        instance = WobmInstance((2,), (WeightProfile([[1, 1, 1]], 1),))
        forest = ArrivalForest(instance)
        owner, split = split_capacities(forest, [[0.9, 0.9, 0.2]], instance.capacities)
        np.testing.assert_array_equal(owner, [0, 0])
        np.testing.assert_allclose(split, [[0.9, 0.1, 0.0], [0.0, 0.8, 0.2]], atol=1e-12)

    def test_guarantee_with_capacity_two(self):
        instance = WobmInstance((2, 1), (WeightProfile([[3, 1, 4], [2, 5, 0]], 0.5),
                                         WeightProfile([[3, 1, 0], [2, 0, 6]], 0.5)))
        result = solve_wobm(instance, seed=7, trials=100_000)
        floor = (1 - 1 / math.e) * result.lp_value
        self.assertLess(result.marginal_deviation, 1e-9)
        self.assertGreaterEqual(result.expected_value, floor - 1e-7)
        self.assertGreaterEqual(result.estimate.mean, floor - 3 * result.estimate.stderr)
        online = philosopher_oracle(instance)
        self.assertGreaterEqual(online, result.expected_value - 1e-7)
        self.assertLessEqual(online, result.lp_value + 1e-7)

    def test_guarantee_on_random_instances(self):
        for seed in range(10):
            instance = random_instance('wobm', 2, 3, 3 + seed % 2, seed=seed)
            result = solve_wobm(instance, seed=seed, trials=20_000)
            floor = (1 - 1 / math.e) * result.lp_value
            online = philosopher_oracle(instance)
            mean, stderr = result.estimate.mean, result.estimate.stderr
            self.assertGreaterEqual(result.expected_value, floor - 1e-7, msg='seed {}'.format(seed))
            self.assertGreaterEqual(mean, floor - 3 * stderr, msg='seed {}'.format(seed))
            self.assertGreaterEqual(online, result.expected_value - 1e-7, msg='seed {}'.format(seed))
            self.assertGreaterEqual(online, mean - 4 * stderr, msg='seed {}'.format(seed))

    def test_seeded_estimate_is_reproducible(self):
        instance = random_instance('wobm', 2, 3, 2, seed=11)
        first = solve_wobm(instance, seed=5, trials=1_000)
        second = solve_wobm(instance, seed=5, trials=1_000)
        self.assertEqual(first.estimate.mean, second.estimate.mean)
