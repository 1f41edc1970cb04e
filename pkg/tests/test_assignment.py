import itertools
from fractions import Fraction
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from keychain.assignment import max_weight_assignment, solve_known_order
from keychain.exceptions import ValidationError
from keychain.gen import random_instance
from keychain.model import NULL, KnownOrderInstance, embed_known_order
from keychain.oracle import solve_one_key_mdp

HALF = Fraction(1, 2)


def brute_force_assignment(w):
    rows, cols = w.shape
    best = 0.0
    for size in range(min(rows, cols) + 1):
        for chosen in itertools.combinations(range(rows), size):
            for targets in itertools.permutations(range(cols), size):
                best = max(best, sum(w[r, c] for r, c in zip(chosen, targets)))
    return best


class TestMaxWeightAssignment(TestCase):

    def test_rectangular(self):
        result = max_weight_assignment([[1.5, 1.0, 0.5], [1.0, 0.5, 0.0]])
        self.assertAlmostEqual(result.value, 2.0)
        self.assertEqual(len(result.pairs), 2)

    def test_identity(self):
        result = max_weight_assignment([[1, 0], [0, 1]])
        self.assertAlmostEqual(result.value, 2.0)
        self.assertEqual(result.pairs, ((0, 0), (1, 1)))

    def test_all_zero(self):
        result = max_weight_assignment(np.zeros((3, 2)))
        self.assertEqual(result.value, 0.0)
        self.assertEqual(result.pairs, ())

    def test_zero_weight_pairs_are_dropped(self):
        result = max_weight_assignment([[5, 0], [0, 0]])
        self.assertEqual(result.as_dict(), {0: 0})

    def test_rejects_negative_weight(self):
        with self.assertRaisesRegex(ValidationError, r'weights\[1\]\[0\]'):
            max_weight_assignment([[1, 2], [-1, 0]])

    def test_rejects_non_matrix(self):
        with self.assertRaises(ValidationError):
            max_weight_assignment([1, 2, 3])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
    def test_matches_brute_force(self, rows, cols, seed):
        w = np.random.default_rng(seed).integers(0, 6, size=(rows, cols)).astype(float)
        result = max_weight_assignment(w)
        self.assertAlmostEqual(result.value, brute_force_assignment(w))
        self.assertEqual(len({r for r, _ in result.pairs}), len(result.pairs))
        self.assertEqual(len({c for _, c in result.pairs}), len(result.pairs))

    def test_matches_linear_sum_assignment(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            w = rng.random(size=tuple(rng.integers(1, 9, size=2)))
            rows, cols = linear_sum_assignment(w, maximize=True)
            self.assertAlmostEqual(max_weight_assignment(w).value, w[rows, cols].sum(), places=9)


class TestSolveKnownOrder(TestCase):

    def test_two_keys_three_rounds(self):
        value, policy = solve_known_order(KnownOrderInstance(2, ((0, 1), (0, 1), (0,)), (HALF, HALF)))
        self.assertEqual(value, 2)

    def test_second_key_dominates(self):
        value, policy = solve_known_order(KnownOrderInstance(2, ((0, 1), (1,)), (HALF, HALF)))
        self.assertEqual(value, 1)

    def test_single_key(self):
        value, policy = solve_known_order(KnownOrderInstance(1, ((0,),), (1,)))
        self.assertEqual(value, 1)
        self.assertEqual(policy.actions, (0,))

    def test_unused_rounds_are_null(self):
        value, policy = solve_known_order(KnownOrderInstance(2, ((0,), (0,), (0,)), (1, 0)))
        self.assertEqual(value, 3)
        self.assertEqual(policy.actions, (0, NULL, NULL))

    def test_agrees_with_one_key_oracle(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            n, m = (int(v) for v in rng.integers(1, 7, size=2))
            instance = random_instance('known_order', n, m, seed=seed)
            value, _ = solve_known_order(instance)
            oracle = solve_one_key_mdp(embed_known_order(instance)).value
            self.assertAlmostEqual(float(value), float(oracle), delta=1e-9)
