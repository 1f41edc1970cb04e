import itertools
from unittest import TestCase

import numpy as np

from keychain.exceptions import LaminarityError, ValidationError
from keychain.laminar import (AntichainValuation, LaminarFamily, build_forest, demand_query, disjoint_antichains,
                              supporting_prices, value_query)

A, B, C = 'a', 'b', 'c'


def small_valuation(k=1):
    return AntichainValuation((3, 2, 2), LaminarFamily([{A, B}, {A}, {B}]), k)


def random_tree_family(size, seed):
    """Element i's type set is i together with its descendants in a random forest, so nesting is ancestry."""
    rng = np.random.default_rng(seed)
    parents = [None] + [None if rng.random() < 0.3 else int(rng.integers(i)) for i in range(1, size)]
    ancestors = []
    for i in range(size):
        chain, parent = set(), parents[i]
        while parent is not None:
            chain.add(parent)
            parent = parents[parent]
        ancestors.append(chain)
    type_sets = [{j for j in range(size) if j == i or i in ancestors[j]} for i in range(size)]
    weights = rng.integers(0, 10, size=size).astype(float)
    return LaminarFamily(type_sets), ancestors, weights


def brute_force_value(subset, ancestors, weights, k):
    """Heaviest U inside subset whose longest chain has at most k elements."""
    best = 0.0
    items = sorted(subset)
    for size in range(len(items) + 1):
        for chosen in itertools.combinations(items, size):
            members = set(chosen)
            height = max((len(ancestors[i] & members) + 1 for i in chosen), default=0)
            if height <= k:
                best = max(best, sum(weights[i] for i in chosen))
    return best


class TestLaminarFamily(TestCase):

    def test_nested_sets(self):
        family = LaminarFamily([{A, B}, {A}, {B}])
        self.assertEqual(family.parents, (None, 0, 0))
        forest = build_forest(family, range(3), [3, 2, 2])
        self.assertEqual(forest.roots, (0,))
        self.assertEqual(forest.children[0], (1, 2))
        self.assertTrue(forest.is_ancestor(0, 2))
        self.assertFalse(forest.is_ancestor(1, 2))

    def test_disjoint_sets(self):
        forest = build_forest(LaminarFamily([{A}, {B}, {C}]), range(3), [1, 1, 1])
        self.assertEqual(forest.roots, (0, 1, 2))
        self.assertEqual(forest.height(), 1)

    def test_identical_sets_form_a_chain(self):
        family = LaminarFamily([{A, B}, {A, B}, {A}])
        self.assertEqual(family.parents, (None, 0, 1))

    def test_overlap_is_rejected(self):
        with self.assertRaises(LaminarityError) as context:
            LaminarFamily([{A}, {A, B}, {B, C}])
        self.assertEqual(context.exception.pair, (1, 2))

    def test_subset_forest_skips_missing_ancestors(self):
        family = LaminarFamily([{A, B, C}, {A, B}, {A}])
        forest = build_forest(family, [0, 2], [1, 1, 1])
        self.assertEqual(forest.parent[2], 0)


class TestDisjointAntichains(TestCase):

    def test_single_antichain(self):
        forest = build_forest(LaminarFamily([{A, B}, {A}, {B}]), range(3), [3, 2, 2])
        result = disjoint_antichains(forest, 1)
        self.assertEqual(result.value, 4)
        self.assertEqual(result.antichains, (frozenset({1, 2}),))

    def test_two_antichains(self):
        forest = build_forest(LaminarFamily([{A, B}, {A}, {B}]), range(3), [3, 2, 2])
        result = disjoint_antichains(forest, 2)
        self.assertEqual(result.value, 7)
        self.assertEqual(set(result.antichains), {frozenset({0}), frozenset({1, 2})})

    def test_empty_forest(self):
        forest = build_forest(LaminarFamily([{A}]), [], [1])
        self.assertEqual(disjoint_antichains(forest, 3).value, 0)

    def test_rejects_zero_budget(self):
        forest = build_forest(LaminarFamily([{A}]), [0], [1])
        with self.assertRaises(ValidationError):
            disjoint_antichains(forest, 0)


class TestOracles(TestCase):

    def test_value_query(self):
        valuation = small_valuation()
        self.assertEqual(value_query(valuation, {0, 1}), 3)
        self.assertEqual(value_query(valuation, set()), 0)
        self.assertEqual(value_query(valuation, {0, 1, 2}), 4)

    def test_not_submodular(self):
        valuation = small_valuation()
        gain_with_two = value_query(valuation, {0, 1, 2}) - value_query(valuation, {0, 1})
        gain_alone = value_query(valuation, {0, 2}) - value_query(valuation, {0})
        self.assertGreater(gain_with_two, gain_alone)

    def test_demand_query(self):
        valuation = small_valuation()
        demand = demand_query(valuation, [3, 0, 0])
        self.assertEqual(demand.bundle, frozenset({1, 2}))
        self.assertEqual(demand.utility, 4)
        self.assertEqual(demand_query(valuation, [10, 10, 10]).bundle, frozenset())
        free = demand_query(valuation, [0, 0, 0])
        self.assertEqual(free.utility, value_query(valuation, {0, 1, 2}))

    def test_demand_rejects_negative_price(self):
        with self.assertRaises(ValidationError):
            demand_query(small_valuation(), [-1, 0, 0])

    def test_supporting_prices(self):
        valuation = small_valuation()
        np.testing.assert_array_equal(supporting_prices(valuation, {0, 1, 2}), [0, 2, 2])
        np.testing.assert_array_equal(supporting_prices(valuation, {0}), [3, 0, 0])
        np.testing.assert_array_equal(supporting_prices(valuation, set()), [0, 0, 0])

    def test_valuation_rejects_bad_weights(self):
        with self.assertRaises(ValidationError):
            AntichainValuation((1, 2), LaminarFamily([{A}, {B}, {C}]))

    def test_value_matches_exhaustive_search(self):
        for seed in range(5):
            family, ancestors, weights = random_tree_family(10, seed)
            valuation = AntichainValuation(tuple(weights), family, 1)
            for mask in range(0, 2 ** 10, 7):
                subset = {i for i in range(10) if mask >> i & 1}
                self.assertAlmostEqual(value_query(valuation, subset),
                                       brute_force_value(subset, ancestors, weights, 1))

    def test_k_disjoint_matches_exhaustive_search(self):
        for seed in range(5):
            family, ancestors, weights = random_tree_family(7, seed)
            for k in (2, 3):
                valuation = AntichainValuation(tuple(weights), family, k)
                for mask in range(2 ** 7):
                    subset = {i for i in range(7) if mask >> i & 1}
                    self.assertAlmostEqual(value_query(valuation, subset),
                                           brute_force_value(subset, ancestors, weights, k))

    def test_monotone_and_supported(self):
        family, _, weights = random_tree_family(6, 42)
        valuation = AntichainValuation(tuple(weights), family, 2)
        values = {}
        for mask in range(2 ** 6):
            values[mask] = value_query(valuation, {i for i in range(6) if mask >> i & 1})
        for mask in range(2 ** 6):
            subset = {i for i in range(6) if mask >> i & 1}
            prices = supporting_prices(valuation, subset)
            self.assertAlmostEqual(prices.sum(), values[mask])
            for sub in range(2 ** 6):
                if sub & ~mask:
                    continue
                self.assertLessEqual(values[sub], values[mask] + 1e-9)
                self.assertLessEqual(sum(prices[i] for i in range(6) if sub >> i & 1), values[sub] + 1e-9)
