import unittest

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np

import beamsweep
from tests import oracles
from tests.helpers import TestTempWorkingDirMixin


def constant_model(scores, role=beamsweep.ModelRole.COUPLED):
    """A treeless ensemble that predicts `scores` everywhere."""
    targets = np.tile(scores, (3, 1))
    locations = np.array([[10.0, 0.0], [50.0, 1.0], [90.0, -1.0]])
    return beamsweep.train(locations, targets, beamsweep.TrainConfig(), role)


def coverage_data():
    """Six UEs near x = 20 whose best beam is 3, four near x = 180 preferring 9."""
    rng = np.random.default_rng(0)
    locations = np.vstack(
        [rng.normal([20.0, -3.0], 0.5, (6, 2)), rng.normal([180.0, 3.0], 0.5, (4, 2))]
    )
    atr_f = rng.uniform(0.0, 0.3, (10, 12))
    atr_f[:6, 3] = 0.9
    atr_f[6:, 9] = 0.8
    return locations, atr_f


class CoupledTest(unittest.TestCase):
    def test_top_pairs_lowest_index_first(self):
        model = constant_model([0.2, 0.9, 0.5, 0.9])
        selected = beamsweep.select_coupled(model, [30.0, 0.0], 2, 2)
        self.assertEqual([1, 3], selected.indices.tolist())
        self.assertEqual([(0, 1), (1, 1)], selected.pairs)
        self.assertEqual(2, selected.budget)

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.integers(1, 4))
    def test_matches_oracle_order(self, scores, budget):
        model = constant_model(scores)
        selected = beamsweep.select_coupled(model, [0.0, 0.0], budget, 2)
        predicted = beamsweep.predict(model, [0.0, 0.0]).tolist()
        self.assertEqual(oracles.top_k(predicted, budget), selected.indices.tolist())

    def test_budget_out_of_range(self):
        model = constant_model([0.2, 0.9, 0.5, 0.9])
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.select_coupled(model, [30.0, 0.0], 5, 2)

    def test_overhead_bits(self):
        self.assertEqual(40, beamsweep.overhead_bits(1, 10, 16))
        self.assertEqual(0, beamsweep.overhead_bits(2, 10, 16))
        self.assertEqual(0, beamsweep.overhead_bits(3, 10, 16))
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.overhead_bits(1, 10, 12)


class DecoupledTest(unittest.TestCase):
    def test_each_side_keeps_its_top_beams(self):
        beamformer_model = constant_model([0.1, 0.7, 0.3, 0.7], beamsweep.ModelRole.DECOUPLED_F)
        combiner_model = constant_model([0.4, 0.6], beamsweep.ModelRole.DECOUPLED_W)
        sets = beamsweep.select_decoupled_with_location(
            beamformer_model, combiner_model, [40.0, 0.0], 1, 2
        )
        self.assertEqual([1], sets.combiners.tolist())
        self.assertEqual([1, 3], sets.beamformers.tolist())
        self.assertEqual(2, sets.budget)
        self.assertEqual([5, 7], sets.pair_indices(4).tolist())

    def test_infeasible_split(self):
        beamformer_model = constant_model([0.1, 0.7], beamsweep.ModelRole.DECOUPLED_F)
        combiner_model = constant_model([0.4, 0.6], beamsweep.ModelRole.DECOUPLED_W)
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.select_decoupled_with_location(
                beamformer_model, combiner_model, [40.0, 0.0], 3, 1
            )


class KthBestTest(unittest.TestCase):
    rows = [[0.9, 0.1, 0.5], [0.2, 0.8, 0.5], [0.9, 0.3, 0.1]]

    def test_examples(self):
        np.testing.assert_allclose(
            [2 / 3, 1 / 3, 0.0], beamsweep.kth_best_probability(self.rows, 1)
        )
        np.testing.assert_allclose(
            [0.0, 1 / 3, 2 / 3], beamsweep.kth_best_probability(self.rows, 2)
        )

    def test_ties_go_to_the_lower_beam(self):
        np.testing.assert_array_equal(
            [1.0, 0.0], beamsweep.kth_best_probability([[0.5, 0.5]], 1)
        )

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(
        st.lists(
            st.lists(st.floats(0, 1), min_size=5, max_size=5), min_size=1, max_size=8
        ),
        st.integers(1, 5),
    )
    def test_matches_oracle(self, rows, k):
        probabilities = beamsweep.kth_best_probability(rows, k)
        np.testing.assert_allclose(oracles.kth_best(rows, k), probabilities)
        self.assertAlmostEqual(1.0, probabilities.sum())
        tables = beamsweep.kth_best_tables(rows)
        np.testing.assert_allclose(probabilities, tables[k - 1])
        np.testing.assert_allclose(np.ones(5), tables.sum(axis=0))

    def test_invalid_rank(self):
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.kth_best_probability(self.rows, 4)
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.kth_best_probability(np.zeros((0, 3)), 1)


class CoverageTest(unittest.TestCase):
    def test_each_cluster_gets_its_best_beam(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 2, 2, seed=0)
        self.assertEqual([3, 9], plan.beamformers.tolist())
        np.testing.assert_allclose([0.4, 0.6], sorted(plan.significances))
        self.assertAlmostEqual(1.0, plan.significances.sum(), places=12)

    def test_unweighted_clusters_tie_to_the_lower_beam(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(
            locations, atr_f, 2, 2, seed=0, use_significance=False
        )
        self.assertEqual([3, 9], plan.beamformers.tolist())
        np.testing.assert_array_equal([1.0, 1.0], plan.significances)

    def test_full_budget_selects_every_beam(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 2, 12, seed=0)
        self.assertEqual(list(range(12)), sorted(plan.beamformers.tolist()))

    def test_smaller_budgets_are_prefixes(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 3, 12, seed=1)
        for count in range(1, 13):
            self.assertEqual(
                plan.ranking[:count].tolist(),
                plan.with_beam_count(count).beamformers.tolist(),
            )
        with self.assertRaises(beamsweep.SelectionError):
            plan.with_beam_count(13)

    def test_candidates_are_ordered_by_probability(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 2, 2, seed=0)
        for cluster in range(2):
            self.assertEqual(1, len(plan.candidates(cluster, 1)))
            self.assertIn(int(plan.candidates(cluster, 1)[0]), (3, 9))

    def test_coverage_order_scores_by_significance(self):
        probabilities = np.zeros((2, 3, 3))
        probabilities[0, 0] = [0.0, 1.0, 0.0]
        probabilities[1, 0] = [0.0, 0.0, 1.0]
        probabilities[:, 1] = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
        probabilities[0, 2] = [0.0, 0.0, 1.0]
        probabilities[1, 2] = [0.0, 1.0, 0.0]
        self.assertEqual(
            [2, 1, 0],
            beamsweep.coverage_order(probabilities, np.array([0.3, 0.7]), 3).tolist(),
        )
        self.assertEqual(
            [1], beamsweep.coverage_order(probabilities, np.array([0.7, 0.3]), 1).tolist()
        )

    def test_location_free_sets_ignore_the_location(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 2, 4, seed=0)
        model = constant_model([0.3, 0.8, 0.1, 0.2], beamsweep.ModelRole.LOCATION_FREE_W)
        near = beamsweep.select_decoupled_no_location(model, [20.0, -3.0], 2, plan)
        far = beamsweep.select_decoupled_no_location(model, [180.0, 3.0], 2, plan)
        np.testing.assert_array_equal(plan.beamformers, near.beamformers)
        np.testing.assert_array_equal(near.beamformers, far.beamformers)
        self.assertEqual([1, 0], near.combiners.tolist())

    def test_too_many_beams(self):
        locations, atr_f = coverage_data()
        with self.assertRaises(beamsweep.SelectionError):
            beamsweep.select_bs_coverage(locations, atr_f, 2, 13)


class PlanFileTest(TestTempWorkingDirMixin, unittest.TestCase):
    def test_save_load_and_csv(self):
        locations, atr_f = coverage_data()
        plan = beamsweep.select_bs_coverage(locations, atr_f, 2, 3, seed=0)
        beamsweep.save_plan("plan.bin", plan)
        loaded = beamsweep.load_plan("plan.bin")
        np.testing.assert_array_equal(plan.ranking, loaded.ranking)
        np.testing.assert_array_equal(plan.probabilities, loaded.probabilities)
        self.assertEqual(3, loaded.beam_count)
        self.assertTrue(loaded.use_significance)

        beamsweep.write_plan_csv("plan.bin", plan)
        beams = (self.working_dir / "plan_beams.csv").read_text().splitlines()
        self.assertEqual(["beam_rank,beamformer", "1,3", "2,9"], beams[:3])
        self.assertEqual(4, len(beams))
        clusters = (self.working_dir / "plan_clusters.csv").read_text().splitlines()
        self.assertEqual(3, len(clusters))
