import numpy as np
from django.test import SimpleTestCase

from imputation.baselines_eval import SimulationDesign, simulate_dataset
from imputation.data_model import ColumnKind, MixedDataset
from imputation.exceptions import InfeasibleMissingnessError
from imputation.missingness import (
    MIN_OBSERVED, MissingnessSpec, ampute, ampute_mar, ampute_mcar, anchor_scores, calibrate_intercept,
    default_anchors, newly_masked, restore,
)

C = ColumnKind.continuous()


def complete(n, p, seed=0):
    return MixedDataset(np.random.default_rng(seed).normal(size=(n, p)), (C,) * p)


class MissingnessSpecTests(SimpleTestCase):
    def test_rate_xor_count(self):
        with self.assertRaises(ValueError):
            MissingnessSpec(rate=0.1, count=5)
        with self.assertRaises(ValueError):
            MissingnessSpec()

    def test_rate_range(self):
        with self.assertRaises(ValueError):
            MissingnessSpec(rate=1.0)

    def test_mar_needs_anchors(self):
        with self.assertRaises(ValueError):
            MissingnessSpec(mechanism='mar', rate=0.3)

    def test_mechanism_is_case_insensitive(self):
        self.assertEqual(MissingnessSpec(mechanism='MCAR', rate=0.1).mechanism, 'mcar')

    def test_default_anchors(self):
        self.assertEqual(default_anchors(15, 3), (0, 5, 10))
        self.assertEqual(default_anchors(4), (0,))


class McarTests(SimpleTestCase):
    def test_exact_count_for_rate(self):
        sim = simulate_dataset(SimulationDesign(n=1000, p=15, seed=1))
        amputed = ampute_mcar(sim.dataset, MissingnessSpec(rate=0.5, seed=2))
        self.assertEqual(amputed.n_missing(), 7500)

    def test_count_on_incomplete_data(self):
        d = complete(60, 4)
        values = np.array(d.values, copy=True)
        values[:5, 1] = np.nan
        d = d.with_values(values)
        amputed = ampute(d, MissingnessSpec(count=50, seed=3))
        self.assertEqual(int(newly_masked(d, amputed).sum()), 50)
        self.assertEqual(amputed.n_missing(), 55)

    def test_floor_of_observed_cells(self):
        amputed = ampute_mcar(complete(10, 3), MissingnessSpec(rate=0.8, seed=4))
        np.testing.assert_array_equal(amputed.mask.sum(axis=0), [MIN_OBSERVED] * 3)

    def test_infeasible_request(self):
        with self.assertRaises(InfeasibleMissingnessError):
            ampute_mcar(complete(10, 3), MissingnessSpec(rate=0.9, seed=4))

    def test_reproducible(self):
        d = complete(50, 5)
        a = ampute(d, MissingnessSpec(rate=0.3, seed=11))
        b = ampute(d, MissingnessSpec(rate=0.3, seed=11))
        c = ampute(d, MissingnessSpec(rate=0.3, seed=12))
        self.assertTrue(a.equals(b))
        self.assertFalse(a.equals(c))

    def test_restore_undoes_amputation(self):
        d = complete(30, 3)
        amputed = ampute(d, MissingnessSpec(rate=0.4, seed=5))
        self.assertTrue(restore(amputed, d).equals(d))


class MarTests(SimpleTestCase):
    def setUp(self):
        self.d = simulate_dataset(SimulationDesign(n=200, p=6, seed=7)).dataset
        self.anchors = (0, 2, 4)
        self.eligible = np.ones(self.d.values.shape, dtype=bool)
        self.eligible[:, list(self.anchors)] = False

    def masked_fraction(self, spec):
        amputed = ampute_mar(self.d, spec)
        return newly_masked(self.d, amputed)[self.eligible].mean(), amputed

    def test_anchors_stay_observed(self):
        _, amputed = self.masked_fraction(MissingnessSpec('mar', rate=0.5, anchor_columns=self.anchors, seed=1))
        self.assertTrue(amputed.mask[:, list(self.anchors)].all())

    def test_calibrated_rate_over_seeds(self):
        fractions = [
            self.masked_fraction(MissingnessSpec('mar', rate=0.3, anchor_columns=self.anchors, seed=s))[0]
            for s in range(100)
        ]
        self.assertLess(abs(np.mean(fractions) - 0.3), 0.02)

    def test_zero_slope_is_mcar(self):
        fractions = [
            self.masked_fraction(MissingnessSpec('mar', rate=0.3, anchor_columns=self.anchors, seed=s, beta=0.0))[0]
            for s in range(100)
        ]
        self.assertLess(abs(np.mean(fractions) - 0.3), 0.01)

    def test_missingness_follows_anchor_scores(self):
        _, amputed = self.masked_fraction(
            MissingnessSpec('mar', rate=0.3, anchor_columns=self.anchors, seed=3, beta=2.0))
        scores = anchor_scores(self.d, self.anchors)
        hit = newly_masked(self.d, amputed)[:, 1]
        self.assertGreater(scores[hit].mean(), scores[~hit].mean())

    def test_count_maps_to_rate(self):
        _, amputed = self.masked_fraction(MissingnessSpec('mar', count=120, anchor_columns=self.anchors, seed=2))
        self.assertGreater(amputed.n_missing(), 0)

    def test_incomplete_anchor_rejected(self):
        values = np.array(self.d.values, copy=True)
        values[0, 0] = np.nan
        with self.assertRaises(InfeasibleMissingnessError):
            ampute_mar(self.d.with_values(values),
                       MissingnessSpec('mar', rate=0.3, anchor_columns=self.anchors, seed=1))

    def test_unreachable_rate_reports_range(self):
        with self.assertRaises(InfeasibleMissingnessError) as ctx:
            calibrate_intercept(np.array([-1.0, 1.0]), 1000.0, 0.1)
        self.assertIn('achievable range', str(ctx.exception))

    def test_calibration_hits_target(self):
        scores = np.random.default_rng(0).normal(size=500)
        alpha = calibrate_intercept(scores, 1.0, 0.25)
        self.assertAlmostEqual(float((1 / (1 + np.exp(-(alpha + scores)))).mean()), 0.25, places=4)
