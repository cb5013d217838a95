import numpy as np
from django.test import SimpleTestCase
from scipy.special import ndtr

from imputation.exceptions import DegenerateColumnError
from imputation.marginals import (
    CutoffSet, cdf_eval, credible_band, draw_marginal, ecdf_marginal, latent_cutoffs, quantile, sup_distance,
)
from imputation.rand_kernels import dirichlet_flat, rng_handle


class MarginalDrawTests(SimpleTestCase):
    def test_uniform_weights_hand_values(self):
        m = draw_marginal(None, [3.0, 1.0, 2.0], weights=[1 / 3, 1 / 3, 1 / 3])
        self.assertAlmostEqual(cdf_eval(m, 1.0), 0.25)
        self.assertAlmostEqual(cdf_eval(m, 2.0), 0.5)
        self.assertAlmostEqual(cdf_eval(m, 3.0), 0.75)
        self.assertEqual(cdf_eval(m, 0.5), 0.0)

    def test_ties_pool_their_weight(self):
        m = draw_marginal(None, [1.0, 1.0, 2.0], weights=[0.2, 0.3, 0.5])
        np.testing.assert_array_equal(m.support, [1.0, 2.0])
        np.testing.assert_allclose(m.cum_weights, [0.5, 1.0])

    def test_ecdf_two_values(self):
        m = ecdf_marginal([5.0, 7.0])
        self.assertAlmostEqual(m.cdf(5.0), 1 / 3)
        self.assertAlmostEqual(m.cdf(7.0), 2 / 3)

    def test_nan_cells_are_ignored(self):
        m = ecdf_marginal([1.0, np.nan, 2.0])
        self.assertEqual(m.n_obs, 2)

    def test_constant_column_flagged(self):
        with self.assertRaises(DegenerateColumnError) as ctx:
            ecdf_marginal([4.0, 4.0, 4.0])
        self.assertTrue(ctx.exception.constant)
        self.assertEqual(ctx.exception.value, 4.0)

    def test_single_observation_flagged(self):
        with self.assertRaises(DegenerateColumnError):
            draw_marginal(rng_handle(1), [2.0])

    def test_cdf_is_right_continuous_step(self):
        m = draw_marginal(rng_handle(2), np.arange(10.0))
        t = np.linspace(-1, 11, 200)
        values = m.cdf(t)
        self.assertTrue(np.all(np.diff(values) >= 0))
        self.assertEqual(values[0], 0.0)
        self.assertAlmostEqual(values[-1], 10 / 11)
        self.assertEqual(m.cdf(3.0), m.cdf(3.5))

    def test_coefficients_reproduce_a_distribution(self):
        # F̃ = a F + b with (n + 1)/n a + 2b = 1: b = 0 below the sample, a = n/(n + 1)
        rng = rng_handle(16)
        for n in (2, 5, 37, 400):
            column = np.random.default_rng(n).normal(size=n)
            m = draw_marginal(rng, column)
            b = m.cdf(column.min() - 1.0)
            self.assertEqual(b, 0.0)
            self.assertAlmostEqual((n + 1) / n * m.adjustment + 2 * b, 1.0, places=14)
            self.assertAlmostEqual(m.cdf(column.max()), n / (n + 1), places=12)

    def test_quantile_hand_values(self):
        m = ecdf_marginal([1.0, 2.0, 3.0])
        self.assertEqual(quantile(m, 0.5), 2.0)
        self.assertEqual(quantile(m, 0.999), 3.0)
        self.assertEqual(quantile(m, 0.0), 1.0)
        with self.assertRaises(ValueError):
            quantile(m, 1.5)

    def test_quantile_inverts_cdf_at_atoms(self):
        m = draw_marginal(rng_handle(3), np.random.default_rng(0).normal(size=30))
        np.testing.assert_array_equal(m.quantile(m.cdf(m.support)), m.support)


class SignInvarianceTests(SimpleTestCase):
    def test_uniform_weights_identity(self):
        for n in range(2, 51):
            m = ecdf_marginal(np.arange(1.0, n + 1))
            f = m.cdf(m.support)
            # F̃(X_(r)) + F̃(X_(n-r+1)) = 1
            np.testing.assert_allclose(f + f[::-1], 1.0, atol=1e-12)

    def test_expectation_identity_over_dirichlet_draws(self):
        n = 20
        weights = dirichlet_flat(rng_handle(4), n, size=100_000)
        f = n / (n + 1.0) * np.cumsum(weights, axis=1)
        np.testing.assert_allclose(f.mean(axis=0) + f.mean(axis=0)[::-1], 1.0, atol=0.01)


class ConcentrationTests(SimpleTestCase):
    def test_exceedance_below_bound(self):
        n, draws = 100, 10_000
        sample = np.random.default_rng(5).normal(size=n)
        rng = rng_handle(6)
        distances = np.array([
            sup_distance(draw_marginal(rng, sample), ndtr) for _ in range(draws)
        ])
        for delta in (0.2, 0.3):
            bound = 4 * np.exp(-0.5 * (n - 1) * (delta - 2 * n / (n ** 2 - 1)) ** 2)
            self.assertLessEqual((distances > delta).mean(), bound)

    def test_sup_distance_hand_case(self):
        m = ecdf_marginal([0.0, 1.0])
        # F uniform on [0, 2]: atoms at F = 0 and 0.5, F̃ = 1/3 and 2/3
        dist = sup_distance(m, lambda t: np.clip(np.asarray(t) / 2.0, 0, 1))
        self.assertAlmostEqual(dist, 1 / 3)


class CutoffTests(SimpleTestCase):
    def test_binary_cutoff_hand_value(self):
        m = ecdf_marginal([1.0, 1.0, 2.0, 2.0])
        s = latent_cutoffs(m, 2)
        self.assertEqual(s.size, 3)
        self.assertEqual(s[0], -np.inf)
        self.assertEqual(s[-1], np.inf)
        self.assertAlmostEqual(s[1], -0.2533471031357997, places=9)

    def test_cutoffs_are_monotone(self):
        m = draw_marginal(rng_handle(7), [1, 2, 2, 3, 3, 3, 4, 5, 5])
        s = latent_cutoffs(m, 5)
        self.assertTrue(np.all(np.diff(s) >= 0))

    def test_unobserved_top_category_keeps_finite_cutoffs(self):
        s = latent_cutoffs(ecdf_marginal([1.0, 2.0, 2.0]), 4)
        self.assertTrue(np.all(np.isfinite(s[1:-1])))

    def test_bracket_boundaries(self):
        s = latent_cutoffs(ecdf_marginal([1.0, 2.0, 3.0, 3.0]), 3)
        cutoffs = CutoffSet({0: s})
        self.assertEqual(int(cutoffs.bracket(0, -50.0)), 1)
        self.assertEqual(int(cutoffs.bracket(0, 50.0)), 3)
        # Intervals are (s_{l-1}, s_l]: the cutoff itself belongs below
        self.assertEqual(int(cutoffs.bracket(0, s[1])), 1)
        lo, hi = cutoffs.interval(0, [2])
        self.assertEqual((lo[0], hi[0]), (s[1], s[2]))


class CredibleBandTests(SimpleTestCase):
    def test_band_shape(self):
        column = np.random.default_rng(8).normal(size=60)
        band = credible_band(rng_handle(9), column, 500, 0.99)
        self.assertEqual(band.t.size, 60)
        self.assertTrue(np.all(band.lower <= band.upper))
        self.assertTrue(np.all(band.width() >= 0))
        self.assertTrue(np.all(np.diff(band.lower) >= 0))

    def test_band_brackets_the_median_draw(self):
        column = np.random.default_rng(8).normal(size=60)
        band = credible_band(rng_handle(9), column, 500, 0.99)
        rng = rng_handle(21)
        curves = np.array([draw_marginal(rng, column).cdf(band.t) for _ in range(400)])
        median = np.median(curves, axis=0)
        self.assertTrue(np.all(band.lower - 1e-12 <= median))
        self.assertTrue(np.all(median <= band.upper + 1e-12))

    def test_width_shrinks_with_sample_size(self):
        rng = np.random.default_rng(14)

        def width_at_median(n):
            band = credible_band(rng_handle(15), rng.normal(size=n), 1000, 0.95)
            return band.width()[np.argmin(np.abs(band.ecdf - 0.5))]

        small, large = width_at_median(200), width_at_median(2000)
        self.assertLess(large, small / 2)

    def test_true_cdf_inside_band(self):
        column = np.random.default_rng(10).normal(size=500)
        band = credible_band(rng_handle(11), column, 2000, 0.99)
        truth = ndtr(band.t)
        inside = (band.lower <= truth) & (truth <= band.upper)
        self.assertGreaterEqual(inside.mean(), 0.95)

    def test_nested_levels(self):
        column = np.random.default_rng(12).exponential(size=200)
        wide = credible_band(rng_handle(13), column, 400, 0.99)
        narrow = credible_band(rng_handle(13), column, 400, 0.5)
        self.assertTrue(np.all(wide.lower <= narrow.lower))
        self.assertTrue(np.all(narrow.upper <= wide.upper))

    def test_argument_checks(self):
        with self.assertRaises(ValueError):
            credible_band(rng_handle(1), [1.0, 2.0], 50, 0.9)
        with self.assertRaises(ValueError):
            credible_band(rng_handle(1), [1.0, 2.0], 200, 0.0)
