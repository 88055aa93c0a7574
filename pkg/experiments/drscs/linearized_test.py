import unittest

import numpy as np

from drscs.core import Box, DataPoint, Dataset, RngStream
from drscs.errors import ConfigError, NumericError
from drscs.linearized import ScsConfig, ScsState, gated_estimates, projected_subgradient, run, step, \
    update_tracker
from drscs.models import LossSpec, PenaltyParams, dataset_losses, loss_subgradient, loss_value, mean_loss
from drscs.risk import RiskParams


def linear_dataset(seed, n=200, d=5, noise=0.3):
    rng = np.random.RandomState(seed)
    a = rng.uniform(-1, 1, size=(n, d))
    w = rng.uniform(-1, 1, size=d)
    return Dataset(a, a @ w + noise * rng.standard_t(3, size=n))


def logistic_dataset(seed, n=200, d=5):
    rng = np.random.RandomState(seed)
    a = rng.uniform(-1, 1, size=(n, d))
    w = rng.uniform(-2, 2, size=d)
    return Dataset(a, np.where(rng.uniform(size=n) < 1 / (1 + np.exp(-a @ w)), 1., -1.))


class GatedEstimatesTestCase(unittest.TestCase):
    def setUp(self):
        self.spec = LossSpec('mad', 'lasso', PenaltyParams(0.1))
        self.x = np.array([1., -1.])
        self.D1 = DataPoint(np.array([2., 0.]), 0.)
        self.D2 = DataPoint(np.array([0., 1.]), 1.)
        self.D3 = DataPoint(np.array([1., 1.]), 3.)

    def test_below_tracker(self):
        est = gated_estimates(self.spec, RiskParams(0.5), self.x, 100., self.D1, self.D2, self.D3)
        self.assertEqual(est.indicator, 0)
        np.testing.assert_equal(est.g_fx, 0.)
        self.assertEqual(est.g_fu, 1.)

    def test_above_tracker(self):
        est = gated_estimates(self.spec, RiskParams(0.5), self.x, -100., self.D1, self.D2, self.D3)
        self.assertEqual(est.indicator, 1)
        np.testing.assert_allclose(est.g_fx, 0.5 * loss_subgradient(self.spec, self.x, self.D1))
        self.assertEqual(est.g_fu, 0.5)

    def test_equality_counts_as_above(self):
        u = loss_value(self.spec, self.x, self.D1)
        est = gated_estimates(self.spec, RiskParams(0.3), self.x, u, self.D1, self.D2, self.D3)
        self.assertEqual(est.indicator, 1)

    def test_kappa_zero(self):
        est = gated_estimates(self.spec, RiskParams(0.), self.x, -100., self.D1, self.D2, self.D3)
        np.testing.assert_equal(est.g_fx, 0.)
        self.assertEqual(est.g_fu, 1.)

    def test_components(self):
        est = gated_estimates(self.spec, RiskParams(0.4), self.x, 0., self.D1, self.D2, self.D3)
        np.testing.assert_allclose(est.g_h, loss_subgradient(self.spec, self.x, self.D2))
        np.testing.assert_allclose(est.J, loss_subgradient(self.spec, self.x, self.D3))
        expected = np.mean([loss_value(self.spec, self.x, D) for D in (self.D1, self.D2, self.D3)])
        self.assertAlmostEqual(est.h_tilde, expected)
        self.assertIn(est.g_fu, (1., 0.6))
        np.testing.assert_allclose(est.g_fx + est.g_fu * est.g_h,
                                   0.4 * est.indicator * est.G + (1 - 0.4 * est.indicator) * est.g_h)


class StepTestCase(unittest.TestCase):
    def test_tracker_filter(self):
        self.assertEqual(update_tracker(5., 0.5, 3., np.ones(2), np.zeros(2), np.zeros(2)), 4.)
        self.assertEqual(update_tracker(5., 1., 3., np.zeros(2), np.ones(2), np.zeros(2)), 3.)

    def test_step_is_projected(self):
        box = Box.symmetric(1., 2)
        cfg = ScsConfig(0.5, 10, RiskParams(0.), box)
        est = gated_estimates(LossSpec('mad'), RiskParams(0.), np.zeros(2), 0.,
                              DataPoint(np.array([10., 0.]), 5.), DataPoint(np.array([10., -10.]), 5.),
                              DataPoint(np.array([0., 1.]), 0.))
        new = step(cfg, ScsState(np.zeros(2), 0., 0), est)
        self.assertTrue(box.contains(new.x))
        self.assertEqual(new.k, 1)
        self.assertLessEqual(np.linalg.norm(new.x), 0.5 * np.linalg.norm(est.g_h))

    def test_non_finite_direction(self):
        cfg = ScsConfig(0.5, 10, RiskParams(0.), Box.symmetric(1., 1))
        est = gated_estimates(LossSpec('mad'), RiskParams(0.), np.zeros(1), 0.,
                              DataPoint(np.array([1.]), 0.), DataPoint(np.array([1.]), 0.),
                              DataPoint(np.array([1.]), 0.))
        est = est._replace(g_h=np.array([np.nan]))
        with self.assertRaises(NumericError):
            step(cfg, ScsState(np.zeros(1), 0., 0), est)

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            ScsConfig(0., 10, RiskParams(0.), Box.symmetric(1., 1))
        with self.assertRaises(ConfigError):
            ScsConfig(1.5, 10, RiskParams(0.), Box.symmetric(1., 1))


class RunTestCase(unittest.TestCase):
    def setUp(self):
        self.ds = linear_dataset(0)
        self.spec = LossSpec('mad', 'lasso', PenaltyParams(0.05))
        self.box = Box.symmetric(10., self.ds.dim)

    def test_single_iteration_returns_x0(self):
        cfg = ScsConfig(0.1, 1, RiskParams(0.5), self.box, x0=np.full(self.ds.dim, 20.))
        _, x_R = run(cfg, self.spec, self.ds, RngStream(0))
        np.testing.assert_equal(x_R, np.full(self.ds.dim, 10.))

    def test_deterministic(self):
        cfg = ScsConfig(0.05, 300, RiskParams(0.5), self.box, trace_every=7)
        trace_a, x_a = run(cfg, self.spec, self.ds, RngStream(11))
        trace_b, x_b = run(cfg, self.spec, self.ds, RngStream(11))
        np.testing.assert_equal(x_a, x_b)
        self.assertEqual(trace_a.to_csv(), trace_b.to_csv())

    def test_feasible_and_bounded_moves(self):
        box = Box.symmetric(0.5, self.ds.dim)
        cfg = ScsConfig(0.2, 500, RiskParams(0.7), box)
        trace, x_R = run(cfg, self.spec, self.ds, RngStream(5))
        self.assertTrue(box.contains(x_R))
        # every sampled direction is at most max ||subgradient|| in norm
        bound = np.max(np.linalg.norm(self.ds.features, axis=1)) + 0.05 * np.sqrt(self.ds.dim)
        self.assertTrue(np.all(trace.column('step_norm') <= cfg.tau * bound + 1e-12))
        self.assertEqual(trace.counts['subgradients'], 3 * cfg.iters)

    def test_kappa_zero_matches_projected_subgradient(self):
        cfg = ScsConfig(0.01, 1000, RiskParams(0.), self.box, trace_every=1)
        scs_trace, scs_x = run(cfg, self.spec, self.ds, RngStream(3))
        sgd_trace, sgd_x = projected_subgradient(cfg, self.spec, self.ds, RngStream(3))
        np.testing.assert_array_equal(scs_x, sgd_x)
        np.testing.assert_array_equal(scs_trace.column('F_hat'), sgd_trace.column('F_hat'))
        np.testing.assert_array_equal(scs_trace.column('step_norm'), sgd_trace.column('step_norm'))

    def test_tracker_is_unbiased_at_frozen_x(self):
        tau, burn_in, n = 0.1, 1000, 10000
        x = np.full(self.ds.dim, 0.3)
        h = mean_loss(self.spec, x, self.ds)
        losses = dataset_losses(self.spec, x, self.ds)
        draws = np.random.RandomState(9).randint(len(self.ds), size=(burn_in + n, 3))
        u, history = 0., []
        for k in range(burn_in + n):
            h_tilde = losses[draws[k]].mean()
            u = update_tracker(u, tau, h_tilde, np.zeros(self.ds.dim), x, x)
            if k >= burn_in:
                history.append(u - h)
        history = np.array(history)
        # AR(1) with coefficient 1 - tau inflates the variance of the mean by (2 - tau) / tau
        se = history.std() * np.sqrt((2 - tau) / tau / n)
        self.assertLess(abs(history.mean()), 3 * se)

    def test_tracking_error_scales_with_sqrt_tau(self):
        spec = LossSpec('logistic')
        rp = RiskParams(0.5)
        plateaus = {}
        for tau, iters in ((0.02, 4000), (0.01, 8000)):
            errors = []
            for seed in range(10):
                ds = logistic_dataset(seed)
                cfg = ScsConfig(tau, iters, rp, Box.symmetric(10., ds.dim), trace_every=10)
                trace, _ = run(cfg, spec, ds, RngStream(seed))
                err = trace.column('track_err')
                errors.append(err[len(err) // 2:].mean())
            plateaus[tau] = np.mean(errors)
        ratio = plateaus[0.02] / plateaus[0.01]
        self.assertGreaterEqual(ratio, 1.2)
        self.assertLessEqual(ratio, 2.0)


if __name__ == '__main__':
    unittest.main()
