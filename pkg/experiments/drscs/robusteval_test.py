import unittest

import numpy as np

from drscs.core import DataPoint, Dataset, RngStream
from drscs.errors import ArgumentError, ConfigError
from drscs.linearized_test import linear_dataset
from drscs.models import LossSpec, PenaltyParams, dataset_losses, loss_value
from drscs.risk import RiskParams, composite_objective
from drscs.robusteval import AttackConfig, attack_sweep, clean_and_attacked, loss_histogram, pgm_attack, \
    pgm_attack_point, semidev_attack_losses


class SemidevAttackTestCase(unittest.TestCase):
    def setUp(self):
        self.spec = LossSpec('mad')
        # losses |x - b| at x = 0 are (0, 2)
        self.ds = Dataset([[1.], [1.]], [0., 2.])
        self.x = np.zeros(1)

    def test_examples(self):
        np.testing.assert_allclose(semidev_attack_losses(self.spec, self.x, self.ds, 1.), [1., 2.])
        np.testing.assert_allclose(semidev_attack_losses(self.spec, self.x, self.ds, 0.), [1., 1.])

    def test_mean_is_mean_semideviation(self):
        ds = linear_dataset(0, n=50)
        spec = LossSpec('mad', 'lasso', PenaltyParams(0.1))
        x = np.full(ds.dim, 0.2)
        for kappa in (0., 0.3, 1.):
            attacked = semidev_attack_losses(spec, x, ds, kappa)
            self.assertAlmostEqual(attacked.mean(), composite_objective(spec, x, ds, RiskParams(kappa)), places=12)

    def test_never_below_mean_and_monotone(self):
        ds = linear_dataset(1, n=50)
        spec = LossSpec('least_squares')
        x = np.full(ds.dim, -0.1)
        mean = dataset_losses(spec, x, ds).mean()
        previous = None
        for kappa in np.linspace(0, 2, 9):
            attacked = semidev_attack_losses(spec, x, ds, kappa)
            self.assertTrue(np.all(attacked >= mean - 1e-12))
            if previous is not None:
                self.assertTrue(np.all(attacked >= previous))
            previous = attacked


class PgmAttackTestCase(unittest.TestCase):
    def setUp(self):
        self.spec = LossSpec('mad')
        self.x = np.array([1., -2., 0.5])
        self.point = DataPoint(np.array([0.3, 0.1, -0.2]), 1.)

    def test_zero_iterations(self):
        cfg = AttackConfig('pgm', eps_adv=0.5, iters=0)
        np.testing.assert_array_equal(pgm_attack_point(self.spec, self.x, self.point, cfg).features,
                                      self.point.features)

    def test_zero_gradient(self):
        cfg = AttackConfig('pgm', eps_adv=0.5, iters=5)
        point = DataPoint(np.array([1., 0., 0.]), 1.)
        np.testing.assert_array_equal(pgm_attack_point(self.spec, self.x, point, cfg).features, point.features)

    def test_increases_mad_loss(self):
        cfg = AttackConfig('pgm', eps_adv=0.1, tau_adv=1., iters=5)
        attacked = pgm_attack_point(self.spec, self.x, self.point, cfg)
        self.assertEqual(attacked.target, self.point.target)
        clean = loss_value(self.spec, self.x, self.point)
        # the residual sign stays negative, each step adds eps ||x|| to the loss
        self.assertAlmostEqual(loss_value(self.spec, self.x, attacked),
                               clean + 5 * 0.1 * np.linalg.norm(self.x))

    def test_drift_bounds(self):
        rng = np.random.RandomState(0)
        spec = LossSpec('logistic')
        for anchor, bound in (('current', 7 * 0.2), ('original', 0.2)):
            cfg = AttackConfig('pgm', eps_adv=0.2, tau_adv=2., iters=7, anchor=anchor)
            for _ in range(50):
                x = rng.normal(size=4)
                point = DataPoint(rng.uniform(-1, 1, size=4), rng.choice([-1., 1.]))
                attacked = pgm_attack_point(spec, x, point, cfg)
                self.assertLessEqual(np.linalg.norm(attacked.features - point.features), bound + 1e-12)

    def test_dataset_attack(self):
        ds = linear_dataset(2, n=30)
        x = np.full(ds.dim, 0.4)
        attacked, losses = pgm_attack(LossSpec('least_squares'), x, ds, AttackConfig('pgm', eps_adv=0.05, iters=3))
        self.assertEqual(len(attacked), len(ds))
        np.testing.assert_array_equal(attacked.targets, ds.targets)
        self.assertTrue(np.all(losses >= dataset_losses(LossSpec('least_squares'), x, ds) - 1e-12))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            AttackConfig('fgsm')
        with self.assertRaises(ConfigError):
            AttackConfig('pgm', eps_adv=0.)
        with self.assertRaises(ConfigError):
            AttackConfig('pgm', anchor='center')
        with self.assertRaises(ConfigError):
            AttackConfig('semidev', kappa_adv=-1.)


class SweepTestCase(unittest.TestCase):
    def test_semidev_sweep_is_nondecreasing(self):
        ds = linear_dataset(3, n=40)
        x = np.zeros(ds.dim)
        rows = attack_sweep(LossSpec('mad'), x, ds, AttackConfig('semidev'), [0., 0.5, 1.])
        self.assertEqual([level for level, _ in rows], [0., 0.5, 1.])
        means = [m for _, m in rows]
        self.assertEqual(means, sorted(means))

    def test_table(self):
        ds = linear_dataset(4, n=10)
        table = clean_and_attacked(LossSpec('mad'), np.zeros(ds.dim), ds, AttackConfig('semidev', kappa_adv=0.))
        self.assertEqual(table.shape, (10, 2))
        np.testing.assert_allclose(table[:, 1], table[:, 0].mean())


class HistogramTestCase(unittest.TestCase):
    def test_equal_losses(self):
        counts, edges = loss_histogram(np.full(7, 2.), 5)
        self.assertEqual(np.count_nonzero(counts), 1)
        self.assertEqual(len(edges), 6)

    def test_counts(self):
        losses = RngStream(0).uniform(0., 3., size=100)
        counts, _ = loss_histogram(np.append(losses, 0.), 10)
        self.assertEqual(counts.sum(), 101)

    def test_empty(self):
        counts, edges = loss_histogram([], 4)
        np.testing.assert_array_equal(counts, 0)
        self.assertAlmostEqual(edges[0], np.log(1e-12))
        self.assertAlmostEqual(edges[-1], np.log(1e-12) + 1.)

    def test_invalid_bins(self):
        with self.assertRaises(ArgumentError):
            loss_histogram([1.], 0)


if __name__ == '__main__':
    unittest.main()
