"""Test-time attacks on linear models and summaries of the resulting loss distributions."""
import numpy as np
import tqdm

from drscs.core import DataPoint, Dataset, as_vector
from drscs.errors import ArgumentError, ConfigError
from drscs.models import dataset_losses, feature_gradient

ATTACKS = ('semidev', 'pgm')
ANCHORS = ('current', 'original')
LOG_FLOOR = 1e-12


class AttackConfig(object):
    def __init__(self, kind='semidev', kappa_adv=1., eps_adv=0.1, tau_adv=1., iters=10, anchor='current'):
        if kind not in ATTACKS:
            raise ConfigError(f"unknown attack '{kind}', expected one of {ATTACKS}")
        if kind == 'semidev' and not kappa_adv >= 0:
            raise ConfigError(f"kappa_adv must be nonnegative, got {kappa_adv}")
        if kind == 'pgm':
            if not eps_adv > 0 or not tau_adv > 0:
                raise ConfigError(f"pgm needs eps_adv > 0 and tau_adv > 0, got {eps_adv}, {tau_adv}")
            if int(iters) < 0:
                raise ConfigError(f"pgm iterations must be nonnegative, got {iters}")
            if anchor not in ANCHORS:
                raise ConfigError(f"unknown pgm anchor '{anchor}', expected one of {ANCHORS}")
        self.kind = kind
        self.kappa_adv = float(kappa_adv)
        self.eps_adv = float(eps_adv)
        self.tau_adv = float(tau_adv)
        self.iters = int(iters)
        self.anchor = anchor

    def at_level(self, level):
        """The same attack with kappa_adv (semidev) or eps_adv (pgm) set to ``level``."""
        if self.kind == 'semidev':
            return AttackConfig(self.kind, kappa_adv=level)
        return AttackConfig(self.kind, eps_adv=level, tau_adv=self.tau_adv, iters=self.iters, anchor=self.anchor)

    def __repr__(self):
        if self.kind == 'semidev':
            return f"AttackConfig(semidev, kappa_adv={self.kappa_adv})"
        return (f"AttackConfig(pgm, eps_adv={self.eps_adv}, tau_adv={self.tau_adv}, iters={self.iters}, "
                f"anchor={self.anchor})")


def semidev_attack_losses(spec, x, ds, kappa_adv):
    """l_bar + kappa_adv max(0, l_i - l_bar) with l_bar the mean test loss."""
    if len(ds) == 0:
        raise ArgumentError("cannot attack an empty dataset")
    losses = dataset_losses(spec, x, ds)
    mean = float(np.mean(losses))
    return mean + kappa_adv * np.maximum(0., losses - mean)


def _project_ball(center, radius, a):
    diff = a - center
    norm = np.linalg.norm(diff)
    if norm <= radius:
        return a
    return center + diff * (radius / norm)


def pgm_attack_point(spec, x, point, cfg):
    """Projected gradient ascent on the loss over the features of one point."""
    x = as_vector(x)
    origin = as_vector(point.features, x.shape[0], 'features')
    a = origin
    for _ in range(cfg.iters):
        g = feature_gradient(spec, x, DataPoint(a, point.target))
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        center = a if cfg.anchor == 'current' else origin
        a = _project_ball(center, cfg.eps_adv, a + cfg.tau_adv * cfg.eps_adv * g / norm)
    return DataPoint(a, point.target)


def pgm_attack(spec, x, ds, cfg, verbose=False):
    """The attacked dataset and its per-point losses."""
    points = [pgm_attack_point(spec, x, ds.point(i), cfg) for i in tqdm.trange(len(ds), disable=not verbose)]
    attacked = Dataset.from_points(points)
    return attacked, dataset_losses(spec, x, attacked)


def attack_losses(spec, x, ds, cfg, verbose=False):
    if cfg.kind == 'semidev':
        return semidev_attack_losses(spec, x, ds, cfg.kappa_adv)
    return pgm_attack(spec, x, ds, cfg, verbose)[1]


def attack_sweep(spec, x, ds, cfg, levels, verbose=False):
    """(level, mean attacked loss) for each perturbation level."""
    return [(float(level), float(np.mean(attack_losses(spec, x, ds, cfg.at_level(level)))))
            for level in tqdm.tqdm(levels, disable=not verbose)]


def loss_histogram(losses, bins, floor=LOG_FLOOR):
    """Counts and bin edges of ln(max(loss, floor))."""
    if int(bins) < 1:
        raise ArgumentError(f"histogram needs a positive number of bins, got {bins}")
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        lo = np.log(floor)
        return np.zeros(bins, dtype=np.int64), np.linspace(lo, lo + 1., bins + 1)
    return np.histogram(np.log(np.maximum(losses, floor)), bins=int(bins))


def clean_and_attacked(spec, x, ds, cfg, verbose=False):
    """Per-point (clean, attacked) loss table."""
    clean = dataset_losses(spec, x, ds)
    return np.stack([clean, attack_losses(spec, x, ds, cfg, verbose)], axis=1)
