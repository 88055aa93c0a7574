import numpy as np
from scipy.special import expit

from drscs.core import as_vector
from drscs.errors import ArgumentError, ConfigError

BASES = ('mad', 'least_squares', 'logistic')
PENALTIES = ('none', 'lasso', 'scad', 'mcp')


class PenaltyParams(object):
    def __init__(self, lam=1., gamma=3.):
        self.lam = float(lam)
        self.gamma = float(gamma)

    def __repr__(self):
        return f"PenaltyParams(lam={self.lam}, gamma={self.gamma})"


def check_penalty(kind, p):
    if kind not in PENALTIES:
        raise ConfigError(f"unknown penalty '{kind}', expected one of {PENALTIES}")
    if kind == 'none':
        return
    if not p.lam > 0:
        raise ConfigError(f"{kind} penalty needs lambda > 0, got {p.lam}")
    # gamma > 1 keeps every SCAD piece well defined (the classical choice is gamma > 2)
    if kind == 'scad' and not p.gamma > 1:
        raise ConfigError(f"scad penalty needs gamma > 1, got {p.gamma}")
    if kind == 'mcp' and not p.gamma > 0:
        raise ConfigError(f"mcp penalty needs gamma > 0, got {p.gamma}")


def _scalar_penalty(kind, p, x):
    lam, gamma = p.lam, p.gamma
    t = np.abs(x)
    if kind == 'lasso':
        return lam * t
    if kind == 'scad':
        return np.where(t <= lam, lam * t,
                        np.where(t <= lam * gamma,
                                 (gamma * lam * t - 0.5 * (t ** 2 + lam ** 2)) / (gamma - 1),
                                 lam ** 2 * (gamma + 1) / 2))
    if kind == 'mcp':
        return np.where(t <= lam * gamma, lam * t - t ** 2 / (2 * gamma), lam ** 2 * gamma / 2)
    return np.zeros_like(t)


def _scalar_penalty_derivative(kind, p, x):
    # The pieces meet with equal one-sided derivatives everywhere except at 0,
    # where sign(0) = 0 selects the midpoint of [-lam, lam].
    lam, gamma = p.lam, p.gamma
    t = np.abs(x)
    s = np.sign(x)
    if kind == 'lasso':
        return lam * s
    if kind == 'scad':
        return s * np.where(t <= lam, lam,
                            np.where(t <= lam * gamma, (gamma * lam - t) / (gamma - 1), 0.))
    if kind == 'mcp':
        return s * np.where(t <= lam * gamma, lam - t / gamma, 0.)
    return np.zeros_like(t)


def penalty_value(kind, p, x):
    check_penalty(kind, p)
    return float(np.sum(_scalar_penalty(kind, p, as_vector(x))))


def penalty_subgradient(kind, p, x):
    check_penalty(kind, p)
    return _scalar_penalty_derivative(kind, p, as_vector(x))


def penalty_modulus(kind, p):
    check_penalty(kind, p)
    if kind == 'scad':
        return 1. / (p.gamma - 1)
    if kind == 'mcp':
        return 1. / p.gamma
    return 0.


class LossSpec(object):
    """Per-sample loss base(x, (a, b)) + r(x) of a linear model a^T x."""

    def __init__(self, base='mad', penalty='none', params=None):
        if base not in BASES:
            raise ConfigError(f"unknown base loss '{base}', expected one of {BASES}")
        params = PenaltyParams() if params is None else params
        check_penalty(penalty, params)
        self.base = base
        self.penalty = penalty
        self.params = params

    @property
    def smooth_base(self):
        return self.base != 'mad'

    def __repr__(self):
        return f"LossSpec(base={self.base}, penalty={self.penalty}, {self.params})"


def _check_data(x, features, targets):
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != x.shape[0]:
        raise ArgumentError(f"features have dimension {features.shape[-1]}, parameters {x.shape[0]}")
    return features, np.asarray(targets, dtype=np.float64)


def _labels(targets):
    return np.where(targets > 0, 1., -1.)


def base_values_and_coefs(spec, x, features, targets):
    """Base losses and the scalar c with d(base)/dx = c a and d(base)/da = c x."""
    # row-wise reduction: a sample's value does not depend on the batch it is evaluated in
    z = np.sum(features * x, axis=-1)
    if spec.base == 'mad':
        r = z - targets
        return np.abs(r), np.sign(r)
    if spec.base == 'least_squares':
        r = z - targets
        return r ** 2, 2 * r
    y = _labels(targets)
    m = y * z
    return np.logaddexp(0., -m), -y * expit(-m)


def loss_values(spec, x, features, targets):
    x = as_vector(x)
    features, targets = _check_data(x, features, targets)
    values, _ = base_values_and_coefs(spec, x, features, targets)
    return values + float(np.sum(_scalar_penalty(spec.penalty, spec.params, x)))


def loss_subgradients(spec, x, features, targets):
    x = as_vector(x)
    features, targets = _check_data(x, features, targets)
    _, coefs = base_values_and_coefs(spec, x, features, targets)
    return coefs[..., None] * features + _scalar_penalty_derivative(spec.penalty, spec.params, x)


def loss_values_and_subgradients(spec, x, features, targets):
    x = as_vector(x)
    features, targets = _check_data(x, features, targets)
    values, coefs = base_values_and_coefs(spec, x, features, targets)
    values = values + float(np.sum(_scalar_penalty(spec.penalty, spec.params, x)))
    grads = coefs[..., None] * features + _scalar_penalty_derivative(spec.penalty, spec.params, x)
    return values, grads


def loss_value(spec, x, point):
    return float(loss_values(spec, x, point.features, point.target))


def loss_subgradient(spec, x, point):
    return loss_subgradients(spec, x, point.features, point.target)


def dataset_losses(spec, x, ds):
    return loss_values(spec, x, ds.features, ds.targets)


def mean_loss(spec, x, ds):
    """The inner function h(x) under the empirical distribution."""
    return float(np.mean(dataset_losses(spec, x, ds)))


def feature_gradient(spec, x, point):
    """Gradient of the base loss with respect to the features a."""
    x = as_vector(x)
    features, targets = _check_data(x, point.features, point.target)
    _, coef = base_values_and_coefs(spec, x, features, targets)
    return coef * x


def smoothness_bound(spec, ds):
    """Curvature bound of a smooth base over the data (0 for MAD)."""
    if not spec.smooth_base:
        return 0.
    scale = 2. if spec.base == 'least_squares' else 0.25
    return scale * float(np.max(np.sum(ds.features ** 2, axis=1)))


def weak_convexity_modulus(spec, ds=None):
    """Penalty modulus; with a dataset, smooth bases add their curvature bound."""
    delta = penalty_modulus(spec.penalty, spec.params)
    if ds is not None:
        delta += smoothness_bound(spec, ds)
    return delta


def lipschitz_bound(spec, ds, box):
    a = ds.features
    norms = np.sqrt(np.sum(a ** 2, axis=1))
    if spec.base == 'least_squares':
        hi = np.sum(np.maximum(a * box.lower, a * box.upper), axis=1) - ds.targets
        lo = np.sum(np.minimum(a * box.lower, a * box.upper), axis=1) - ds.targets
        base = 2 * np.maximum(np.abs(hi), np.abs(lo)) * norms
    else:
        base = norms
    pen = 0. if spec.penalty == 'none' else spec.params.lam * np.sqrt(box.dim)
    return float(np.max(base)) + pen
