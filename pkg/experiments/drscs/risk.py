import numpy as np

from drscs.errors import ArgumentError, CapacityError, ConfigError
from drscs.models import dataset_losses, loss_values_and_subgradients

MAX_ORACLE_SUPPORT = 20


class RiskParams(object):
    def __init__(self, kappa=0.):
        kappa = float(kappa)
        if not 0. <= kappa <= 1.:
            raise ConfigError(f"kappa must lie in [0, 1], got {kappa}")
        self.kappa = kappa

    def __repr__(self):
        return f"RiskParams(kappa={self.kappa})"


class FiniteDistribution(object):
    def __init__(self, values, probs=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] == 0:
            raise ArgumentError("distribution needs a nonempty vector of values")
        if probs is None:
            probs = np.full(values.shape[0], 1. / values.shape[0])
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != values.shape:
            raise ArgumentError(f"values {values.shape} and probs {probs.shape} differ in length")
        if np.any(probs < 0) or abs(np.sum(probs) - 1.) > 1e-12:
            raise ArgumentError("probs must be nonnegative and sum to one")
        self.values = values
        self.probs = probs

    def mean(self):
        return float(self.probs @ self.values)

    def __len__(self):
        return self.values.shape[0]


def mean_semideviation(d, rp):
    mean = d.mean()
    return mean + rp.kappa * float(d.probs @ np.maximum(0., d.values - mean))


def _vertex_chunks(n, chunk=1 << 14):
    shifts = np.arange(n)
    for start in range(0, 1 << n, chunk):
        ids = np.arange(start, min(start + chunk, 1 << n))
        yield (ids[:, None] >> shifts) & 1


def _best_vertex(d, rp):
    if len(d) > MAX_ORACLE_SUPPORT:
        raise CapacityError(f"oracle support {len(d)} exceeds {MAX_ORACLE_SUPPORT} points")
    # E[Z (1 + xi - E[xi])] = E[Z] + sum_i p_i xi_i (Z_i - E[Z]) is linear in xi,
    # so its maximum over [0, kappa]^n is attained at a vertex.
    weights = d.probs * (d.values - d.mean())
    best_value, best_bits = -np.inf, None
    for bits in _vertex_chunks(len(d)):
        scores = rp.kappa * (bits @ weights)
        i = int(np.argmax(scores))
        if scores[i] > best_value:
            best_value, best_bits = scores[i], bits[i]
    return d.mean() + float(best_value), rp.kappa * best_bits.astype(np.float64)


def dual_value_oracle(d, rp):
    """Brute-force maximization of E[mu Z] over the vertices of the ambiguity set."""
    value, _ = _best_vertex(d, rp)
    return value


def worst_case_distortion(d, rp):
    _, xi = _best_vertex(d, rp)
    return 1. + xi - float(d.probs @ xi)


def distortion_density(d, rp):
    """Closed-form maximizing density: xi_i = kappa where Z_i exceeds the mean."""
    xi = np.where(d.values > d.mean(), rp.kappa, 0.)
    return 1. + xi - float(d.probs @ xi)


def loss_distribution(spec, x, ds):
    """The distribution of l(x, D) under the empirical measure."""
    return FiniteDistribution(dataset_losses(spec, x, ds), ds.probs)


def composite_objective(spec, x, ds, rp):
    """F(x) = f(x, h(x))."""
    return mean_semideviation(loss_distribution(spec, x, ds), rp)


def composite_subgradient(spec, x, ds, rp):
    """F(x) and the subgradient sum_i p_i mu_i g_i for the maximizing density mu."""
    values, grads = loss_values_and_subgradients(spec, x, ds.features, ds.targets)
    d = FiniteDistribution(values, ds.probs)
    mu = distortion_density(d, rp)
    return mean_semideviation(d, rp), (d.probs * mu) @ grads


def outer_value(spec, x, u, ds, rp):
    """f(x, u) = E[u + kappa max(0, l(x, D) - u)]."""
    losses = dataset_losses(spec, x, ds)
    return float(u + rp.kappa * np.mean(np.maximum(0., losses - u)))
