"""Stochastic compositional subgradient method with SPIDER inner-value tracking."""
import math
from collections import namedtuple

import numpy as np
import tqdm

from drscs.core import project, sample_indices
from drscs.errors import ArgumentError, ConfigError, NumericError
from drscs.linearized import ScsConfig, _estimates, record, update_solution
from drscs.models import loss_values, loss_values_and_subgradients
from drscs.utils.trace import SPIDER_TRACE_FIELDS, RunTrace

SpiderState = namedtuple('SpiderState', ['x', 'x_prev', 'u', 'k'])

LIPSCHITZ_INFLATION = 1.5


class SpiderConfig(ScsConfig):
    def __init__(self, tau, iters, epoch, large_batch, small_batch, risk=None, box=None, seed=0, x0=None,
                 trace_every=1, full_restart=False):
        super(SpiderConfig, self).__init__(tau, iters, risk, box, seed, x0, trace_every)
        epoch, large_batch, small_batch = int(epoch), int(large_batch), int(small_batch)
        if epoch < 1:
            raise ConfigError(f"epoch length T must be positive, got {epoch}")
        if not large_batch >= small_batch >= 1:
            raise ConfigError(f"batch sizes need B >= b >= 1, got B={large_batch}, b={small_batch}")
        self.epoch = epoch
        self.large_batch = large_batch
        self.small_batch = small_batch
        # restart on the whole dataset instead of a sampled batch of size B
        self.full_restart = full_restart


def _ceil(v):
    # guard against 199.99999999999997 style noise before taking the ceiling
    return int(math.ceil(round(v, 9)))


def auto_params(sigma, L, M, tau):
    """(B, b, T) from B = 2 sigma^2 / tau^2, b = 2 L M sigma / tau, T = sigma / (L M tau)."""
    for name, v in (('sigma', sigma), ('L', L), ('M', M), ('tau', tau)):
        if not v > 0:
            raise ConfigError(f"{name} must be positive, got {v}")
    B = max(1, _ceil(2 * sigma ** 2 / tau ** 2))
    b = max(1, _ceil(2 * L * M * sigma / tau))
    T = max(1, _ceil(sigma / (L * M * tau)))
    # a larger B only shrinks the restart variance, so B >= b is restored by raising B
    return max(B, b), b, T


def _batch_losses(spec, x, batch):
    if len(batch) == 0:
        raise ArgumentError("tracker batch is empty")
    return loss_values(spec, x, batch.features, batch.targets)


def restart_tracker(spec, x, batch):
    return float(np.mean(_batch_losses(spec, x, batch)))


def refresh_tracker(spec, u_prev, x, x_prev, batch):
    return u_prev + float(np.mean(_batch_losses(spec, x, batch) - _batch_losses(spec, x_prev, batch)))


def estimate_constants(spec, ds, box, rng, pilot, kappa=1., x0=None):
    """Pilot estimates (sigma_hat, L_hat, M_hat) of the constants in the SPIDER schedule."""
    if pilot < 16:
        raise ConfigError(f"pilot must draw at least 16 samples, got {pilot}")
    x0 = project(box, np.zeros(box.dim) if x0 is None else x0)
    idx = sample_indices(ds, rng, pilot)
    features, targets = ds.features[idx], ds.targets[idx]

    losses = loss_values(spec, x0, features, targets)
    sigma = max(float(np.std(losses, ddof=1)), np.finfo(np.float64).eps)

    xs, ys = box.uniform(rng, pilot), box.uniform(rng, pilot)
    ratios = []
    grad_norms = []
    for x, y, a, b in zip(xs, ys, features[:, None], targets[:, None]):
        dist = np.linalg.norm(x - y)
        lx, g = loss_values_and_subgradients(spec, x, a, b)
        ly = loss_values(spec, y, a, b)
        if dist > 0:
            ratios.append(abs(lx[0] - ly[0]) / dist)
        grad_norms.append(np.linalg.norm(g[0]))
    L = LIPSCHITZ_INFLATION * max(max(ratios, default=0.), max(grad_norms))
    delta_h = LIPSCHITZ_INFLATION * max(grad_norms)
    delta_fx = kappa * delta_h
    M = math.sqrt((delta_fx + delta_h) ** 2 + 2 * sigma ** 2 + 2 * sigma * delta_h)
    return sigma, L, M


def run(cfg, spec, ds, rng, verbose=False, callback=None):
    """Runs the method for cfg.iters steps and returns (trace, x^R)."""
    n = cfg.iters
    kappa = cfg.risk.kappa
    d1 = sample_indices(ds, rng.substream('d1'), n)
    d2 = sample_indices(ds, rng.substream('d2'), n)
    batch_rng = rng.substream('batch')
    R = int(rng.substream('output').integers(n))

    x = cfg.initial_point()
    state = SpiderState(x, x, None, 0)
    trace = RunTrace(SPIDER_TRACE_FIELDS)
    x_R = x

    for k in tqdm.trange(n, disable=not verbose):
        if k % cfg.epoch == 0:
            batch = ds if cfg.full_restart else ds.subset(sample_indices(ds, batch_rng, cfg.large_batch))
            u = restart_tracker(spec, state.x, batch)
            trace.counts['losses'] += len(batch)
        else:
            batch = ds.subset(sample_indices(ds, batch_rng, cfg.small_batch))
            u = refresh_tracker(spec, state.u, state.x, state.x_prev, batch)
            trace.counts['losses'] += 2 * len(batch)
        if not np.isfinite(u):
            raise NumericError("non-finite inner estimate", iteration=k)
        state = state._replace(u=u)
        if k == R:
            x_R = state.x
        if callback is not None:
            callback(k, state.x, state.u)

        idx = [d1[k], d2[k]]
        values, grads = loss_values_and_subgradients(spec, state.x, ds.features[idx], ds.targets[idx])
        est = _estimates(kappa, state.u, values, grads)
        x_new = update_solution(cfg.box, cfg.tau, state.x, est, k)
        trace.counts['losses'] += 1
        trace.counts['subgradients'] += 2
        if cfg.trace_every > 0 and k % cfg.trace_every == 0:
            record(trace, spec, ds, cfg.risk, k, state.x, state.u, float(np.linalg.norm(x_new - state.x)),
                   epoch=k // cfg.epoch, batch_size=len(batch))
        state = SpiderState(x_new, state.x, state.u, k + 1)

    return trace, x_R
