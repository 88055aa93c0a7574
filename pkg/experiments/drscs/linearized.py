"""Stochastic compositional subgradient method with linearized inner-value tracking."""
from collections import namedtuple

import numpy as np
import tqdm

from drscs.core import as_vector, project, sample_indices
from drscs.errors import ConfigError, NumericError
from drscs.models import loss_values, loss_values_and_subgradients, mean_loss
from drscs.risk import RiskParams, composite_objective
from drscs.utils.trace import TRACE_FIELDS, RunTrace

PILOT_SIZE = 32

ScsState = namedtuple('ScsState', ['x', 'u', 'k'])
GatedEstimates = namedtuple('GatedEstimates', ['G', 'g_fx', 'g_fu', 'g_h', 'J', 'h_tilde', 'indicator'])


class ScsConfig(object):
    def __init__(self, tau, iters, risk=None, box=None, seed=0, x0=None, trace_every=1, pilot=PILOT_SIZE):
        tau = float(tau)
        if not 0. < tau <= 1.:
            raise ConfigError(f"tau must lie in (0, 1], got {tau}")
        if int(iters) < 1:
            raise ConfigError(f"iters must be positive, got {iters}")
        if box is None:
            raise ConfigError("a box constraint is required")
        self.tau = tau
        self.iters = int(iters)
        self.risk = RiskParams() if risk is None else risk
        self.box = box
        self.seed = int(seed)
        self.x0 = x0
        self.trace_every = int(trace_every)
        self.pilot = int(pilot)

    def initial_point(self):
        x0 = np.zeros(self.box.dim) if self.x0 is None else as_vector(self.x0, self.box.dim, 'x0')
        return project(self.box, x0)


def _gate(kappa, G, l1, u):
    # equality counts as l >= u
    indicator = 1 if l1 >= u else 0
    return kappa * indicator * G, 1. - kappa * indicator, indicator


def gated_estimates(spec, rp, x, u, D1, D2, D3=None):
    """Gated subgradient estimates from the samples D1, D2 (and D3 for the linearized tracker)."""
    points = [D1, D2] if D3 is None else [D1, D2, D3]
    features = np.array([p.features for p in points], dtype=np.float64)
    targets = np.array([p.target for p in points], dtype=np.float64)
    values, grads = loss_values_and_subgradients(spec, x, features, targets)
    return _estimates(rp.kappa, u, values, grads)


def _estimates(kappa, u, values, grads):
    g_fx, g_fu, indicator = _gate(kappa, grads[0], values[0], u)
    if len(values) == 3:
        J, h_tilde = grads[2], float(np.sum(values) / 3.)
    else:
        J, h_tilde = None, None
    return GatedEstimates(grads[0], g_fx, g_fu, grads[1], J, h_tilde, indicator)


def update_solution(box, tau, x, est, k=None):
    direction = est.g_fx + est.g_fu * est.g_h
    if not np.all(np.isfinite(direction)):
        raise NumericError("non-finite update direction", iteration=k, norm=float(np.linalg.norm(direction)))
    return project(box, x - tau * direction)


def update_tracker(u, tau, h_tilde, J, x_new, x):
    return u + tau * (h_tilde - u) + float(J @ (x_new - x))


def step(cfg, state, est):
    x_new = update_solution(cfg.box, cfg.tau, state.x, est, state.k)
    u_new = update_tracker(state.u, cfg.tau, est.h_tilde, est.J, x_new, state.x)
    if not np.isfinite(u_new):
        raise NumericError("non-finite inner estimate", iteration=state.k, h_tilde=est.h_tilde)
    return ScsState(x_new, u_new, state.k + 1)


def initial_tracker(spec, ds, x0, rng, size=PILOT_SIZE):
    """u0 as the mean loss at x0 over a pilot batch."""
    idx = sample_indices(ds, rng, size)
    return float(np.mean(loss_values(spec, x0, ds.features[idx], ds.targets[idx])))


def record(trace, spec, ds, rp, k, x, u, step_norm, **extra):
    h = mean_loss(spec, x, ds)
    trace.append(k=k, F_hat=composite_objective(spec, x, ds, rp), u=u, track_err=abs(u - h),
                 step_norm=step_norm, **extra)


def run(cfg, spec, ds, rng, verbose=False, callback=None):
    """Runs the method for cfg.iters steps and returns (trace, x^R)."""
    n = cfg.iters
    kappa = cfg.risk.kappa
    d1 = sample_indices(ds, rng.substream('d1'), n)
    d2 = sample_indices(ds, rng.substream('d2'), n)
    d3 = sample_indices(ds, rng.substream('d3'), n)
    R = int(rng.substream('output').integers(n))

    x = cfg.initial_point()
    state = ScsState(x, initial_tracker(spec, ds, x, rng.substream('init'), cfg.pilot), 0)
    trace = RunTrace(TRACE_FIELDS)
    trace.counts['losses'] += cfg.pilot
    x_R = x

    for k in tqdm.trange(n, disable=not verbose):
        if k == R:
            x_R = state.x
        if callback is not None:
            callback(k, state.x, state.u)
        idx = [d1[k], d2[k], d3[k]]
        values, grads = loss_values_and_subgradients(spec, state.x, ds.features[idx], ds.targets[idx])
        est = _estimates(kappa, state.u, values, grads)
        new_state = step(cfg, state, est)
        trace.counts['losses'] += 3
        trace.counts['subgradients'] += 3
        if cfg.trace_every > 0 and k % cfg.trace_every == 0:
            record(trace, spec, ds, cfg.risk, k, state.x, state.u, float(np.linalg.norm(new_state.x - state.x)))
        state = new_state

    return trace, x_R


def projected_subgradient(cfg, spec, ds, rng, verbose=False, callback=None):
    """Plain projected stochastic subgradient method on the D2 stream, with the same x0 and R."""
    n = cfg.iters
    d2 = sample_indices(ds, rng.substream('d2'), n)
    R = int(rng.substream('output').integers(n))

    x = cfg.initial_point()
    trace = RunTrace(TRACE_FIELDS)
    x_R = x
    for k in tqdm.trange(n, disable=not verbose):
        if k == R:
            x_R = x
        if callback is not None:
            callback(k, x, float('nan'))
        idx = [d2[k]]
        _, grads = loss_values_and_subgradients(spec, x, ds.features[idx], ds.targets[idx])
        g = grads[0]
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite subgradient", iteration=k)
        x_new = project(cfg.box, x - cfg.tau * g)
        trace.counts['subgradients'] += 1
        if cfg.trace_every > 0 and k % cfg.trace_every == 0:
            trace.append(k=k, F_hat=composite_objective(spec, x, ds, cfg.risk), u=float('nan'),
                         track_err=float('nan'), step_norm=float(np.linalg.norm(x_new - x)))
        x = x_new
    return trace, x_R
