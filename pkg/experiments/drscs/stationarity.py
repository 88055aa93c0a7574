"""Moreau-envelope stationarity probe for F plus the box indicator.

For lam * rho < 1 the prox subproblem

    psi(y) = F(y) + ||y - x||^2 / (2 lam),  y in box,

is (1/lam - rho)-strongly convex. prox() solves it with full-batch subgradients and only
returns a point whose squared distance to the exact prox is certified to be below ``tol``.
"""
from collections import namedtuple

import numpy as np
import tqdm

from drscs.core import as_vector, project
from drscs.errors import ConfigError, ConvergenceError, NumericError
from drscs.models import weak_convexity_modulus
from drscs.risk import composite_subgradient

StationarityReport = namedtuple('StationarityReport',
                                ['x_hat', 'grad_norm', 'phi_at_xhat', 'dist_to_xhat', 'envelope'])

POLISH_EVERY = 10
BISECTION_STEPS = 200


def rho(kappa, delta):
    """Weak-convexity modulus of F when every loss is delta-weakly convex."""
    return (1 + 2 * kappa) * delta


def rho_bar(kappa, delta):
    return rho(kappa, delta) + (1 + kappa) * delta


class MoreauProbe(object):
    def __init__(self, lam, box, budget=5000, tol=1e-6):
        if not lam > 0:
            raise ConfigError(f"probe lambda must be positive, got {lam}")
        if int(budget) < 1:
            raise ConfigError(f"probe budget must be positive, got {budget}")
        if not tol > 0:
            raise ConfigError(f"probe tolerance must be positive, got {tol}")
        self.lam = float(lam)
        self.box = box
        self.budget = int(budget)
        self.tol = float(tol)

    @classmethod
    def default(cls, box, spec, ds, rp, delta=None, **kwargs):
        """lam = 1 / rho_bar, or 1 for a convex objective."""
        delta = weak_convexity_modulus(spec, ds) if delta is None else delta
        r = rho_bar(rp.kappa, delta)
        return cls(1. / r if r > 0 else 1., box, **kwargs)

    def __repr__(self):
        return f"MoreauProbe(lam={self.lam}, {self.box}, budget={self.budget}, tol={self.tol})"


def _subproblem(spec, ds, rp, x, lam):
    def psi(y):
        F, g = composite_subgradient(spec, y, ds, rp)
        diff = y - x
        value = F + float(diff @ diff) / (2 * lam)
        v = g + diff / lam
        if not (np.isfinite(value) and np.all(np.isfinite(v))):
            raise NumericError("non-finite prox subproblem", norm=float(np.linalg.norm(v)))
        return value, v
    return psi


def _residual(box, y, v):
    """Norm of the least-norm element of v + N_box(y)."""
    r = np.where((y <= box.lower) & (v > 0), 0., v)
    r = np.where((y >= box.upper) & (r < 0), 0., r)
    return float(np.linalg.norm(r))


def _bisect(psi, box):
    lo, hi = float(box.lower[0]), float(box.upper[0])
    if psi(np.array([lo]))[1][0] >= 0:
        return np.array([lo])
    if psi(np.array([hi]))[1][0] <= 0:
        return np.array([hi])
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = psi(np.array([mid]))[1][0]
        if s > 0:
            hi = mid
        elif s < 0:
            lo = mid
        else:
            return np.array([mid])
    return np.array([0.5 * (lo + hi)])


def _check(probe, spec, ds, rp, delta):
    delta = weak_convexity_modulus(spec, ds) if delta is None else delta
    r = rho(rp.kappa, delta)
    if probe.lam * r >= 1:
        raise ConfigError(f"probe needs lambda * rho < 1, got lambda={probe.lam}, rho={r}")
    return 1. / probe.lam - r


def prox(probe, spec, ds, rp, x, delta=None, verbose=False):
    """Certified approximate prox of lam (F + box indicator) at x."""
    box = probe.box
    x = as_vector(x, box.dim)
    mu = _check(probe, spec, ds, rp, delta)
    psi = _subproblem(spec, ds, rp, x, probe.lam)
    if box.dim == 1:
        return _bisect(psi, box)

    y = project(box, x)
    best_y, (best_val, best_v) = y, psi(y)
    # aggregated lower model sum_t w_t (psi_t + v_t (z - y_t) + mu/2 ||z - y_t||^2) / W
    S0, S1, W = 0., np.zeros(box.dim), 0.
    gap = np.inf
    for t in tqdm.trange(1, probe.budget + 1, disable=not verbose):
        val, v = psi(y)
        if val < best_val:
            best_y, best_val, best_v = y, val, v
        S0 += t * (val - float(v @ y) + 0.5 * mu * float(y @ y))
        S1 += t * (v - mu * y)
        W += t

        if t == 1 or t % POLISH_EVERY == 0:
            # fixed point of y = P(x - lam s(y)) at the exact prox
            s = best_v - (best_y - x) / probe.lam
            candidate = project(box, x - probe.lam * s)
            c_val, c_v = psi(candidate)
            if c_val < best_val:
                best_y, best_val, best_v = candidate, c_val, c_v

        c = S1 / W
        z = project(box, -c / mu)
        lower = S0 / W + float(c @ z) + 0.5 * mu * float(z @ z)
        gap = max(best_val - lower, 0.)
        dist2 = min(2 * gap / mu, (_residual(box, best_y, best_v) / mu) ** 2)
        if dist2 <= probe.tol:
            return best_y
        y = project(box, y - 2. / (mu * (t + 1)) * v)

    raise ConvergenceError(f"prox not certified within {probe.budget} iterations (gap {gap:.3g})",
                           best=best_y, gap=gap)


def report_at(probe, spec, ds, rp, x, x_hat):
    x_hat = as_vector(x_hat)
    diff = x - x_hat
    dist = float(np.linalg.norm(diff))
    F_hat, _ = composite_subgradient(spec, x_hat, ds, rp)
    return StationarityReport(x_hat=x_hat, grad_norm=dist / probe.lam, phi_at_xhat=F_hat, dist_to_xhat=dist,
                              envelope=F_hat + dist ** 2 / (2 * probe.lam))


def moreau_gradient(probe, spec, ds, rp, x, delta=None, verbose=False):
    """grad phi_lam(x) = (x - prox(x)) / lam, reported by its norm."""
    x = as_vector(x, probe.box.dim)
    x_hat = prox(probe, spec, ds, rp, x, delta, verbose)
    return report_at(probe, spec, ds, rp, x, x_hat)
