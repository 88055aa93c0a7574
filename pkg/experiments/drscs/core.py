from collections import namedtuple

import numpy as np

from drscs.errors import ArgumentError

# Substream keys are part of the reproducibility contract: a run's master seed
# spawns one independent Philox stream per key, so changing e.g. the SPIDER
# batch sizes never perturbs the D1/D2 draws.
STREAMS = {
    'd1': 1,
    'd2': 2,
    'd3': 3,
    'batch': 4,
    'output': 5,
    'init': 6,
    'pilot': 7,
    'data': 8,
    'split': 9,
    'attack': 10,
}

DataPoint = namedtuple('DataPoint', ['features', 'target'])


def as_vector(x, n=None, name='x'):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError(f"{name} must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ArgumentError(f"{name} has dimension {x.shape[0]}, expected {n}")
    return x


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


class Box(object):
    """The feasible set {x : lower <= x <= upper}."""

    def __init__(self, lower, upper):
        lower, upper = _frozen(lower), _frozen(upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ArgumentError(f"box bounds have shapes {lower.shape} and {upper.shape}")
        if np.any(lower > upper):
            raise ArgumentError("box lower bound exceeds upper bound")
        self.lower = lower
        self.upper = upper

    @classmethod
    def symmetric(cls, half_width, n):
        if half_width < 0:
            raise ArgumentError(f"box half-width must be nonnegative, got {half_width}")
        return cls(np.full(n, -float(half_width)), np.full(n, float(half_width)))

    @property
    def dim(self):
        return self.lower.shape[0]

    def contains(self, x):
        x = as_vector(x, self.dim)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def uniform(self, rng, size=None):
        """Points drawn uniformly from the box (infinite bounds are not supported)."""
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.lower, self.upper, size=shape)

    def __repr__(self):
        return f"Box(dim={self.dim})"


def project(box, x):
    x = as_vector(x, box.dim)
    return np.minimum(np.maximum(x, box.lower), box.upper)


class Dataset(object):
    """A finite sample with the uniform empirical distribution."""

    def __init__(self, features, targets):
        features = _frozen(features)
        targets = _frozen(targets)
        if features.ndim != 2 or targets.ndim != 1 or features.shape[0] != targets.shape[0]:
            raise ArgumentError(f"features {features.shape} and targets {targets.shape} do not match")
        if features.shape[0] == 0:
            raise ArgumentError("dataset is empty")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise ArgumentError("dataset contains non-finite values")
        self.features = features
        self.targets = targets

    @classmethod
    def from_points(cls, points):
        points = list(points)
        if not points:
            raise ArgumentError("dataset is empty")
        dims = {len(p.features) for p in points}
        if len(dims) != 1:
            raise ArgumentError(f"points have different feature dimensions {sorted(dims)}")
        return cls(np.array([p.features for p in points]), np.array([p.target for p in points]))

    def __len__(self):
        return self.targets.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def probs(self):
        return np.full(len(self), 1. / len(self))

    def point(self, i):
        return DataPoint(self.features[i], float(self.targets[i]))

    @property
    def points(self):
        return [self.point(i) for i in range(len(self))]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.targets[indices])

    def split(self, rng, test_fraction):
        """Deterministic shuffled split into (train, test)."""
        if not 0. <= test_fraction < 1.:
            raise ArgumentError(f"test fraction must lie in [0, 1), got {test_fraction}")
        order = rng.permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        if n_test == len(self):
            n_test -= 1
        if n_test == 0:
            return self, None
        return self.subset(np.sort(order[n_test:])), self.subset(np.sort(order[:n_test]))

    def __repr__(self):
        return f"Dataset(n={len(self)}, d={self.dim})"


class RngStream(object):
    """Seeded counter-based (Philox) generator; ``substream`` derives independent named children."""

    def __init__(self, seed, path=()):
        seed = int(seed)
        if seed < 0:
            raise ArgumentError(f"seed must be an unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(path)
        self.generator = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=self.path)))

    def substream(self, name):
        key = STREAMS[name] if isinstance(name, str) else int(name)
        return RngStream(self.seed, self.path + (key,))

    def integers(self, high, size=None):
        return self.generator.integers(0, high, size=size)

    def uniform(self, low=0., high=1., size=None):
        return self.generator.uniform(low, high, size=size)

    def normal(self, loc=0., scale=1., size=None):
        return self.generator.normal(loc, scale, size=size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def sample_indices(ds, rng, count):
    if count < 1:
        raise ArgumentError(f"sample count must be positive, got {count}")
    return rng.integers(len(ds), size=count)


def sample_iid(ds, rng, count):
    if len(ds) == 0:
        raise ArgumentError("cannot sample from an empty dataset")
    return [ds.point(i) for i in sample_indices(ds, rng, count)]
