from pathlib import Path

import numpy as np

from drscs.core import Dataset
from drscs.errors import ConfigError, DataError
from drscs.utils.hparams import HParams
from drscs.utils.trace import atomic_write, format_number

BLOG_FEEDBACK_URL = 'https://archive.ics.uci.edu/ml/machine-learning-databases/00304/BlogFeedback.zip'


def get_default_synthetic_hparams():
    return HParams(
        n=500,  # Number of samples.
        d=10,  # Feature dimension.
        noise=0.1,  # Scale of the Gaussian label noise.
        tail_fraction=0.1,  # Fraction of samples whose noise is multiplied.
        tail_multiplier=10.,  # Noise multiplier of the heavy-tail samples.
        weight_scale=1.,  # True weights are drawn uniformly from [-weight_scale, weight_scale].
        intercept=False,  # Make the last feature the constant 1.
        one_sided_tail=False,  # Heavy-tail noise is |noise| * tail_multiplier instead of noise * tail_multiplier.
    )


def check_synthetic(hps):
    for key in ('n', 'd'):
        if getattr(hps, key) < 1:
            raise ConfigError(f"synthetic {key} must be positive, got {getattr(hps, key)}")
    if hps.noise < 0 or hps.tail_multiplier <= 0 or hps.weight_scale < 0:
        raise ConfigError("synthetic noise, tail_multiplier and weight_scale must be nonnegative")
    if not 0. <= hps.tail_fraction < 1.:
        raise ConfigError(f"tail_fraction must lie in [0, 1), got {hps.tail_fraction}")


def true_weights(hps, rng):
    return rng.uniform(-hps.weight_scale, hps.weight_scale, size=hps.d)


def generate_synthetic(hps, rng, return_weights=False):
    """Uniform features in [-1, 1]^d, linear targets, Gaussian noise with a heavy-tailed fraction."""
    check_synthetic(hps)
    w = true_weights(hps, rng)
    a = rng.uniform(-1., 1., size=(hps.n, hps.d))
    noise = hps.noise * rng.normal(size=hps.n)
    tail = rng.permutation(hps.n)[:int(round(hps.tail_fraction * hps.n))]
    noise[tail] = (np.abs(noise[tail]) if hps.one_sided_tail else noise[tail]) * hps.tail_multiplier
    if hps.intercept:
        a[:, -1] = 1.
    ds = Dataset(a, np.sum(a * w, axis=-1) + noise)
    return (ds, w) if return_weights else ds


def _parse_row(line, number):
    try:
        return [float(c) for c in line.split(',')]
    except ValueError:
        raise DataError(f"malformed row '{line.strip()}'", row=number)


def parse_csv(text, name='<data>'):
    """Rows of comma-separated reals, last column the target; a non-numeric first row is a header."""
    if text.startswith('\ufeff'):
        text = text[1:]
    rows = []
    width = None
    for number, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if not rows and width is None:
            try:
                _parse_row(line, number)
            except DataError:
                width = len(line.split(','))
                continue
        row = _parse_row(line, number)
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataError(f"{name}: expected {width} columns, got {len(row)}", row=number)
        if not np.all(np.isfinite(row)):
            raise DataError(f"{name}: non-finite value", row=number)
        rows.append(row)
    if not rows:
        raise DataError(f"{name}: no data rows")
    if width < 2:
        raise DataError(f"{name}: need at least one feature column and a target column")
    rows = np.array(rows, dtype=np.float64)
    return Dataset(rows[:, :-1], rows[:, -1])


def load_csv(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8-sig')
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}")
    return parse_csv(text, str(path))


def to_csv(ds):
    header = ','.join([f'a_{i + 1}' for i in range(ds.dim)] + ['b'])
    lines = [header] + [','.join(format_number(v) for v in (*a, b)) for a, b in zip(ds.features, ds.targets)]
    return '\n'.join(lines) + '\n'


def save_csv(path, ds):
    atomic_write(path, to_csv(ds))


def blog_feedback(path=Path('.')):
    """The UCI Blog Feedback training table and its 60 daily test tables."""
    from observations import maybe_download_and_extract

    path = Path(path) / 'blog_feedback'
    maybe_download_and_extract(str(path), BLOG_FEEDBACK_URL)
    train = load_csv(path / 'blogData_train.csv')
    test_files = sorted(path.glob('blogData_test-*.csv'))
    if not test_files:
        raise DataError(f"no test tables found in {path}")
    print('Loaded Blog Feedback: {} training rows, {} test tables'.format(len(train), len(test_files)))
    return train, [load_csv(f) for f in test_files]
