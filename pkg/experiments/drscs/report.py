"""Plot-ready comma-separated tables from trace, summary and attack files."""
from pathlib import Path

import numpy as np

from drscs.errors import DataError
from drscs.robusteval import loss_histogram
from drscs.utils.trace import RunTrace, atomic_write, format_number


def read_trace(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    try:
        return RunTrace.from_csv(text)
    except DataError as e:
        raise DataError(f"{path}: {e}")


def read_summary(path):
    """``key = value`` lines as a dict of strings."""
    summary = {}
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        key, sep, value = line.partition('=')
        if sep:
            summary[key.strip()] = value.strip()
    return summary


def cumulative_draws(summary, k):
    """Data points drawn up to and including iteration k."""
    steps = k + 1
    algo = summary['algo']
    if algo == 'sgd':
        return steps
    if algo == 'scs':
        return int(summary['pilot']) + 3 * steps
    T, B, b = (int(summary[key]) for key in ('spider_epoch', 'spider_large', 'spider_small'))
    restarts = k // T + 1
    return restarts * B + (steps - restarts) * b + 2 * steps


def _table(header, rows):
    return '\n'.join([','.join(header)] + [','.join(format_number(v) for v in row) for row in rows]) + '\n'


def history_table(traces, names, column='F_hat', thin=1, summaries=None):
    """Side-by-side ``column`` of several traces at the iterations they all recorded."""
    if thin < 1:
        raise DataError(f"thinning must be positive, got {thin}")
    columns = []
    for trace, name in zip(traces, names):
        if column not in trace.fields:
            raise DataError(f"trace {name} has no column {column}")
        ks = [row[0] for row in trace.rows]
        columns.append(dict(zip(ks, trace.column(column))))
    common = sorted(set.intersection(*(set(c) for c in columns))) if columns else []
    common = common[::thin]

    header = ['k'] + list(names)
    summaries = summaries or [None] * len(traces)
    header += [f'draws_{name}' for name, s in zip(names, summaries) if s is not None]
    rows = []
    for k in common:
        row = [k] + [c[k] for c in columns]
        row += [cumulative_draws(s, k) for s in summaries if s is not None]
        rows.append(row)
    return _table(header, rows)


def grad_norm_table(summaries):
    """grad-norm at x^R against the iteration budget N."""
    rows = []
    for s in summaries:
        if 'grad_norm' not in s:
            raise DataError(f"summary of seed {s.get('seed')} has no grad_norm; train with --probe-every")
        rows.append((int(s['iters']), float(s['grad_norm'])))
    return _table(('N', 'grad_norm'), sorted(rows))


def losses_csv(table):
    return _table(('i', 'clean', 'attacked'), [(i, c, a) for i, (c, a) in enumerate(table)])


def histogram_csv(counts, edges):
    return _table(('bin_lo', 'bin_hi', 'count'),
                  [(lo, hi, int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)])


def sweep_csv(rows):
    return _table(('level', 'mean_loss'), rows)


def read_attacked_losses(path):
    lines = Path(path).read_text(encoding='utf-8').splitlines()
    if not lines or lines[0].split(',') != ['i', 'clean', 'attacked']:
        raise DataError(f"{path}: expected header i,clean,attacked", row=1)
    losses = []
    for number, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            losses.append(float(line.split(',')[2]))
        except (ValueError, IndexError):
            raise DataError(f"{path}: malformed row '{line}'", row=number)
    return np.array(losses)


def add_arguments(parser):
    parser.add_argument('traces', nargs='*', help="trace.csv files shown side by side.")
    parser.add_argument('--names', help="Comma-separated column names (default: parent directory names).")
    parser.add_argument('--column', default='F_hat', help="Trace column, e.g. F_hat or track_err.")
    parser.add_argument('--thin', type=int, default=1)
    parser.add_argument('--draws', action='store_true', help="Add cumulative draws from each summary.txt.")
    parser.add_argument('--summaries', nargs='+', help="Run directories for the grad-norm vs N table.")
    parser.add_argument('--histogram', help="attack_losses.csv to bin by log-loss.")
    parser.add_argument('--bins', type=int, default=20)
    parser.add_argument('--output', help="Output path (default stdout).")


def run_report(args):
    tables = []
    if args.traces or not (args.summaries or args.histogram):
        names = args.names.split(',') if args.names else [Path(p).parent.name or Path(p).stem for p in args.traces]
        if len(names) != len(args.traces):
            raise DataError(f"{len(names)} names for {len(args.traces)} traces")
        traces = [read_trace(p) for p in args.traces]
        summaries = [read_summary(Path(p).parent / 'summary.txt') for p in args.traces] if args.draws else None
        tables.append(history_table(traces, names, args.column, args.thin, summaries))
    if args.summaries:
        tables.append(grad_norm_table([read_summary(Path(d) / 'summary.txt') for d in args.summaries]))
    if args.histogram:
        counts, edges = loss_histogram(read_attacked_losses(args.histogram), args.bins)
        tables.append(histogram_csv(counts, edges))

    text = '\n'.join(tables)
    if args.output:
        atomic_write(args.output, text)
    else:
        print(text, end='')
