import collections
import json
import math
import os
import tempfile
import time

import numpy as np

from drscs.errors import DataError

TRACE_FIELDS = ('k', 'F_hat', 'u', 'track_err', 'step_norm')
SPIDER_TRACE_FIELDS = TRACE_FIELDS + ('epoch', 'batch_size')
INTEGER_FIELDS = ('k', 'epoch', 'batch_size')


def format_number(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v) + 0.)  # no negative zeros


class RunTrace(object):
    """Thinned per-iteration records of a run plus evaluation counters."""

    def __init__(self, fields=TRACE_FIELDS):
        self.fields = tuple(fields)
        self.rows = []
        self.counts = collections.OrderedDict([('losses', 0), ('subgradients', 0)])

    def append(self, **row):
        self.rows.append(tuple(row[f] for f in self.fields))

    def column(self, name):
        i = self.fields.index(name)
        return np.array([row[i] for row in self.rows], dtype=np.float64)

    def __len__(self):
        return len(self.rows)

    def to_csv(self):
        lines = [','.join(self.fields)]
        lines += [','.join(format_number(v) for v in row) for row in self.rows]
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        if not lines:
            raise DataError("trace is empty, expected a header")
        fields = tuple(f.strip() for f in lines[0].split(','))
        if fields[:len(TRACE_FIELDS)] != TRACE_FIELDS:
            raise DataError(f"unexpected trace header {','.join(fields)}", row=1)
        trace = cls(fields)
        for number, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            cells = line.split(',')
            if len(cells) != len(fields):
                raise DataError(f"expected {len(fields)} columns, got {len(cells)}", row=number)
            try:
                row = tuple(int(c) if f in INTEGER_FIELDS else float(c) for f, c in zip(fields, cells))
            except ValueError:
                raise DataError(f"malformed trace row '{line}'", row=number)
            trace.rows.append(row)
        return trace


def atomic_write(path, text):
    """Writes ``text`` to a temporary sibling and moves it over ``path``."""
    path = str(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.' + os.path.basename(path) + '.')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class TrainLog(object):
    """Ordered k:v progress entries, printed as they come and saved as ndjson."""

    def __init__(self, verbose=True):
        self.verbose = verbose
        self.entries = []
        self.begin = time.time()

    def log(self, iteration, **values):
        entry = collections.OrderedDict()
        entry['iteration'] = int(iteration)
        entry['seconds'] = time.time() - self.begin
        for k, v in values.items():
            entry[k] = v.item() if isinstance(v, np.generic) else v
        self.entries.append(entry)

        if self.verbose:
            print_str = ""
            for k, v in entry.items():
                if isinstance(v, int):
                    print_str += "{}:{}\t".format(k, v)
                else:
                    print_str += "{}:{:.4f}\t".format(k, v)
            print(print_str[:-1])  # omit the last \t

    def to_ndjson(self, timestamps=False):
        """Entries as ndjson; wall-clock seconds are dropped unless asked for, keeping outputs reproducible."""
        lines = []
        for entry in self.entries:
            entry = collections.OrderedDict((k, v) for k, v in entry.items() if timestamps or k != 'seconds')
            lines.append(json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                                     for k, v in entry.items()}))
        return ''.join(line + '\n' for line in lines)

    def save(self, path, timestamps=False):
        atomic_write(path, self.to_ndjson(timestamps))
