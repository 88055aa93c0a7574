import json
import os
import tempfile
import unittest

from drscs.errors import DataError
from drscs.utils.trace import SPIDER_TRACE_FIELDS, RunTrace, TrainLog, atomic_write, format_number


class FormatTestCase(unittest.TestCase):
    def test_numbers(self):
        self.assertEqual(format_number(3), '3')
        self.assertEqual(format_number(0.1), '0.1')
        self.assertEqual(format_number(-0.), '0.0')
        self.assertEqual(format_number(1 / 3), '0.3333333333333333')


class RunTraceTestCase(unittest.TestCase):
    def test_csv(self):
        trace = RunTrace(SPIDER_TRACE_FIELDS)
        trace.append(k=0, F_hat=1.5, u=1., track_err=0.5, step_norm=0.25, epoch=0, batch_size=10)
        trace.append(k=1, F_hat=1.25, u=1.1, track_err=0.125, step_norm=0.5, epoch=0, batch_size=2)
        text = trace.to_csv()
        self.assertEqual(text.splitlines()[0], 'k,F_hat,u,track_err,step_norm,epoch,batch_size')
        parsed = RunTrace.from_csv(text)
        self.assertEqual(parsed.rows, trace.rows)
        self.assertEqual(parsed.to_csv(), text)

    def test_malformed(self):
        with self.assertRaises(DataError):
            RunTrace.from_csv('')
        with self.assertRaises(DataError) as ctx:
            RunTrace.from_csv('k,F_hat,u,track_err,step_norm\n0,1,1,0,0\n1,x,1,0,0\n')
        self.assertEqual(ctx.exception.row, 3)
        with self.assertRaises(DataError) as ctx:
            RunTrace.from_csv('k,F_hat,u,track_err,step_norm\n0,1,1\n')
        self.assertEqual(ctx.exception.row, 2)
        with self.assertRaises(DataError):
            RunTrace.from_csv('iteration,loss\n')

    def test_empty(self):
        trace = RunTrace.from_csv('k,F_hat,u,track_err,step_norm\n')
        self.assertEqual(len(trace), 0)


class TrainLogTestCase(unittest.TestCase):
    def test_ndjson(self):
        log = TrainLog(verbose=False)
        log.log(0, F_hat=1.5, u=float('nan'))
        log.log(10, F_hat=1.25, u=1.)
        lines = log.to_ndjson().splitlines()
        self.assertEqual(json.loads(lines[0]), {'iteration': 0, 'F_hat': 1.5, 'u': None})
        self.assertEqual(list(json.loads(lines[1])), ['iteration', 'F_hat', 'u'])
        self.assertIn('seconds', json.loads(log.to_ndjson(timestamps=True).splitlines()[0]))

    def test_atomic_write(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'sub', 'out.txt')
            atomic_write(path, 'a\n')
            atomic_write(path, 'b\n')
            with open(path) as f:
                self.assertEqual(f.read(), 'b\n')
            self.assertEqual(os.listdir(os.path.dirname(path)), ['out.txt'])


if __name__ == '__main__':
    unittest.main()
