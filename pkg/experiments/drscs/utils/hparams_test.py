import unittest

from drscs.utils.hparams import HParams


class HParamsTestCase(unittest.TestCase):
    def setUp(self):
        self.hps = HParams(iters=1000, kappa=0.5, verbose=True, algo="scs", data=None)

    def test_set_coerces_strings(self):
        hps = self.hps.set("iters", "200").set("kappa", "1").set("verbose", "False").set("data", "train.csv")
        self.assertEqual((hps.iters, hps.kappa, hps.verbose, hps.data), (200, 1.0, False, "train.csv"))
        self.assertIsInstance(hps.kappa, float)
        self.assertIsNone(self.hps.set("data", "none").data)
        self.assertEqual(self.hps.set("iters", 7).iters, 7)

    def test_set_rejects_bad_values(self):
        with self.assertRaises(ValueError):
            self.hps.set("verbose", "yes")
        with self.assertRaises(ValueError):
            self.hps.set("iters", "ten")
        with self.assertRaises(ValueError):
            self.hps.set("learning_rate", "0.1")

    def test_parse(self):
        hps = self.hps.parse(" kappa=0.25, algo=scs-spider,,verbose=TRUE ")
        self.assertEqual((hps.kappa, hps.algo, hps.verbose), (0.25, "scs-spider", True))
        with self.assertRaises(ValueError):
            self.hps.parse("kappa")

    def test_parse_does_not_mutate(self):
        hps = HParams(int_value=13)
        hps.parse("int_value=10")
        self.assertEqual(hps.int_value, 13)

    def test_unknown_key(self):
        with self.assertRaises(ValueError):
            HParams(a=1).parse("b=2")

    def test_parse_lines(self):
        hps = HParams(kappa=0.0, iters=10, synthetic=None, algo="scs")
        text = """
        # experiment record
        kappa = 0.5
        iters = 200   # steps
        synthetic = n=500,d=10
        """
        parsed = hps.parse_lines(text)
        self.assertEqual(parsed.kappa, 0.5)
        self.assertEqual(parsed.iters, 200)
        self.assertEqual(parsed.synthetic, "n=500,d=10")
        self.assertEqual(parsed.algo, "scs")

    def test_lines_roundtrip(self):
        hps = HParams(kappa=0.1, iters=7, flag=False, path=None, name="x")
        self.assertEqual(hps.parse_lines(hps.to_lines()), hps)


if __name__ == '__main__':
    unittest.main()
