"""Command-line harness: python -m drscs.train <mode> [flags].

Modes: train, probe-stationarity, attack, check-oracle, report, gen-data.
Settings resolve as defaults < --config file < --hpconfig k=v,... < individual flags.
"""
import argparse
import sys
from collections import OrderedDict, namedtuple
from pathlib import Path

import numpy as np
import tqdm
from joblib import Parallel, delayed

from drscs import linearized, report, spider
from drscs.core import Box, RngStream
from drscs.datasets import blog_feedback, generate_synthetic, get_default_synthetic_hparams, load_csv, save_csv
from drscs.errors import ArgumentError, ConfigError, ConvergenceError, DataError, DrscsError, NumericError
from drscs.models import LossSpec, PenaltyParams, mean_loss
from drscs.risk import MAX_ORACLE_SUPPORT, FiniteDistribution, RiskParams, composite_objective, \
    dual_value_oracle, mean_semideviation
from drscs.robusteval import ANCHORS, ATTACKS, AttackConfig, attack_sweep, clean_and_attacked, loss_histogram, \
    semidev_attack_losses
from drscs.stationarity import MoreauProbe, moreau_gradient, report_at
from drscs.utils.hparams import HParams
from drscs.utils.trace import TrainLog, atomic_write, format_number

ALGOS = ('scs', 'scs-spider', 'sgd')
SUBGRADIENTS_PER_STEP = {'scs': 3, 'scs-spider': 2, 'sgd': 1}
ORACLE_KAPPAS = (0., 0.3, 0.7, 1.)

TrainResult = namedtuple('TrainResult', ['hps', 'x_R', 'trace', 'summary', 'probes'])


def get_default_hparams():
    return HParams(
        algo='scs',  # scs (linearized tracker), scs-spider or sgd.
        loss='mad',  # Base loss: mad, least_squares or logistic.
        penalty='none',  # none, lasso, scad or mcp.
        lam=0.1,  # Penalty level.
        gamma=3.7,  # SCAD / MCP concavity parameter.
        kappa=0.5,  # Semideviation weight in [0, 1].
        tau=0.01,  # Step size.
        tau_auto=0.,  # If positive, tau = c N^(-2/3) (c N^(-1/2) for scs-spider).
        iters=1000,  # Number of iterations N.
        budget_matched=False,  # Scale iters to the subgradient budget of sgd run for iters steps.
        seed=0,  # Master seed of every random stream.
        data=None,  # CSV file, last column the target, or blog_feedback.
        data_dir='data',  # Download directory of named datasets.
        synthetic=None,  # Synthetic data spec such as n=500,d=10 (see get_default_synthetic_hparams).
        test_fraction=0.25,  # Held-out fraction for test metrics.
        box=10.,  # Half-width of the box constraint.
        spider_auto=False,  # Estimate T, B, b from a pilot sample.
        spider_epoch=0,  # SPIDER T; 0 together with spider_large and spider_small means auto.
        spider_large=0,  # SPIDER B
        spider_small=0,  # SPIDER b
        pilot=32,  # Pilot sample size for u0 and the SPIDER constants.
        trace_thin=1,  # Record every K-th iteration (0 disables the trace).
        probe_every=0,  # Probe the Moreau gradient every K-th iteration (0 disables).
        probe_budget=5000,  # Iteration budget of the prox subsolver.
        probe_tol=1e-6,  # Squared-distance tolerance of the prox subsolver.
        replications=1,  # Seeds seed..seed+R-1, each written to out/seed_<s>.
        workers=1,  # Replications run in parallel.
        out='out',  # Output directory.
        verbose=True,
    )


def check_hparams(hps):
    if hps.algo not in ALGOS:
        raise ConfigError(f"unknown algorithm '{hps.algo}', expected one of {ALGOS}")
    for key in ('iters', 'replications', 'workers', 'pilot'):
        if getattr(hps, key) < 1:
            raise ConfigError(f"{key} must be positive, got {getattr(hps, key)}")
    for key in ('trace_thin', 'probe_every', 'spider_epoch', 'spider_large', 'spider_small'):
        if getattr(hps, key) < 0:
            raise ConfigError(f"{key} must be nonnegative, got {getattr(hps, key)}")
    if not hps.box > 0:
        raise ConfigError(f"box half-width must be positive, got {hps.box}")
    if hps.tau_auto < 0:
        raise ConfigError(f"tau_auto must be nonnegative, got {hps.tau_auto}")
    if hps.tau_auto == 0 and not 0. < hps.tau <= 1.:
        raise ConfigError(f"tau must lie in (0, 1], got {hps.tau}")
    spider_fields = (hps.spider_epoch, hps.spider_large, hps.spider_small)
    if hps.algo != 'scs-spider' and (hps.spider_auto or any(spider_fields)):
        raise ConfigError(f"SPIDER settings are only valid with algo=scs-spider, got algo={hps.algo}")
    if any(spider_fields) and not all(spider_fields):
        raise ConfigError("spider_epoch, spider_large and spider_small must be set together")
    if hps.spider_auto and any(spider_fields):
        raise ConfigError("spider_auto conflicts with explicit SPIDER settings")
    if (hps.data is None) == (hps.synthetic is None):
        raise ConfigError("exactly one of data and synthetic must be given")


def model_spec(hps):
    return LossSpec(hps.loss, hps.penalty, PenaltyParams(hps.lam, hps.gamma)), RiskParams(hps.kappa)


def resolve_iters(hps):
    if not hps.budget_matched:
        return hps.iters
    return max(1, hps.iters // SUBGRADIENTS_PER_STEP[hps.algo])


def resolve_tau(hps, n):
    if hps.tau_auto <= 0:
        return hps.tau
    exponent = -0.5 if hps.algo == 'scs-spider' else -2. / 3.
    return min(1., hps.tau_auto * n ** exponent)


def load_data(hps):
    """(train, test) with test None when test_fraction is 0."""
    rng = RngStream(hps.seed)
    if hps.data == 'blog_feedback':
        ds, _ = blog_feedback(hps.data_dir)
    elif hps.data is not None:
        ds = load_csv(hps.data)
    elif hps.synthetic is not None:
        try:
            synthetic = get_default_synthetic_hparams().parse(hps.synthetic)
        except ValueError as e:
            raise ConfigError(f"bad synthetic spec '{hps.synthetic}': {e}")
        ds = generate_synthetic(synthetic, rng.substream('data'))
    else:
        raise ConfigError("no data source: pass --data PATH or --synthetic SPEC")
    try:
        return ds.split(rng.substream('split'), hps.test_fraction)
    except ArgumentError as e:
        raise ConfigError(str(e))


def spider_schedule(hps, spec, ds, box, rng, tau, rp):
    if hps.spider_epoch > 0:
        return hps.spider_epoch, hps.spider_large, hps.spider_small
    sigma, L, M = spider.estimate_constants(spec, ds, box, rng.substream('pilot'), hps.pilot, kappa=rp.kappa)
    B, b, T = spider.auto_params(sigma, L, M, tau)
    if hps.verbose:
        print(f"spider auto: sigma={sigma:.4g}, L={L:.4g}, M={M:.4g} -> T={T}, B={B}, b={b}")
    return T, B, b


def probe_point(probe, spec, ds, rp, x):
    """Moreau-gradient report at x; an uncertified prox falls back to the best iterate found."""
    try:
        return moreau_gradient(probe, spec, ds, rp, x), True
    except ConvergenceError as e:
        print(f"warning: {e}; using the best iterate", file=sys.stderr)
        return report_at(probe, spec, ds, rp, x, e.best), False


def train_model(hps):
    check_hparams(hps)
    train_ds, test_ds = load_data(hps)
    spec, rp = model_spec(hps)
    box = Box.symmetric(hps.box, train_ds.dim)
    n = resolve_iters(hps)
    tau = resolve_tau(hps, n)
    rng = RngStream(hps.seed)

    checkpoints = []

    def keep(k, x, u):
        if hps.probe_every > 0 and k % hps.probe_every == 0:
            checkpoints.append((k, np.array(x)))

    summary = OrderedDict([('algo', hps.algo), ('kappa', hps.kappa), ('tau', tau), ('iters', n),
                           ('seed', hps.seed)])
    if hps.algo == 'scs-spider':
        T, B, b = spider_schedule(hps, spec, train_ds, box, rng, tau, rp)
        summary.update([('spider_epoch', T), ('spider_large', B), ('spider_small', b)])
        cfg = spider.SpiderConfig(tau, n, T, B, b, rp, box, hps.seed, trace_every=hps.trace_thin)
        trace, x_R = spider.run(cfg, spec, train_ds, rng, hps.verbose, keep)
    else:
        if hps.algo == 'scs':
            summary['pilot'] = hps.pilot
        cfg = linearized.ScsConfig(tau, n, rp, box, hps.seed, trace_every=hps.trace_thin, pilot=hps.pilot)
        method = linearized.run if hps.algo == 'scs' else linearized.projected_subgradient
        trace, x_R = method(cfg, spec, train_ds, rng, hps.verbose, keep)

    summary['objective'] = composite_objective(spec, x_R, train_ds, rp)
    summary['train_loss'] = mean_loss(spec, x_R, train_ds)
    if test_ds is not None:
        summary['test_loss'] = mean_loss(spec, x_R, test_ds)
        summary['test_semidev_loss'] = float(np.mean(semidev_attack_losses(spec, x_R, test_ds, 1.)))
    summary['loss_evaluations'] = trace.counts['losses']
    summary['subgradient_evaluations'] = trace.counts['subgradients']

    probes = []
    if hps.probe_every > 0:
        probe = MoreauProbe.default(box, spec, train_ds, rp, budget=hps.probe_budget, tol=hps.probe_tol)
        certified = True
        for k, x in tqdm.tqdm(checkpoints + [(None, x_R)], disable=not hps.verbose):
            r, ok = probe_point(probe, spec, train_ds, rp, x)
            certified = certified and ok
            probes.append((k, x, r))
        summary['grad_norm'] = probes.pop()[2].grad_norm
        summary['probe_lambda'] = probe.lam
        summary['probe_certified'] = certified
    return TrainResult(hps, x_R, trace, summary, probes)


def weights_text(x):
    return ''.join(format_number(v) + '\n' for v in x)


def probe_tables(probes):
    checkpoints = ['k,' + ','.join(f'w_{i + 1}' for i in range(len(probes[0][1])))] if probes else ['k']
    rows = ['k,grad_norm,phi_lambda']
    for k, x, r in probes:
        checkpoints.append(','.join([str(k)] + [format_number(v) for v in x]))
        rows.append(f'{k},{format_number(r.grad_norm)},{format_number(r.envelope)}')
    return '\n'.join(checkpoints) + '\n', '\n'.join(rows) + '\n'


def write_outputs(result, out):
    out = Path(out)
    log = TrainLog(verbose=False)
    for row in result.trace.rows:
        entry = OrderedDict(zip(result.trace.fields, row))
        log.log(entry.pop('k'), **entry)

    atomic_write(out / 'config.txt', result.hps.to_lines())
    atomic_write(out / 'weights.txt', weights_text(result.x_R))
    atomic_write(out / 'trace.csv', result.trace.to_csv())
    atomic_write(out / 'summary.txt', HParams(**result.summary).to_lines())
    log.save(out / 'train_output.ndjson')
    if result.hps.probe_every > 0:
        checkpoints, rows = probe_tables(result.probes)
        atomic_write(out / 'checkpoints.csv', checkpoints)
        atomic_write(out / 'probe.csv', rows)


def train_and_write(hps):
    result = train_model(hps)
    write_outputs(result, hps.out)
    return result.summary


def run_train(args):
    hps = build_hparams(args)
    print(hps)
    check_hparams(hps)
    if hps.replications == 1:
        summary = train_and_write(hps)
        print(HParams(**summary))
        return

    jobs = [hps.set('seed', s).set('replications', 1).set('verbose', False).set('out', str(Path(hps.out) / f'seed_{s}'))
            for s in range(hps.seed, hps.seed + hps.replications)]
    summaries = Parallel(n_jobs=hps.workers)(delayed(train_and_write)(job) for job in jobs)
    for s in summaries:
        print('seed:{}\tobjective:{:.4f}'.format(s['seed'], s['objective']))


def read_weights(path, dim=None):
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    values = []
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataError(f"{path}: malformed weight '{line.strip()}'", row=number)
    if not values or not np.all(np.isfinite(values)):
        raise DataError(f"{path}: weights must be a nonempty list of finite reals")
    if dim is not None and len(values) != dim:
        raise DataError(f"{path}: {len(values)} weights for {dim} features")
    return np.array(values)


def read_checkpoints(path, dim):
    path = Path(path)
    try:
        lines = [line for line in path.read_text(encoding='utf-8').splitlines()]
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    if not lines or lines[0].split(',')[0] != 'k':
        raise DataError(f"{path}: expected a header starting with k", row=1)
    checkpoints = []
    for number, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cells = line.split(',')
        if len(cells) != dim + 1:
            raise DataError(f"{path}: expected {dim + 1} columns, got {len(cells)}", row=number)
        try:
            checkpoints.append((int(cells[0]), np.array([float(c) for c in cells[1:]])))
        except ValueError:
            raise DataError(f"{path}: malformed checkpoint row", row=number)
    return checkpoints


def emit(text, path=None):
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def run_probe(args):
    hps = build_hparams(args)
    check_data_hparams(hps)
    train_ds, _ = load_data(hps)
    spec, rp = model_spec(hps)
    box = Box.symmetric(hps.box, train_ds.dim)
    if args.checkpoints is not None:
        checkpoints = read_checkpoints(args.checkpoints, train_ds.dim)
    else:
        checkpoints = [(0, read_weights(args.weights or Path(hps.out) / 'weights.txt', train_ds.dim))]
    kwargs = dict(budget=hps.probe_budget, tol=hps.probe_tol)
    if args.probe_lambda is not None:
        probe = MoreauProbe(args.probe_lambda, box, **kwargs)
    else:
        probe = MoreauProbe.default(box, spec, train_ds, rp, **kwargs)

    probes = []
    for k, x in tqdm.tqdm(checkpoints, disable=not hps.verbose):
        if args.strict:
            r = moreau_gradient(probe, spec, train_ds, rp, x)
        else:
            r, _ = probe_point(probe, spec, train_ds, rp, x)
        probes.append((k, x, r))
    emit(probe_tables(probes)[1], args.output)


def run_attack(args):
    hps = build_hparams(args)
    check_data_hparams(hps)
    train_ds, test_ds = load_data(hps)
    ds = train_ds if test_ds is None else test_ds
    spec, _ = model_spec(hps)
    x = read_weights(args.weights or Path(hps.out) / 'weights.txt', ds.dim)
    cfg = AttackConfig(args.kind, kappa_adv=args.kappa_adv, eps_adv=args.eps_adv, tau_adv=args.tau_adv,
                       iters=args.adv_iters, anchor=args.pgm_anchor)

    table = clean_and_attacked(spec, x, ds, cfg, hps.verbose)
    counts, edges = loss_histogram(table[:, 1], args.bins)
    out = Path(hps.out)
    atomic_write(out / 'attack_losses.csv', report.losses_csv(table))
    atomic_write(out / 'attack_histogram.csv', report.histogram_csv(counts, edges))
    if args.sweep:
        levels = parse_levels(args.sweep)
        atomic_write(out / 'attack_sweep.csv', report.sweep_csv(attack_sweep(spec, x, ds, cfg, levels, hps.verbose)))
    print('attack:{}\tpoints:{}\tclean:{:.4f}\tattacked:{:.4f}'.format(
        cfg.kind, len(ds), table[:, 0].mean(), table[:, 1].mean()))


def check_oracle(trials, max_support, seed, tol=1e-10, verbose=False):
    """Largest gap between the primal risk value and the brute-force dual over random distributions."""
    if trials < 1 or not 1 <= max_support <= MAX_ORACLE_SUPPORT:
        raise ConfigError(f"need trials >= 1 and support in [1, {MAX_ORACLE_SUPPORT}]")
    rng = RngStream(seed)
    worst = 0.
    for _ in tqdm.trange(trials, disable=not verbose):
        n = 1 + int(rng.integers(max_support))
        probs = rng.uniform(size=n)
        d = FiniteDistribution(rng.uniform(-10., 10., size=n), probs / probs.sum())
        for kappa in ORACLE_KAPPAS:
            rp = RiskParams(kappa)
            worst = max(worst, abs(mean_semideviation(d, rp) - dual_value_oracle(d, rp)))
    if worst > tol:
        raise NumericError(f"primal and dual risk values differ by {worst:.3e}")
    return worst


def run_check_oracle(args):
    worst = check_oracle(args.trials, args.max_support, args.seed, args.tol, not args.quiet)
    print('trials:{}\tmax_error:{:.3e}'.format(args.trials, worst))


def run_gen_data(args):
    hps = build_hparams(args)
    if hps.synthetic is None:
        raise ConfigError("gen-data needs --synthetic SPEC")
    try:
        synthetic = get_default_synthetic_hparams().parse(hps.synthetic)
    except ValueError as e:
        raise ConfigError(f"bad synthetic spec '{hps.synthetic}': {e}")
    ds = generate_synthetic(synthetic, RngStream(hps.seed).substream('data'))
    path = args.output or Path(hps.out) / 'data.csv'
    save_csv(path, ds)
    print(f'wrote {len(ds)} rows of dimension {ds.dim} to {path}')


def check_data_hparams(hps):
    if (hps.data is None) == (hps.synthetic is None):
        raise ConfigError("exactly one of data and synthetic must be given")
    model_spec(hps)


def parse_levels(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ArgumentError(f"cannot parse levels '{text}'")


def parse_spider(text):
    try:
        T, B, b = (int(v) for v in text.split(','))
    except ValueError:
        raise ArgumentError(f"--spider expects T,B,b, got '{text}'")
    return T, B, b


# flag dest -> hyper-parameter
FLAG_KEYS = ('algo', 'loss', 'penalty', 'lam', 'gamma', 'kappa', 'tau', 'tau_auto', 'iters', 'seed', 'data',
             'data_dir', 'synthetic', 'test_fraction', 'box', 'spider_auto', 'out', 'trace_thin', 'probe_every',
             'probe_budget', 'probe_tol', 'pilot', 'budget_matched', 'replications', 'workers')


def build_hparams(args):
    hps = get_default_hparams()
    try:
        if args.config is not None:
            try:
                text = Path(args.config).read_text(encoding='utf-8')
            except OSError as e:
                raise ConfigError(f"cannot read config {args.config}: {e}")
            hps = hps.parse_lines(text)
        if args.hpconfig:
            hps = hps.parse(args.hpconfig)
        flags = vars(args)
        for key in FLAG_KEYS:
            if flags.get(key) is not None:
                hps = hps.set(key, flags[key])
        if flags.get('tau') is not None:
            hps = hps.set('tau_auto', 0.)
        if flags.get('spider') is not None:
            T, B, b = parse_spider(flags['spider'])
            hps = hps.set('spider_epoch', T).set('spider_large', B).set('spider_small', b)
        if flags.get('quiet'):
            hps = hps.set('verbose', False)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e))
    return hps


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(f"{self.prog}: {message}")


def _data_flags():
    p = _Parser(add_help=False)
    p.add_argument('--config', help="File of 'key = value' lines.")
    p.add_argument('--hpconfig', help="Comma-separated k=v overrides.")
    p.add_argument('--loss', choices=('mad', 'least_squares', 'logistic'))
    p.add_argument('--penalty', choices=('none', 'lasso', 'scad', 'mcp'))
    p.add_argument('--lambda', dest='lam', type=float)
    p.add_argument('--gamma', type=float)
    p.add_argument('--kappa', type=float)
    p.add_argument('--box', type=float, help="Half-width W of the box [-W, W]^d.")
    source = p.add_mutually_exclusive_group()
    source.add_argument('--data', help="CSV file, last column the target, or blog_feedback.")
    p.add_argument('--data-dir', dest='data_dir', help="Download directory of blog_feedback.")
    source.add_argument('--synthetic', help="Synthetic spec such as n=500,d=10,tail_fraction=0.1.")
    p.add_argument('--seed', type=int)
    p.add_argument('--test-fraction', dest='test_fraction', type=float)
    p.add_argument('--out', help="Output directory.")
    p.add_argument('--quiet', action='store_true')
    return p


def _probe_flags():
    p = _Parser(add_help=False)
    p.add_argument('--probe-budget', dest='probe_budget', type=int)
    p.add_argument('--probe-tol', dest='probe_tol', type=float)
    return p


def build_parser():
    parser = _Parser(prog='drscs.train', description="Distributionally robust stochastic compositional subgradient "
                                                      "methods under the mean-semideviation risk.")
    modes = parser.add_subparsers(dest='mode', required=True)
    data, probe = _data_flags(), _probe_flags()

    train = modes.add_parser('train', parents=[data, probe])
    train.add_argument('--algo', choices=ALGOS)
    step = train.add_mutually_exclusive_group()
    step.add_argument('--tau', type=float)
    step.add_argument('--tau-auto', dest='tau_auto', type=float, metavar='C')
    train.add_argument('--iters', type=int)
    schedule = train.add_mutually_exclusive_group()
    schedule.add_argument('--spider-auto', dest='spider_auto', action='store_const', const=True)
    schedule.add_argument('--spider', metavar='T,B,b')
    train.add_argument('--trace-thin', dest='trace_thin', type=int, metavar='K')
    train.add_argument('--probe-every', dest='probe_every', type=int, metavar='K')
    train.add_argument('--pilot', type=int)
    train.add_argument('--budget-matched', dest='budget_matched', action='store_const', const=True)
    train.add_argument('--replications', type=int)
    train.add_argument('--workers', type=int)

    stationarity = modes.add_parser('probe-stationarity', parents=[data, probe])
    points = stationarity.add_mutually_exclusive_group()
    points.add_argument('--weights', help="Weights file (default <out>/weights.txt).")
    points.add_argument('--checkpoints', help="checkpoints.csv written by train --probe-every.")
    stationarity.add_argument('--probe-lambda', dest='probe_lambda', type=float)
    stationarity.add_argument('--strict', action='store_true', help="Fail when a prox is not certified.")
    stationarity.add_argument('--output', help="probe table path (default stdout).")

    attack = modes.add_parser('attack', parents=[data])
    attack.add_argument('--weights', help="Weights file (default <out>/weights.txt).")
    attack.add_argument('--kind', choices=ATTACKS, default='semidev')
    attack.add_argument('--kappa-adv', dest='kappa_adv', type=float, default=1.)
    attack.add_argument('--eps-adv', dest='eps_adv', type=float, default=0.1)
    attack.add_argument('--tau-adv', dest='tau_adv', type=float, default=1.)
    attack.add_argument('--adv-iters', dest='adv_iters', type=int, default=10)
    attack.add_argument('--pgm-anchor', dest='pgm_anchor', choices=ANCHORS, default='current')
    attack.add_argument('--sweep', metavar='V1,V2,...', help="kappa_adv (semidev) or eps_adv (pgm) levels.")
    attack.add_argument('--bins', type=int, default=20)

    oracle = modes.add_parser('check-oracle')
    oracle.add_argument('--trials', type=int, default=500)
    oracle.add_argument('--max-support', dest='max_support', type=int, default=12)
    oracle.add_argument('--seed', type=int, default=0)
    oracle.add_argument('--tol', type=float, default=1e-10)
    oracle.add_argument('--quiet', action='store_true')

    tables = modes.add_parser('report')
    report.add_arguments(tables)

    gen = modes.add_parser('gen-data', parents=[data])
    gen.add_argument('--output', help="CSV path (default <out>/data.csv).")
    return parser


def main(argv=None):
    fun = {"train": run_train, "probe-stationarity": run_probe, "attack": run_attack,
           "check-oracle": run_check_oracle, "report": report.run_report, "gen-data": run_gen_data}
    try:
        args = build_parser().parse_args(argv)
        fun[args.mode](args)
    except DrscsError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
