# -*- coding: utf-8 -*-
"""Command line interface.

    $ tvab run periodic-logistic --out results
    $ tvab certify cert-n2c1
    $ tvab check my_experiment.yaml
    $ tvab grid periodic-logistic

Each subcommand takes a configuration file path or a preset name. Errors are
reported on stderr as a JSON object with ``error``, ``message`` and ``field``
keys, and exit with status 1.
"""
import argparse
import json
import logging
import sys

from tvab import alg, experiment, objectives
from tvab.version import __version__


logger = logging.getLogger('tvab')


def _parser():
    parser = argparse.ArgumentParser(
        prog='tvab',
        description='Distributed optimization over time-varying digraphs.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_str in [
            ('run', 'run every method and step size of an experiment'),
            ('certify', 'compute and check the convergence certificate'),
            ('check', 'check the weight, graph and tracking invariants'),
            ('grid', 'pick the best step size per method')]:
        p = sub.add_parser(name, help=help_str)
        p.add_argument('config', help='configuration file or preset name')
        p.add_argument('--seed', type=int, default=None,
                       help='run seed, overriding run.seeds')
        p.add_argument('--out', default=None,
                       help='output directory, overriding output.dir')
        p.add_argument('--horizon', type=int, default=None,
                       help='number of iterations, overriding run.K')
        p.add_argument('--verbose', '-v', action='store_true',
                       help='log at debug level')

    sub.choices['grid'].add_argument(
        '--eta', type=float, nargs='+', default=None,
        help='step size grid, overriding the configured ones')
    sub.choices['run'].add_argument('--pbar', action='store_true',
                                    help='show progress bars')
    return parser


def _error(e, field=None):
    payload = {'error': type(e).__name__, 'message': str(e),
               'field': getattr(e, 'field', field)}
    print(json.dumps(payload), file=sys.stderr)
    return 1


def _run(args, cfg):
    result = experiment.run_experiment(cfg, show_pbar=args.pbar)
    for trace, fit in zip(result.traces, result.fits):
        print('{:<24} eta={:<10g} seed={:<4d} {:<8} final={:.3e} '
              'slope={}'.format(trace.method, trace.eta, trace.seed,
                                trace.status, trace.final_residual,
                                'n/a' if fit is None
                                else '{:.3e}'.format(fit.slope)))

    print('summary: {}'.format(result.summary_path))
    return 0


def _certify(args, cfg):
    report = experiment.certify(cfg, horizon=args.horizon, seed=args.seed)
    print(report.to_text(), end='')
    return 0 if report.ok else 2


def _check(args, cfg):
    report = experiment.check(cfg, horizon=args.horizon)
    print(report.to_text(), end='')
    return 0 if report.ok else 2


def _grid(args, cfg):
    best = experiment.grid_search_eta(cfg, grid=args.eta)
    for method, eta in best.items():
        print('{}: {:g}'.format(method, eta))

    return 0


_COMMANDS = {'run': _run, 'certify': _certify, 'check': _check,
             'grid': _grid}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s')

    try:
        cfg = experiment.load_config(args.config)
        if args.command == 'certify':
            cfg = cfg.override(out=args.out)
        else:
            cfg = cfg.override(seed=args.seed, horizon=args.horizon,
                               out=args.out)

        return _COMMANDS[args.command](args, cfg)
    except experiment.ConfigError as e:
        return _error(e)
    except OSError as e:
        return _error(e, field='config')
    except (experiment.GridError, alg.DivergenceError,
            objectives.ConvergenceError, OverflowError, ValueError) as e:
        return _error(e)


if __name__ == '__main__':
    sys.exit(main())
