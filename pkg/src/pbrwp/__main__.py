"""The ``sampler`` command.

Exit codes: 0 success, 1 failed verification or other error, 2 invalid
configuration, 3 divergence.
"""
import argparse
import logging
import sys

import pbrwp
from pbrwp import errors
from pbrwp.exceptions import ConfigError, DivergenceError, PbrwpError
from pbrwp.io import worker_count

log = logging.getLogger('pbrwp')

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def run(args) -> int:
    from pbrwp.experiment import parse_file
    from pbrwp.experiment.runner import run_experiment

    config = parse_file(args.config).with_overrides(seed=args.seed, output_dir=args.out)
    manifest = run_experiment(config, workers=worker_count(), progress=args.progress)
    print('wrote %s (%d iterations, %.2f s)' % (
        config.output_dir, config.sampler_config.iters, manifest.wall_clock))
    return EXIT_OK


def verify(args) -> int:
    from pbrwp.verify import run_checks

    results = run_checks(seed=args.seed, names=args.check or None)
    width = max(len(r.name) for r in results)
    for r in results:
        print('%-*s  %s  %s' % (width, r.name, 'PASS' if r.passed else 'FAIL', r.detail))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def plot(args) -> int:
    from pbrwp.plot import plot_metrics, plot_particles

    if args.metrics is None and args.particles is None:
        raise PbrwpError('plot needs --metrics or --particles')
    if args.metrics is not None and args.particles is not None:
        raise PbrwpError('plot takes one of --metrics and --particles')
    if args.metrics is not None:
        plot_metrics(args.metrics, args.out)
    else:
        plot_particles(args.particles, args.out)
    return EXIT_OK


def get_parser():
    parser = argparse.ArgumentParser(
        prog='sampler', description='particle sampling with regularized Wasserstein proximals')
    parser.add_argument('--version', action='version', version=pbrwp.__version__)
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--strict', action='store_true',
                        help='treat recoverable problems (e.g. unknown config keys) as errors')
    subparsers = parser.add_subparsers(dest='command', required=True)

    p = subparsers.add_parser('run', help='run an experiment from a config file')
    p.add_argument('--config', required=True)
    p.add_argument('--out', help='output directory, overriding [output] dir')
    p.add_argument('--seed', type=int, help='master seed, overriding [sampler] seed')
    p.add_argument('--progress', action='store_true', help='show a progress bar')
    p.set_defaults(func=run)

    p = subparsers.add_parser('verify', help='check the Gaussian closed forms')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--check', action='append', help='run only this check (repeatable)')
    p.set_defaults(func=verify)

    p = subparsers.add_parser('plot', help='write an SVG plot')
    p.add_argument('--metrics', help='metrics.csv of a run')
    p.add_argument('--particles', help='particles_<k>.csv snapshot of a run')
    p.add_argument('--out', required=True, help='SVG file to write')
    p.set_defaults(func=plot)
    return parser


def _fail(error, code):
    print(errors.format_error(error, prefix='%s: ' % error.error_type), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = get_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(levelname)s %(name)s: %(message)s')
    errors.set_strict_mode(args.strict)
    try:
        return args.func(args)
    except ConfigError as error:
        return _fail(error, EXIT_CONFIG)
    except DivergenceError as error:
        return _fail(error, EXIT_DIVERGED)
    except PbrwpError as error:
        return _fail(error, EXIT_FAILED)


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
