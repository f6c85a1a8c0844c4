'''Command line entry point.

Example:
    Run a sweep file, check it, and summarize it:
        $ python -m app run --config sweep.yaml
        $ python -m app replay-verify runs/latest
        $ python -m app report runs/latest --compare optimal:random_with

    Run a single condition from flags:
        $ python -m app run --policy optimal --preset construction-lab --episodes 1000 --out runs/lab

Exit codes: 0 success, 1 partial failure (a condition failed or replay found
mismatches), 2 invalid configuration.
'''
# LOAD DEPENDENCY ----------------------------------------------------------
import argparse
import json
import logging
import sys

from app.components import harness
from app.components.utils import config as config_loader
from app.components.utils.errors import ConfigurationError

logger = logging.getLogger('app')


# FUNCTIONS ----------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='python -m app', description='Exploration efficiency experiments')
    parser.add_argument('-v', '--verbose', action='store_true', help='print per-step decisions')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='run a sweep and write trajectory files')
    run.add_argument('--config', help='sweep spec (YAML)')
    run.add_argument('--out', help='output directory (overrides the spec)')
    run.add_argument('--jobs', type=int, help='worker count (overrides the spec)')
    run.add_argument('--preset', help='task preset for a single-condition run')
    run.add_argument('--rule-kind', choices=['single_feature', 'conjunction'], help='rule kind for a single-condition run')
    run.add_argument('--policy', default='optimal', help='optimal, random_with, random_without or llm:<variant>')
    run.add_argument('--episodes', type=int, default=1000)
    run.add_argument('--base-seed', type=int, default=0)

    replay = commands.add_parser('replay-verify', help='re-simulate a run and report mismatches')
    replay.add_argument('run_dir')

    summary = commands.add_parser('report', help='write summary tables and ANCOVA comparisons')
    summary.add_argument('run_dir')
    summary.add_argument('--out', help='directory for the report files (default: the run directory)')
    summary.add_argument('--compare', action='append', default=[], metavar='BASE:VARIANT',
                         help='condition pair to compare; repeatable')
    return parser


def spec_from_args(args) -> config_loader.SweepSpec:
    if args.config:
        mapping = config_loader.load_yaml(args.config)
    else:
        task = {'preset': args.preset} if args.preset else {}
        if args.rule_kind:
            task['rule_kind'] = args.rule_kind
        condition = {'policy': args.policy, 'episodes': args.episodes, 'base_seed': args.base_seed, 'task': task}
        mapping = {'conditions': [condition]}
        if args.policy.startswith('llm:'):
            # offline default; real models are configured in a sweep file
            mapping['backend'] = {'kind': 'oracle'}
    if args.out:
        mapping['out_dir'] = args.out
    if args.jobs is not None:
        mapping['jobs'] = args.jobs
    return config_loader.sweep_spec_from_mapping(mapping)


def parse_pairs(values):
    pairs = []
    for value in values:
        base, sep, variant = value.partition(':')
        if not sep or not base or not variant:
            raise ConfigurationError(f'--compare expects BASE:VARIANT, got {value!r}')
        pairs.append((base, variant))
    return pairs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    try:
        if args.command == 'run':
            spec = spec_from_args(args)
            if args.verbose:
                logger.debug(f'running sweep: {[c.to_dict() for c in spec.conditions]}')
            outcome = harness.run_sweep(spec, verbose=args.verbose)
            harness.report(outcome.out_dir)
            for name, message in outcome.failed.items():
                logger.error(f'{name}: {message}')
            return outcome.exit_code
        if args.command == 'replay-verify':
            result = harness.replay_verify(args.run_dir)
            print(json.dumps(result.to_dict(), indent=2, default=str))
            return 0 if result.ok else 1
        if args.command == 'report':
            summary, comparisons = harness.report(args.run_dir, parse_pairs(args.compare), out_dir=args.out)
            print(summary.to_string(index=False))
            if comparisons:
                print(json.dumps(comparisons, indent=2))
            return 0
    except ConfigurationError as error:
        logger.error(f'invalid configuration: {error}')
        return 2
    return 2


if __name__ == '__main__':
    sys.exit(main())
