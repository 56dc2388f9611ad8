import sys
import logging
import argparse

from pathlib import Path

import taap_ring.reproduce as rp

from taap_ring.encoding import PROFILE_DIGITS, TRAJECTORY_DIGITS, encode, write_csv, write_json
from taap_ring.exception import AcceptanceFailure, ConfigError, TaapException
from taap_ring.ring import TaapRing
from taap_ring.scenario import load_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _scenario(args):
    if args.config is None:
        raise ConfigError(f'{args.command} needs --config FILE')
    return load_scenario(args.config).with_overrides(seed=args.seed, outputs=args.out_dir)


def _out_dir(args, scenario=None) -> Path:
    if args.out_dir is not None:
        out = Path(args.out_dir)
    elif scenario is not None:
        out = scenario.outputs
    else:
        out = Path('out')
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report(args, data):
    if not args.quiet:
        print(encode(data, indent=2))


def characterize(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args, scenario)

    summary, char = TaapRing(scenario).characterize()

    write_json(out / 'summary.json', summary)
    write_csv(out / 'azimuthal_profile.csv', ['phi_rad', 'V_J'], char.profile_rows(), PROFILE_DIGITS)

    _report(args, summary['comparison'])
    return EXIT_OK


def transport(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args, scenario)
    ring = TaapRing(scenario)

    trajectory, report = ring.transport()
    trajectory.save(out / 'trajectory.csv')
    write_json(out / 'oscillation_fit.json', report)

    rows = ring.sweep()
    if rows:
        header = list(rows[0])
        write_csv(out / 'sweep.csv', header, [[row[k] for k in header] for row in rows], TRAJECTORY_DIGITS)

    _report(args, {k: v for k, v in report.items() if k != 'fit'})
    return EXIT_OK


def image_fit(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args, scenario)
    ring = TaapRing(scenario)

    image = ring.image()
    fit, residual, report = ring.fit_image(image)

    image.save(out / 'image')
    residual.save(out / 'residual')
    write_json(out / 'ring_fit.json', {'fit': fit, **report})

    _report(args, report)
    return EXIT_OK


def reproduce(args) -> int:
    out = _out_dir(args)
    verdicts = rp.run_items(args.items, args.seed or 0)

    write_json(out / 'report.json', {
        'seed': args.seed or 0,
        'passed': all(v.passed for v in verdicts),
        'verdicts': verdicts
    })

    if not args.quiet:
        print(f'{"item":<16} {"quantity":<34} {"reported":>12} {"computed":>12}  {"tolerance":<18} status')
        for verdict in verdicts:
            print(verdict.row())

    rp.check(verdicts)
    return EXIT_OK


COMMANDS = {
    'characterize': characterize,
    'transport': transport,
    'image-fit': image_fit,
    'reproduce': reproduce
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='Scenario JSON file')
    common.add_argument('--seed', type=int, help='Override the scenario seed')
    common.add_argument('--out-dir', help='Directory for output files')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='Only warnings and errors, no report')
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(prog='taap-ring', description='Simulate and analyse TAAP ring guides')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('characterize', parents=[common], help='Analytic vs numeric ring frequencies')
    sub.add_parser('transport', parents=[common], help='Bang-bang transport in the reduced model')
    sub.add_parser('image-fit', parents=[common], help='Sample, image and fit a ring ensemble')

    p = sub.add_parser('reproduce', parents=[common], help='Recompute reference numbers')
    p.add_argument('items', nargs='+', metavar='ITEM', help=f'One of {", ".join(rp.ITEMS)} or all')

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        return COMMANDS[args.command](args)
    except AcceptanceFailure as e:
        logger.error(e.ex_msg)
        return EXIT_ACCEPTANCE
    except ConfigError as e:
        logger.error(e.ex_msg)
        return EXIT_CONFIG
    except TaapException as e:
        logger.error('%s: %s', e.ex_name, e.ex_msg)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
