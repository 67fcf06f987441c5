"""
Command line interface: ``flatpt run | sweep | compare | repro | gen-trace``.

Exit codes are 0 on success, 1 if an acceptance check fails, and 2 for usage and configuration errors.
"""
import argparse
import json
import logging
import os
import sys
from collections import OrderedDict

from .addressing import LevelScheme
from .io.config import ConfigurationError, parse_size, write_config
from .io.mappings import save_mappings
from .io.traces import TraceFormatError
from .runner import (Scenario, MetricsReport, run_scenario, compare, sweep, repro, parse_axis, parse_setting,
                     ACCEPTANCE_CHECKS)
from .workload import FragmentationPolicy, GENERATORS, DEFAULT_VA_BASE, generate, layout, save_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2

#: Effective scenario written next to the report files by ``flatpt run --out``
SCENARIO_FILE = 'scenario.yaml'


def _overrides(args):
    """Dotted configuration paths set by the scenario options of run and sweep"""
    res = OrderedDict()
    if args.label is not None:
        res['label'] = args.label
    if args.seed is not None:
        res['seed'] = args.seed
    if args.layout is not None:
        res['layout.scheme'] = str(LevelScheme.parse(args.layout))
    if args.host_layout is not None:
        res['virtualization.host.scheme'] = str(LevelScheme.parse(args.host_layout))
    if args.frag is not None:
        res['fragmentation.large_page_fraction'] = FragmentationPolicy.parse(args.frag).large_page_fraction
    if args.prio is not None:
        res['prioritization.enabled'] = args.prio
    if args.virt:
        res['virtualization.enabled'] = True
    if args.trace is not None:
        res['workload.trace'] = args.trace
    if args.mappings is not None:
        res['workload.mappings'] = args.mappings
    if args.generator is not None:
        res['workload.generator'] = args.generator
    if args.footprint is not None:
        res['workload.footprint'] = parse_size(args.footprint)
    if args.refs is not None:
        res['workload.refs'] = args.refs
    if args.warmup is not None:
        res['warmup_refs'] = args.warmup
    for text in args.set or []:
        key, value = parse_setting(text)
        res[key] = value
    return res


def _add_scenario_options(parser):
    parser.add_argument('-c', '--config', help='scenario YAML file, merged over the defaults')
    parser.add_argument('--label', help='label of the run')
    parser.add_argument('--seed', type=int, help='seed of the run')
    parser.add_argument('--layout', help='level scheme of the (guest) table, e.g. [18,18]')
    parser.add_argument('--host-layout', help='level scheme of the host table')
    parser.add_argument('--frag', help='share of the footprint in 2 MB pages: 0, 50, 100, 25%% or 0.25')
    prio = parser.add_mutually_exclusive_group()
    prio.add_argument('--prio', dest='prio', action='store_true', default=None,
                      help='enable page-table prioritized replacement')
    prio.add_argument('--no-prio', dest='prio', action='store_false', help='disable prioritized replacement')
    parser.add_argument('--virt', action='store_true', help='run virtualized (nested walks)')
    parser.add_argument('--trace', help='replay this trace file instead of generating one')
    parser.add_argument('--mappings', help='read the mappings from this file instead of laying out the footprint')
    parser.add_argument('--generator', choices=GENERATORS, help='trace generator')
    parser.add_argument('--footprint', help='footprint size, e.g. 8G')
    parser.add_argument('--refs', type=int, help='number of generated references')
    parser.add_argument('--warmup', type=int, help='references excluded from the statistics')
    parser.add_argument('--set', action='append', metavar='KEY=VALUE',
                        help='set any configuration key, e.g. pwc.L2=32. May be repeated')


def _run(args):
    scenario = Scenario.from_file(args.config, _overrides(args))
    report = run_scenario(cfg=scenario)
    if args.out is not None:
        report.write(args.out)
        write_config(scenario.to_dict(), os.path.join(args.out, SCENARIO_FILE))
    if not args.quiet:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def _sweep(args):
    scenario = Scenario.from_file(args.config, _overrides(args))
    axes = OrderedDict()
    if args.layouts:
        axes['layout.scheme'] = [str(LevelScheme.parse(s)) for s in args.layouts]
    if args.frags:
        axes['fragmentation.large_page_fraction'] = [FragmentationPolicy.parse(f).large_page_fraction
                                                     for f in args.frags]
    if args.prio_modes != 'config':
        axes['prioritization.enabled'] = {'both': [False, True], 'on': [True], 'off': [False]}[args.prio_modes]
    if args.virt_modes != 'config':
        axes['virtualization.enabled'] = {'both': [False, True], 'native': [False], 'virt': [True]}[args.virt_modes]
    for text in args.axis or []:
        key, values = parse_axis(text)
        axes[key] = values
    table, reports = sweep(scenario=scenario, axes=axes, jobs=args.jobs)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        table.to_csv(os.path.join(args.out, 'sweep.csv'))
        with open(os.path.join(args.out, 'sweep.json'), 'w') as f:
            f.write(json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2))
    if not args.quiet:
        sys.stdout.write(table.to_flat_dataframe().to_string() + '\n')
    return EXIT_OK


def _compare(args):
    baseline = MetricsReport.from_json(args.baseline)
    variants = [MetricsReport.from_json(path) for path in args.variants]
    report = compare(baseline=baseline, variants=variants)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        report.to_csv(os.path.join(args.out, 'comparison.csv'))
        with open(os.path.join(args.out, 'comparison.json'), 'w') as f:
            f.write(json.dumps(report.to_records(), sort_keys=True, indent=2))
    if not args.quiet:
        sys.stdout.write(report.pivot().to_string() + '\n')
    return EXIT_OK


def _repro(args):
    results = repro(quick=args.quick, checks=args.checks)
    for result in results:
        sys.stdout.write('%s\n' % result)
    failed = [r.number for r in results if not r.passed]
    if failed:
        logger.error("Acceptance checks %s failed", failed)
        return EXIT_FAILED_CHECK
    return EXIT_OK


def _gen_trace(args):
    trace = generate(generator=args.generator, footprint=parse_size(args.footprint), n=args.refs, seed=args.seed,
                     stride=args.stride, va_base=args.va_base)
    save_trace(trace, args.out)
    logger.info("Wrote %i references to %s", len(trace), args.out)
    if args.mappings_out is not None:
        maps = layout(footprint=trace.footprint, frag=FragmentationPolicy.parse(args.frag), seed=args.seed,
                      va_base=args.va_base)
        save_mappings(maps, args.mappings_out)
        logger.info("Wrote %i mappings to %s", len(maps), args.mappings_out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog='flatpt', description=__doc__.strip().splitlines()[0])
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='count', default=0, help='log progress (-vv for debug)')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='print nothing but errors')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    run = commands.add_parser('run', help='simulate one scenario')
    _add_scenario_options(run)
    run.add_argument('--out', help='directory for report.json, report.txt and counters.csv')
    run.set_defaults(func=_run)

    sw = commands.add_parser('sweep', help='simulate the cartesian product of scenario settings')
    _add_scenario_options(sw)
    sw.add_argument('--layouts', nargs='+', metavar='SCHEME', help='level schemes to sweep')
    sw.add_argument('--frags', nargs='+', metavar='FRAG', help='fragmentation scenarios to sweep')
    sw.add_argument('--prio-modes', choices=('config', 'both', 'on', 'off'), default='config',
                    help='prioritization settings to sweep')
    sw.add_argument('--virt-modes', choices=('config', 'both', 'native', 'virt'), default='config',
                    help='native and/or virtualized runs')
    sw.add_argument('--axis', action='append', metavar='KEY=V1,V2',
                    help='sweep any configuration key, e.g. pwc.L3=4,8,16. May be repeated')
    sw.add_argument('-j', '--jobs', type=int, default=1, help='number of worker processes')
    sw.add_argument('--out', help='directory for sweep.csv and sweep.json')
    sw.set_defaults(func=_sweep)

    cmp_ = commands.add_parser('compare', help='relative deltas of runs against a baseline run')
    cmp_.add_argument('baseline', help='report.json of the baseline run')
    cmp_.add_argument('variants', nargs='+', help='report.json of the variant runs')
    cmp_.add_argument('--out', help='directory for comparison.csv and comparison.json')
    cmp_.set_defaults(func=_compare)

    rep = commands.add_parser('repro', help='run the acceptance matrix')
    rep.add_argument('--quick', action='store_true', help='desk-scale reference counts and footprints')
    rep.add_argument('--checks', nargs='+', type=int, choices=list(ACCEPTANCE_CHECKS), metavar='N',
                     help='run only these checks')
    rep.set_defaults(func=_repro)

    gen = commands.add_parser('gen-trace', help='write a synthetic trace file')
    gen.add_argument('--generator', choices=GENERATORS, default='uniform')
    gen.add_argument('--footprint', required=True, help='footprint size, e.g. 8G')
    gen.add_argument('--refs', type=int, required=True, help='number of references')
    gen.add_argument('--stride', type=int, default=64, help='stride of the sequential generator in bytes')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--va-base', type=lambda v: int(v, 0), default=DEFAULT_VA_BASE,
                     help='first address of the footprint')
    gen.add_argument('--out', required=True, help='trace file to write')
    gen.add_argument('--mappings-out', help='also write a layout of the footprint to this mapping file')
    gen.add_argument('--frag', default='0', help='share of the footprint in 2 MB pages of the written layout')
    gen.set_defaults(func=_gen_trace)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(format='%(levelname)s: %(name)s: %(message)s', level=level)
    try:
        return args.func(args)
    except (ConfigurationError, TraceFormatError) as e:
        logger.error("%s", e)
    except (ValueError, KeyError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
    return EXIT_USAGE
