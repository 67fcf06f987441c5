"""
Scenario engine: validate a configuration, build the tables and caches it describes, replay a trace
through them, and report the metrics of the run.

A run is fully determined by its configuration. The seed of the scenario drives the trace generator
directly; the layout, the node allocators, and the replacement draws use seeds spawned from it.
"""
import copy
import hashlib
import itertools
import json
import logging
import os
import re
import warnings
from collections import OrderedDict, Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
from hdmf.utils import docval, getargs, popargs
from ruamel.yaml import YAML

from . import load_default_config
from .addressing import PageSize, LevelScheme, canonicalize
from .pagetable import (MappingSet, LayoutPolicy, Allocator, Translation, REC_INDEX, build_table, count_nodes,
                        install_recursion, reference_translate)
from .memhier import CacheLevel, MemoryHierarchy, PressureGate, EnergyLedger, relative_delta
from .recursive import RecursionLayoutError, recursive_translate, recursive_va_for_node
from .walker import TLB, TLBHit, TLBHierarchy, PWCSet, PageWalker, PWC_STORES, PWC_ASSIGNMENTS
from .virtwalker import VirtConfig, NestedWalker, NestedTLB, host_mappings, naive_access_count
from .workload import Trace, FragmentationPolicy, generate, layout, load_trace, GENERATORS
from .tables import MetricsTable, ComparisonReport, METRIC_CATEGORIES
from .io.config import ConfigurationError, format_size, merge_config, parse_size, set_path, get_path, read_config
from .io.mappings import load_mappings

logger = logging.getLogger(__name__)

#: Files written by :py:meth:`MetricsReport.write`
REPORT_FILES = ('report.json', 'report.txt', 'counters.csv')

_PERCENTILES = (50, 95, 99)
_AXIS_SPLIT = re.compile(r',(?![^\[]*\])')


class Scenario:
    """
    A validated scenario configuration: the user's settings deep-merged over the bundled defaults.

    :raises: ConfigurationError if the merged configuration is invalid or inconsistent
    """

    @docval({'name': 'config', 'type': dict, 'doc': 'settings to merge over the defaults', 'default': None},
            {'name': 'defaults', 'type': dict, 'doc': 'base configuration. The bundled defaults if omitted',
             'default': None})
    def __init__(self, **kwargs):
        config, defaults = getargs('config', 'defaults', kwargs)
        defaults = load_default_config() if defaults is None else defaults
        self.__config = merge_config(defaults, config or {})
        self.__validate()

    @classmethod
    def from_file(cls, path=None, overrides=None):
        """
        Read a scenario file and apply overrides given as a mapping of dotted key paths to values,
        e.g., ``{'layout.scheme': '[18,18]'}``
        """
        config = read_config(path) if path is not None else {}
        for key, value in (overrides or {}).items():
            set_path(config, key, value)
        return cls(config=config)

    def with_overrides(self, overrides):
        """Get a new scenario with some dotted key paths changed"""
        config = self.to_dict()
        for key, value in overrides.items():
            set_path(config, key, value)
        return Scenario(config=config, defaults={})

    def to_dict(self):
        return copy.deepcopy(self.__config)

    def __getitem__(self, path):
        value = get_path(self.__config, path, KeyError)
        if value is KeyError:
            raise KeyError("No configuration key '%s'" % path)
        return value

    @property
    def label(self):
        return str(self.__config['label'])

    @property
    def seed(self):
        return int(self.__config['seed'])

    @property
    def virtualized(self):
        return bool(self['virtualization.enabled'])

    @property
    def scheme(self):
        """Level scheme of the native table, or of the guest table of a virtualized run"""
        if self.virtualized and self['virtualization.guest.scheme'] is not None:
            return LevelScheme.parse(self['virtualization.guest.scheme'])
        return LevelScheme.parse(self['layout.scheme'])

    @property
    def nf_threshold(self):
        if self.virtualized and self['virtualization.guest.scheme'] is not None:
            return self['virtualization.guest.nf_threshold']
        return self['layout.nf_threshold']

    @property
    def host_scheme(self):
        return LevelScheme.parse(self['virtualization.host.scheme']) if self.virtualized else None

    @property
    def fragmentation(self):
        return FragmentationPolicy(large_page_fraction=float(self['fragmentation.large_page_fraction']))

    @property
    def footprint(self):
        return parse_size(self['workload.footprint'])

    @property
    def refs(self):
        return int(self['workload.refs'])

    @property
    def warmup_refs(self):
        return int(self.__config.get('warmup_refs') or 0)

    @property
    def prioritization(self):
        return bool(self['prioritization.enabled'])

    def __validate(self):
        try:
            self.__check_workload()
            self.__check_layouts()
            self.__check_machine()
        except ConfigurationError:
            raise
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigurationError("Invalid scenario '%s': %s" % (self.__config.get('label'), e))

    def __check_workload(self):
        cfg = self.__config
        for section in ('workload', 'fragmentation', 'layout', 'virtualization', 'allocator', 'tlb', 'pwc', 'vpwc',
                        'nested_tlb', 'caches', 'prioritization', 'energy'):
            if not isinstance(cfg.get(section), dict):
                raise ConfigurationError("Missing configuration section '%s'" % section)
        if self['workload.trace'] is None:
            if self['workload.generator'] not in GENERATORS:
                raise ConfigurationError("Unknown generator '%s', expected one of %s" %
                                         (self['workload.generator'], ', '.join(GENERATORS)))
            if self.refs < 1:
                raise ConfigurationError("workload.refs must be positive, got %i" % self.refs)
            if self.warmup_refs >= self.refs:
                raise ConfigurationError("warmup_refs (%i) must be smaller than workload.refs (%i)" %
                                         (self.warmup_refs, self.refs))
        elif not os.path.exists(str(self['workload.trace'])):
            raise ConfigurationError("Trace file %s does not exist" % self['workload.trace'])
        if self['workload.mappings'] is not None and not os.path.exists(str(self['workload.mappings'])):
            raise ConfigurationError("Mapping file %s does not exist" % self['workload.mappings'])
        if self.warmup_refs < 0:
            raise ConfigurationError("warmup_refs must not be negative, got %i" % self.warmup_refs)
        footprint = self.footprint
        frag = self.fragmentation
        if frag.large_page_fraction > 0 and footprint % PageSize.SIZE_2M:
            raise ConfigurationError("Footprint %s is not 2 MB aligned, as required for %s" % (footprint, frag))

    def __check_layouts(self):
        _layout_policy(self.scheme, self.nf_threshold)
        if self.virtualized:
            if self['virtualization.host.scheme'] is None:
                raise ConfigurationError("A virtualized scenario needs a host layout (virtualization.host.scheme)")
            _layout_policy(self.host_scheme, self['virtualization.host.nf_threshold'])
            fraction = float(self['virtualization.host_large_page_fraction'])
            if not 0.0 <= fraction <= 1.0:
                raise ConfigurationError("virtualization.host_large_page_fraction must be in [0, 1], got %s" %
                                         fraction)
        for size, rate in self['allocator.failure_rate'].items():
            PageSize.parse(size)
            if not 0.0 <= float(rate) <= 1.0:
                raise ConfigurationError("allocator.failure_rate.%s must be in [0, 1], got %s" % (size, rate))

    def __check_machine(self):
        for section in ('pwc', 'vpwc'):
            if self['%s.assignment' % section] not in PWC_ASSIGNMENTS:
                raise ConfigurationError("%s.assignment must be one of %s, got '%s'" %
                                         (section, PWC_ASSIGNMENTS, self['%s.assignment' % section]))
        probability = float(self['prioritization.probability'])
        if not 0.0 <= probability <= 1.0:
            raise ConfigurationError("prioritization.probability must be in [0, 1], got %s" % probability)
        # building the structures once checks sizes, associativities, and latencies
        make_tlbs(self)
        make_pwcs(self, 'pwc')
        make_pwcs(self, 'vpwc')
        make_nested_tlb(self)
        mem = make_memory(self, seed=0)
        EnergyLedger.from_hierarchy(mem, coefficients=self['energy'])


def make_tlbs(scenario):
    """Create the TLB hierarchy of a scenario"""
    if not scenario['tlb.enabled']:
        return TLBHierarchy.disabled()
    specs = ((scenario['tlb.l1_4k'], 'L1-4K', (PageSize.SIZE_4K, )),
             (scenario['tlb.l1_2m'], 'L1-2M', (PageSize.SIZE_2M, )),
             (scenario['tlb.l2'], 'L2', (PageSize.SIZE_4K, PageSize.SIZE_2M)))
    tlbs = [TLB(name=name, entries=int(spec['entries']), assoc=int(spec['assoc']), latency=int(spec['latency']),
                page_sizes=sizes) for spec, name, sizes in specs]
    return TLBHierarchy(l1=tlbs[:2], l2=tlbs[2])


def make_pwcs(scenario, section='pwc'):
    """Create the page-walker caches of a scenario from the ``pwc`` (guest or native) or ``vpwc`` (host) section"""
    if not scenario['%s.enabled' % section]:
        return PWCSet.disabled()
    spec = scenario[section]
    sizes = {name: int(spec[name]) for name in PWC_STORES if spec.get(name)}
    return PWCSet(sizes=sizes, latency=int(scenario['%s.latency' % section]),
                  assignment=scenario['%s.assignment' % section])


def make_nested_tlb(scenario):
    if not scenario['nested_tlb.enabled']:
        return NestedTLB.disabled()
    return NestedTLB(entries=int(scenario['nested_tlb.entries']), latency=int(scenario['nested_tlb.latency']),
                     data_pages=bool(scenario['nested_tlb.data_pages']))


def make_memory(scenario, seed):
    """Create the cache hierarchy and its pressure gate"""
    caches = OrderedDict((name, {'size': parse_size(spec['size']), 'assoc': spec['assoc'],
                                 'latency': spec['latency']})
                         for name, spec in scenario['caches'].items() if name != 'line_size')
    gate = PressureGate(window=int(scenario['prioritization.window']),
                        threshold=float(scenario['prioritization.threshold']),
                        enabled=scenario.prioritization)
    return MemoryHierarchy.from_config(caches, line_size=int(scenario['caches.line_size']),
                                       dram_latency=int(scenario['dram_latency']), gate=gate, seed=seed,
                                       probability=float(scenario['prioritization.probability']))


class MetricsReport:
    """
    Metrics of one run.

    :ivar run: OrderedDict describing the run (label, scheme, host_scheme, virtualized, fragmentation,
               prioritization, generator, seed)
    :ivar workload: OrderedDict identifying the replayed references. Runs are comparable if it matches
    :ivar metrics: OrderedDict of metric group to OrderedDict of metric to value
    :ivar counters: pandas DataFrame with the cache counters
    :ivar config: the scenario configuration
    """

    @docval({'name': 'run', 'type': dict, 'doc': 'description of the run'},
            {'name': 'workload', 'type': dict, 'doc': 'identity of the replayed references'},
            {'name': 'metrics', 'type': dict, 'doc': 'metric group to metrics'},
            {'name': 'counters', 'type': pd.DataFrame, 'doc': 'cache counters', 'default': None},
            {'name': 'config', 'type': dict, 'doc': 'the scenario configuration', 'default': None})
    def __init__(self, **kwargs):
        run, workload, metrics, counters, config = getargs('run', 'workload', 'metrics', 'counters', 'config',
                                                           kwargs)
        self.run = OrderedDict(run)
        self.workload = OrderedDict(workload)
        self.metrics = OrderedDict((k, OrderedDict(v)) for k, v in metrics.items())
        self.counters = counters if counters is not None else pd.DataFrame()
        self.config = config or {}

    @property
    def label(self):
        return self.run['label']

    def __getitem__(self, key):
        """Get a metric by ``'category.metric'``"""
        category, _, metric = key.partition('.')
        try:
            return self.metrics[category][metric]
        except KeyError:
            raise KeyError("No metric %s in report %s" % (key, self.label))

    def to_dict(self):
        return OrderedDict([('run', self.run), ('workload', self.workload), ('metrics', self.metrics),
                            ('counters', self.counters.to_dict(orient='records')), ('config', self.config)])

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data):
        for key in ('run', 'workload', 'metrics'):
            if key not in data:
                raise ValueError("Not a metrics report: missing '%s'" % key)
        counters = pd.DataFrame(data.get('counters') or [])
        return cls(run=data['run'], workload=data['workload'], metrics=data['metrics'], counters=counters,
                   config=data.get('config'))

    @classmethod
    def from_json(cls, path):
        with open(path, 'r') as f:
            data = json.load(f, object_pairs_hook=OrderedDict)
        return cls.from_dict(data)

    def to_text(self):
        """Aligned human-readable rendering of the run and its metrics"""
        lines = ['%-14s %s' % (k, v) for k, v in self.run.items()]
        lines += ['%-14s %s' % (k, format_size(v) if k == 'footprint' and v else v) for k, v in self.workload.items()]
        for category, values in self.metrics.items():
            if not values:
                continue
            lines.append('')
            lines.append('[%s]' % category)
            series = pd.Series(values, dtype=object)
            lines.append(series.to_string())
        return '\n'.join(lines) + '\n'

    def write(self, out_dir):
        """Write report.json, report.txt, and counters.csv to out_dir, creating it if needed"""
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'report.json'), 'w') as f:
            f.write(self.to_json())
        with open(os.path.join(out_dir, 'report.txt'), 'w') as f:
            f.write(self.to_text())
        self.counters.to_csv(os.path.join(out_dir, 'counters.csv'), index=False)
        logger.info("Wrote report of run %s to %s", self.label, out_dir)

    def __repr__(self):
        return 'MetricsReport(%s)' % self.label


def _spawn_seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _failure_rates(scenario):
    return {PageSize.parse(k): float(v) for k, v in scenario['allocator.failure_rate'].items()}


def _layout_policy(scheme, nf_threshold):
    # the default threshold also applies to schemes without a flattened L2+L1 level
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return LayoutPolicy(scheme=scheme, nf_threshold=nf_threshold)


def load_workload(scenario):
    """Generate or read the trace of a scenario"""
    path = scenario['workload.trace']
    if path is not None:
        trace = load_trace(str(path))
        if trace.footprint is None:
            trace.footprint = scenario.footprint
        return trace
    return generate(generator=scenario['workload.generator'], footprint=scenario.footprint, n=scenario.refs,
                    seed=scenario.seed, stride=int(scenario['workload.stride']),
                    va_base=int(scenario['workload.va_base']))


def workload_identity(trace, warmup_refs=0):
    """Description of a trace that matches for runs replaying the same references"""
    digest = hashlib.sha256(trace.va.tobytes() + trace.is_write.tobytes()).hexdigest()[:16]
    return OrderedDict([('generator', trace.generator), ('footprint', trace.footprint), ('seed', trace.seed),
                        ('va_base', trace.va_base), ('references', len(trace)), ('warmup_refs', warmup_refs),
                        ('digest', digest)])


class Simulation:
    """The tables, walk caches, and memory hierarchy of one run, with the statistics of its walks"""

    def __init__(self, scenario, trace):
        self.scenario = scenario
        self.trace = trace
        layout_seed, alloc_seed, host_seed, mem_seed = _spawn_seeds(scenario.seed, 4)
        scheme = scenario.scheme
        if scenario['workload.mappings'] is not None:
            self.maps = load_mappings(str(scenario['workload.mappings']), va_bits=scheme.va_bits)
        else:
            self.maps = layout(footprint=trace.footprint, frag=scenario.fragmentation, seed=layout_seed,
                               va_base=trace.va_base, va_bits=scheme.va_bits)
        self.alloc = Allocator(seed=alloc_seed, failure_rates=_failure_rates(scenario))
        policy = _layout_policy(scheme, scenario.nf_threshold)
        self.table = build_table(maps=self.maps, layout=policy, alloc=self.alloc)
        self.mem = make_memory(scenario, seed=mem_seed)
        self.tlbs = make_tlbs(scenario)
        self.pwcs = make_pwcs(scenario, 'pwc')
        self.host_table = None
        self.host_alloc = None
        self.cfg = None
        if scenario.virtualized:
            host_scheme = scenario.host_scheme
            host_maps = host_mappings(guest_maps=self.maps, guest_table=self.table,
                                      large_page_fraction=float(scenario['virtualization.host_large_page_fraction']),
                                      va_bits=host_scheme.va_bits)
            self.host_alloc = Allocator(seed=host_seed, failure_rates=_failure_rates(scenario))
            host_policy = _layout_policy(host_scheme, scenario['virtualization.host.nf_threshold'])
            self.host_table = build_table(maps=host_maps, layout=host_policy, alloc=self.host_alloc)
            self.cfg = VirtConfig(guest_table=self.table, host_table=self.host_table, guest_pwcs=self.pwcs,
                                  vpwcs=make_pwcs(scenario, 'vpwc'), nested_tlb=make_nested_tlb(scenario))
            self.cfg.check_host_coverage(host_maps, self.maps)
            self.walker = NestedWalker(cfg=self.cfg, mem=self.mem, tlbs=self.tlbs)
        else:
            self.walker = PageWalker(table=self.table, mem=self.mem, tlbs=self.tlbs, pwcs=self.pwcs)
        self.reset_statistics()

    def reset_statistics(self):
        self.walk_accesses = []
        self.walk_latency = []
        self.skipped_levels = 0
        self.pte_serviced = Counter()
        self.pte_lines = set()
        self.host_walks = 0
        self.nested_hits = 0
        self.references = 0
        self.unmapped = 0
        self.translation_cycles = 0
        self.data_cycles = 0
        self.mem.reset_counters()
        self.mem.gate.reset_counters()
        self.tlbs.reset_counters()
        self.pwcs.reset_counters()
        if self.cfg is not None:
            self.cfg.vpwcs.reset_counters()
            self.cfg.nested_tlb.reset_counters()

    def replay(self, warmup_refs=0):
        """Replay every reference of the trace. Statistics restart after ``warmup_refs`` references"""
        walker = self.walker
        mem = self.mem
        gate = mem.gate
        line_shift = mem.line_shift
        for i, va in enumerate(self.trace.va.tolist()):
            if i == warmup_refs and i:
                self.reset_statistics()
            translation, result = walker.translate(va)
            walked = not isinstance(result, TLBHit)
            gate.update_pressure(walked)
            self.references += 1
            if walked:
                self.walk_accesses.append(len(result.accesses))
                self.walk_latency.append(result.total_latency)
                self.translation_cycles += result.total_latency
                self.skipped_levels += result.skipped_levels
                for access in result.accesses:
                    self.pte_serviced[access.serviced_at] += 1
                    self.pte_lines.add(access.addr >> line_shift)
                self.host_walks += getattr(result, 'host_walks', 0)
                self.nested_hits += getattr(result, 'nested_tlb_hits', 0)
            else:
                self.translation_cycles += result.latency
            if translation is None:
                self.unmapped += 1
                continue
            latency, _ = mem.access(translation.address(va), 0)
            self.data_cycles += latency

    def walk_metrics(self):
        res = OrderedDict()
        walks = len(self.walk_accesses)
        accesses = np.asarray(self.walk_accesses, dtype=np.float64)
        latency = np.asarray(self.walk_latency, dtype=np.float64)
        res['references'] = self.references
        res['walks'] = walks
        res['unmapped'] = self.unmapped
        res['mean_accesses'] = float(accesses.mean()) if walks else 0.0
        for p, value in zip(_PERCENTILES, np.percentile(accesses, _PERCENTILES) if walks else [0.0] * 3):
            res['p%i_accesses' % p] = float(value)
        res['max_accesses'] = float(accesses.max()) if walks else 0.0
        res['mean_latency'] = float(latency.mean()) if walks else 0.0
        for p, value in zip(_PERCENTILES, np.percentile(latency, _PERCENTILES) if walks else [0.0] * 3):
            res['p%i_latency' % p] = float(value)
        res['max_latency'] = float(latency.max()) if walks else 0.0
        res['mean_skipped_levels'] = self.skipped_levels / walks if walks else 0.0
        for name in self.mem.names:
            res['pte_%s_per_walk' % name.lower()] = self.pte_serviced[name] / walks if walks else 0.0
        res['distinct_pte_lines'] = len(self.pte_lines)
        res['translation_cycles_per_ref'] = self.translation_cycles / self.references if self.references else 0.0
        res['data_cycles_per_ref'] = self.data_cycles / self.references if self.references else 0.0
        res['prioritized_fraction'] = self.mem.gate.prioritized_fraction
        if self.cfg is not None:
            res['host_walks_per_walk'] = self.host_walks / walks if walks else 0.0
            nested = self.cfg.nested_tlb
            res['nested_tlb_hit_rate'] = nested.hits / nested.lookups if nested.lookups else 0.0
        return res

    def tlb_metrics(self):
        tlbs = self.tlbs
        res = OrderedDict([('lookups', tlbs.lookups)])
        res['l1_hit_rate'] = tlbs.l1_hits / tlbs.lookups if tlbs.lookups else 0.0
        l2_lookups = tlbs.lookups - tlbs.l1_hits
        res['l2_hit_rate'] = tlbs.l2_hits / l2_lookups if l2_lookups > 0 else 0.0
        res['miss_rate'] = tlbs.misses / tlbs.lookups if tlbs.lookups else 1.0
        return res

    def pwc_metrics(self):
        res = OrderedDict()
        sets = [('', self.pwcs)]
        if self.cfg is not None:
            sets.append(('vpwc_', self.cfg.vpwcs))
        for prefix, pwcs in sets:
            res['%slookups' % prefix] = pwcs.lookups
            res['%shit_rate' % prefix] = pwcs.hit_rate()
            for name in pwcs.stores:
                res['%shit_rate_%s' % (prefix, name)] = pwcs.hit_rate(name)
        return res

    def cache_metrics(self):
        res = OrderedDict()
        for level in self.mem.levels:
            for kind, kind_name in enumerate(('data', 'pte')):
                res['%s_%s_miss_ratio' % (level.name, kind_name)] = (level.misses[kind] / level.lookups[kind]
                                                                     if level.lookups[kind] else 0.0)
            lookups = sum(level.lookups)
            res['%s_miss_ratio' % level.name] = sum(level.misses) / lookups if lookups else 0.0
        res['dram_data'] = self.mem.dram[0]
        res['dram_pte'] = self.mem.dram[1]
        return res

    def census_metrics(self):
        res = OrderedDict()
        tables = [('', self.table, self.alloc)]
        if self.host_table is not None:
            tables.append(('host_', self.host_table, self.host_alloc))
        for prefix, table, alloc in tables:
            counts, total = count_nodes(table=table)
            for size, count in counts.items():
                res['%snodes_%s' % (prefix, size.label)] = count
            res['%stable_bytes' % prefix] = total
            res['%sreplicated_entries' % prefix] = table.replicated_entries()
            for size in (PageSize.SIZE_2M, PageSize.SIZE_1G):
                res['%srefused_%s' % (prefix, size.label)] = alloc.refusals[size]
        res['mappings_4k'] = self.maps.count(PageSize.SIZE_4K)
        res['mappings_2m'] = self.maps.count(PageSize.SIZE_2M)
        return res

    def report(self):
        scenario = self.scenario
        ledger = EnergyLedger.from_hierarchy(self.mem, coefficients=scenario['energy'])
        run = OrderedDict([('label', scenario.label),
                           ('scheme', str(scenario.scheme)),
                           ('host_scheme', str(scenario.host_scheme) if scenario.virtualized else ''),
                           ('virtualized', scenario.virtualized),
                           ('fragmentation', scenario.fragmentation.large_page_fraction),
                           ('prioritization', scenario.prioritization),
                           ('generator', self.trace.generator),
                           ('seed', scenario.seed)])
        metrics = OrderedDict([('walks', self.walk_metrics()),
                               ('tlb', self.tlb_metrics()),
                               ('pwc', self.pwc_metrics()),
                               ('caches', self.cache_metrics()),
                               ('energy', ledger.to_dict()),
                               ('census', self.census_metrics())])
        return MetricsReport(run=run, workload=workload_identity(self.trace, scenario.warmup_refs),
                             metrics=metrics, counters=self.mem.counters(), config=scenario.to_dict())


@docval({'name': 'cfg', 'type': Scenario, 'doc': 'the scenario to run'},
        {'name': 'trace', 'type': Trace, 'doc': 'replay this trace instead of the configured workload',
         'default': None},
        returns='the metrics of the run', rtype=MetricsReport, is_method=False)
def run_scenario(**kwargs):
    """
    Build the tables of a scenario and replay its trace through TLBs, walker, and caches.
    Every reference is translated and then issues its data access at the translated address.

    :raises: ConfigurationError if the scenario cannot be simulated
    """
    cfg, trace = getargs('cfg', 'trace', kwargs)
    trace = load_workload(cfg) if trace is None else trace
    if trace.footprint is None:
        trace.footprint = cfg.footprint
    if cfg.warmup_refs >= len(trace) and len(trace):
        raise ConfigurationError("warmup_refs (%i) must be smaller than the %i references of the trace" %
                                 (cfg.warmup_refs, len(trace)))
    logger.info("Run %s: %s table%s, %i references", cfg.label, cfg.scheme,
                ' on %s host table' % cfg.host_scheme if cfg.virtualized else '', len(trace))
    try:
        sim = Simulation(cfg, trace)
    except ConfigurationError:
        raise
    except ValueError as e:
        raise ConfigurationError("Cannot set up run %s: %s" % (cfg.label, e))
    sim.replay(cfg.warmup_refs)
    report = sim.report()
    logger.info("Run %s finished: %i walks, %.3f accesses per walk", cfg.label, report['walks.walks'],
                report['walks.mean_accesses'])
    return report


def _numeric(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@docval({'name': 'baseline', 'type': MetricsReport, 'doc': 'the baseline run'},
        {'name': 'variants', 'type': (list, tuple), 'doc': 'MetricsReport objects of the variant runs'},
        returns='relative delta of every metric of every variant', rtype=ComparisonReport, is_method=False)
def compare(**kwargs):
    """
    Compare variant runs against a baseline run, metric by metric, as ``(value - baseline) / baseline``

    :raises: ValueError if a variant replayed a different workload than the baseline
    """
    baseline, variants = getargs('baseline', 'variants', kwargs)
    report = ComparisonReport(baseline_label=baseline.label)
    seen = Counter()
    for variant in variants:
        if dict(variant.workload) != dict(baseline.workload):
            raise ValueError("Run %s replayed a different workload than baseline %s: %s vs. %s" %
                             (variant.label, baseline.label, dict(variant.workload), dict(baseline.workload)))
        seen[variant.label] += 1
        label = variant.label if seen[variant.label] == 1 else '%s#%i' % (variant.label, seen[variant.label])
        for category in METRIC_CATEGORIES:
            base_values = baseline.metrics.get(category, {})
            for metric, value in variant.metrics.get(category, {}).items():
                base = base_values.get(metric)
                if not (_numeric(value) and _numeric(base)):
                    continue
                report.add_delta(variant=label, category=category, metric=metric, baseline=float(base),
                                 value=float(value), delta=float(relative_delta(value, base)))
    return report


def parse_axis(text):
    """
    Parse a sweep axis ``key.path=v1,v2,...``. Values are read as YAML scalars

    :returns: tuple of (dotted key path, list of values)
    """
    key, sep, values = text.partition('=')
    if not sep or not key.strip() or not values.strip():
        raise ConfigurationError("Invalid sweep axis '%s', expected key.path=value1,value2" % text)
    yaml = YAML(typ='safe')
    # commas inside brackets belong to list values such as level schemes
    return key.strip(), [yaml.load(v) for v in _AXIS_SPLIT.split(values)]


def parse_setting(text):
    """
    Parse a single setting ``key.path=value``. The value is read as a YAML scalar or flow sequence

    :returns: tuple of (dotted key path, value)
    """
    key, sep, value = text.partition('=')
    if not sep or not key.strip() or not value.strip():
        raise ConfigurationError("Invalid setting '%s', expected key.path=value" % text)
    return key.strip(), YAML(typ='safe').load(value)


def _label(base, combination):
    parts = []
    for key, value in combination:
        name = key.rsplit('.', 1)[-1]
        parts.append('%s=%s' % (name, value))
    return '%s[%s]' % (base, ','.join(parts))


def _run_config(config):
    return run_scenario(cfg=Scenario(config=config, defaults={}))


@docval({'name': 'scenario', 'type': Scenario, 'doc': 'the base scenario'},
        {'name': 'axes', 'type': dict, 'doc': 'mapping of dotted key path to the list of values to sweep'},
        {'name': 'jobs', 'type': int, 'doc': 'number of worker processes', 'default': 1},
        returns='tuple of (MetricsTable with one row per run, list of MetricsReport)', rtype=tuple,
        is_method=False)
def sweep(**kwargs):
    """
    Run the cartesian product of the axes. Runs are independent and may execute in worker processes;
    results are aggregated in the order of the product.

    :raises: ConfigurationError if any combination is invalid. All combinations are validated before the
             first run starts
    """
    scenario, axes, jobs = getargs('scenario', 'axes', 'jobs', kwargs)
    if jobs < 1:
        raise ConfigurationError("jobs must be at least 1, got %i" % jobs)
    keys = list(axes)
    configs = []
    for values in itertools.product(*(axes[k] for k in keys)):
        combination = list(zip(keys, values))
        run = scenario.with_overrides(OrderedDict(combination + [('label', _label(scenario.label, combination))]))
        configs.append(run.to_dict())
    logger.info("Sweep of %i runs over %s with %i job(s)", len(configs), ', '.join(keys) or 'nothing', jobs)
    if jobs == 1 or len(configs) < 2:
        reports = [_run_config(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            reports = list(executor.map(_run_config, configs))
    return MetricsTable.from_reports(reports), reports


# Acceptance matrix

class CheckResult:
    """Outcome of one acceptance check"""

    def __init__(self, number, name, passed, detail):
        self.number = number
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def __str__(self):
        return '%2i %-26s %s  %s' % (self.number, self.name, 'PASS' if self.passed else 'FAIL', self.detail)


_QUICK = {'refs': 100000, 'warmup': 10000, 'oracle_cases': 300, 'pressure_footprint': '1G',
          'pressure_caches': {'L1D': {'size': '32K'}, 'L2': {'size': '256K'}, 'L3': {'size': '2M'}},
          'pressure_refs': 200000, 'pressure_warmup': 100000}
_FULL = {'refs': 1000000, 'warmup': 100000, 'oracle_cases': 100000, 'pressure_footprint': '8G',
         'pressure_caches': {}, 'pressure_refs': 2000000, 'pressure_warmup': 1000000}


def _scenario(**settings):
    """Scenario from dotted key paths, e.g., ``_scenario(**{'layout.scheme': '[18,18]'})``"""
    config = {}
    for key, value in settings.items():
        set_path(config, key, value)
    return Scenario(config=config)


def _no_translation_caches():
    return {'tlb.enabled': False, 'pwc.enabled': False, 'vpwc.enabled': False, 'nested_tlb.enabled': False}


def check_cold_access_counts(mode):
    expected = OrderedDict([('[9,9,9,9]', 4), ('[18,18]', 2), ('[9,18,9]', 3)])
    found = OrderedDict()
    for scheme in expected:
        report = run_scenario(cfg=_scenario(label=scheme, seed=1, **_no_translation_caches(),
                                            **{'layout.scheme': scheme, 'workload.footprint': '64M',
                                               'workload.refs': 200}))
        found[scheme] = report['walks.max_accesses'], report['walks.mean_accesses']
    ok = all(found[s] == (float(n), float(n)) for s, n in expected.items())
    virt = OrderedDict([(('[9,9,9,9]', '[9,9,9,9]'), 24), (('[18,18]', '[9,9,9,9]'), 14),
                        (('[9,9,9,9]', '[18,18]'), 14), (('[18,18]', '[18,18]'), 8)])
    for (guest, host), n in virt.items():
        g, h = LevelScheme.parse(guest).levels, LevelScheme.parse(host).levels
        report = run_scenario(cfg=_scenario(label='%s/%s' % (guest, host), seed=1, **_no_translation_caches(),
                                            **{'layout.scheme': guest, 'virtualization.enabled': True,
                                               'virtualization.host.scheme': host, 'workload.footprint': '64M',
                                               'workload.refs': 200}))
        found[(guest, host)] = report['walks.mean_accesses']
        ok = ok and report['walks.mean_accesses'] == n == naive_access_count(g_levels=g, h_levels=h)
    return ok, ', '.join('%s: %s' % (k, v) for k, v in found.items())


def check_node_census(mode):
    maps = layout(footprint=8 << 30, frag=FragmentationPolicy(large_page_fraction=0.0))
    conv, conv_bytes = count_nodes(table=build_table(maps=maps, layout=LayoutPolicy(scheme='[9,9,9,9]')))
    flat, flat_bytes = count_nodes(table=build_table(maps=maps, layout=LayoutPolicy(scheme='[18,18]')))
    ok = (conv[PageSize.SIZE_4K] == 4106 and sum(conv.values()) == 4106 and
          flat[PageSize.SIZE_2M] == 9 and sum(flat.values()) == 9)
    return ok, 'conventional %i nodes (%i B), flattened %i nodes (%i B)' % (sum(conv.values()), conv_bytes,
                                                                           sum(flat.values()), flat_bytes)


def check_pwc_steady_state(mode):
    common = {'workload.footprint': '8G', 'workload.refs': mode['refs'], 'warmup_refs': mode['warmup'], 'seed': 3}
    base = run_scenario(cfg=_scenario(**common, **{'layout.scheme': '[9,9,9,9]'}))['walks.mean_accesses']
    flat = run_scenario(cfg=_scenario(**common, **{'layout.scheme': '[18,18]'}))['walks.mean_accesses']
    ok = 2.0 <= base <= 2.6 and 1.0 <= flat <= 1.05
    detail = 'baseline %.3f, flattened %.3f' % (base, flat)
    for generator in ('sequential', 'chase'):
        value = run_scenario(cfg=_scenario(**common, **{'layout.scheme': '[18,18]',
                                                        'workload.generator': generator}))['walks.mean_accesses']
        ok = ok and abs(value - 1.0) <= 0.01
        detail += ', flattened %s %.3f' % (generator, value)
    return ok, detail


def check_virtualized_steady_state(mode):
    common = {'workload.footprint': '8G', 'workload.refs': mode['refs'], 'warmup_refs': mode['warmup'], 'seed': 3,
              'layout.scheme': '[18,18]', 'virtualization.enabled': True, 'virtualization.host.scheme': '[18,18]'}
    random = run_scenario(cfg=_scenario(**common))['walks.mean_accesses']
    ok = 2.5 <= random <= 3.2
    detail = 'random %.3f' % random
    for generator in ('sequential', 'chase'):
        value = run_scenario(cfg=_scenario(**common, **{'workload.generator': generator}))['walks.mean_accesses']
        ok = ok and value <= 3.0
        detail += ', %s %.3f' % (generator, value)
    return ok, detail


_ORACLE_SCHEMES = ('[9,9,9,9]', '[18,18]', '[9,18,9]', '[18,9,9]', '[9,9,18]')


def random_mappings(rng, max_mappings=64, regions=3, avoid_slot=None):
    """
    Random MappingSet of 4 kB and 2 MB pages clustered in a few 1 GB regions anywhere in the 48 bit space

    :param avoid_slot: top 9 bit root slot the mappings must not use
    """
    records = {}
    region_ids = set()
    while len(region_ids) < regions:
        region = int(rng.integers(0, 1 << 18))
        if avoid_slot is None or region >> 9 != avoid_slot:
            region_ids.add(region)
    region_ids = sorted(region_ids)
    target = int(rng.integers(max(1, max_mappings // 4), max_mappings + 1))
    while len(records) < target:
        region = region_ids[int(rng.integers(0, len(region_ids)))]
        chunk = (region << 9) | int(rng.integers(0, 512))
        if any((chunk << 21) <= va < ((chunk + 1) << 21) for va in records):
            continue
        if rng.random() < 0.4:
            records[chunk << 21] = (int(rng.integers(0, 1 << 18)) << 21, int(PageSize.SIZE_2M))
        else:
            for page in rng.choice(512, size=int(rng.integers(1, 5)), replace=False):
                records[(chunk << 21) | (int(page) << 12)] = (int(rng.integers(0, 1 << 27)) << 12,
                                                              int(PageSize.SIZE_4K))
    return MappingSet.from_records([(canonicalize(va), pa, size) for va, (pa, size) in records.items()])


def _small_walker(table, prioritize, seed):
    levels = [CacheLevel(name='L1D', size=1024, assoc=2, latency=4),
              CacheLevel(name='L2', size=4096, assoc=4, latency=12, prioritizable=True),
              CacheLevel(name='L3', size=16384, assoc=4, latency=42, prioritizable=True)]
    gate = PressureGate(window=1, threshold=0.0, enabled=prioritize)
    mem = MemoryHierarchy(levels=levels, gate=gate, seed=seed)
    tlbs = TLBHierarchy(l1=[TLB(name='L1-4K', entries=4, assoc=2), TLB(name='L1-2M', entries=2, assoc=2,
                                                                          page_sizes=(PageSize.SIZE_2M, ))],
                        l2=TLB(name='L2', entries=8, assoc=4, latency=9,
                               page_sizes=(PageSize.SIZE_4K, PageSize.SIZE_2M)))
    pwcs = PWCSet(sizes={'L2': 3, 'L3': 2, 'L4': 1})
    return PageWalker(table=table, mem=mem, tlbs=tlbs, pwcs=pwcs)


def check_oracle_equivalence(mode):
    failures = 0
    cases = mode['oracle_cases']
    for case in range(cases):
        rng = np.random.default_rng([7, case])
        maps = random_mappings(rng)
        scheme = _ORACLE_SCHEMES[case % len(_ORACLE_SCHEMES)]
        nf = int(rng.integers(1, 4)) if scheme in ('[18,18]', '[9,9,18]') and rng.random() < 0.5 else None
        rate = float(rng.choice([0.0, 0.5, 1.0]))
        table = build_table(maps=maps, layout=LayoutPolicy(scheme=scheme, nf_threshold=nf),
                            alloc=Allocator(seed=case, failure_rates={PageSize.SIZE_2M: rate}))
        addresses = [va + int(rng.integers(0, size)) for va, _, size in maps]
        addresses += [canonicalize(int(rng.integers(0, 1 << 36)) << 12) for _ in range(8)]
        expected = [maps.lookup(va) for va in addresses]
        if [reference_translate(table, va) for va in addresses] != expected:
            failures += 1
            continue
        for prioritize in (False, True):
            walker = _small_walker(table, prioritize, seed=case)
            if [walker.translate(va)[0] for va in addresses + addresses[::-1]] != expected + expected[::-1]:
                failures += 1
                break
    return failures == 0, '%i of %i cases disagree' % (failures, cases)


def check_recursive_reachability(mode):
    unreachable = 0
    nodes = 0
    for i, scheme in enumerate(('[9,9,9,9]', '[9,18,9]', '[18,9,9]')):
        maps = random_mappings(np.random.default_rng([11, i]), regions=2, avoid_slot=REC_INDEX)
        table = build_table(maps=maps, layout=LayoutPolicy(scheme=scheme))
        install_recursion(table=table)
        for node in table:
            nodes += 1
            _, va = recursive_va_for_node(table=table, node=node)
            if recursive_translate(table=table, va=va) != Translation(node.base, int(node.size)):
                unreachable += 1
    # without overlapping index bits, the root and the L1 nodes of [18,9,9] cannot be reached
    failing_depths = set()
    for node in table:
        try:
            recursive_va_for_node(table=table, node=node, overlap=False)
        except RecursionLayoutError:
            failing_depths.add(node.depth)
    ok = unreachable == 0 and failing_depths == {0, 2}
    return ok, '%i of %i nodes unreachable, non-overlap failures at depths %s' % (unreachable, nodes,
                                                                                sorted(failing_depths))


def check_allocator_fallback(mode):
    maps = layout(footprint=64 << 20, frag=FragmentationPolicy(large_page_fraction=0.5), seed=5)
    conv = build_table(maps=maps, layout=LayoutPolicy(scheme='[9,9,9,9]'))
    ok = True
    for scheme in ('[18,18]', '[9,18,9]'):
        fallback = build_table(maps=maps, layout=LayoutPolicy(scheme=scheme),
                               alloc=Allocator.refusing(PageSize.SIZE_2M))
        ok = ok and fallback.structure() == conv.structure()
    report = run_scenario(cfg=_scenario(**_no_translation_caches(),
                                        **{'layout.scheme': '[18,18]', 'allocator.failure_rate.2M': 1.0,
                                           'workload.footprint': '64M', 'workload.refs': 200}))
    ok = ok and report['walks.mean_accesses'] == 4.0
    return ok, 'structures %s, accesses per walk %.2f' % ('identical' if ok else 'differ',
                                                          report['walks.mean_accesses'])


def _pressure_runs(mode, schemes_prio):
    settings = {'workload.footprint': mode['pressure_footprint'], 'workload.refs': mode['pressure_refs'],
                'warmup_refs': mode['pressure_warmup'], 'seed': 9}
    for level, spec in mode['pressure_caches'].items():
        for key, value in spec.items():
            settings['caches.%s.%s' % (level, key)] = value
    return [run_scenario(cfg=_scenario(**settings, **{'layout.scheme': scheme, 'prioritization.enabled': prio}))
            for scheme, prio in schemes_prio]


def check_prioritization_trend(mode):
    normal, prio = _pressure_runs(mode, [('[9,9,9,9]', False), ('[9,9,9,9]', True)])
    latency = relative_delta(prio['walks.mean_latency'], normal['walks.mean_latency'])
    dram = relative_delta(prio['walks.pte_dram_per_walk'], normal['walks.pte_dram_per_walk'])
    l2_data = prio['caches.L2_data_miss_ratio'] - normal['caches.L2_data_miss_ratio']
    ok = latency <= -0.15 and dram <= -0.5 and l2_data <= 0.10
    return ok, 'walk latency %+.1f%%, pte DRAM per walk %+.1f%%, L2 data miss ratio %+.1f pp' % (
        100 * latency, 100 * dram, 100 * l2_data)


def check_nf_regions(mode):
    common = {'workload.footprint': '8G', 'workload.refs': mode['refs'], 'warmup_refs': mode['warmup'], 'seed': 3,
              'layout.scheme': '[18,18]', 'fragmentation.large_page_fraction': 1.0}
    plain = run_scenario(cfg=_scenario(**common, **{'layout.nf_threshold': None}))
    nf = run_scenario(cfg=_scenario(**common, **{'layout.nf_threshold': 32}))
    lines = plain['walks.distinct_pte_lines'], nf['walks.distinct_pte_lines']
    ok = lines[0] >= 100 * max(lines[1], 1) and nf['walks.mean_accesses'] <= plain['walks.mean_accesses']
    return ok, 'distinct pte lines %i vs. %i NF, accesses per walk %.3f vs. %.3f NF' % (
        lines[0], lines[1], plain['walks.mean_accesses'], nf['walks.mean_accesses'])


def check_energy_monotonicity(mode):
    base, flat, flat_prio = _pressure_runs(mode, [('[9,9,9,9]', False), ('[18,18]', False), ('[18,18]', True)])
    ok = True
    details = []
    for name, report in (('flattened', flat), ('flattened+prioritized', flat_prio)):
        cache = relative_delta(report['energy.cache_energy'], base['energy.cache_energy'])
        dram = relative_delta(report['energy.dram_energy'], base['energy.dram_energy'])
        ok = ok and cache <= 0 and dram <= 0
        details.append('%s cache %+.1f%% DRAM %+.1f%%' % (name, 100 * cache, 100 * dram))
    return ok, ', '.join(details)


#: Acceptance checks by number
ACCEPTANCE_CHECKS = OrderedDict([
    (1, ('cold-access-counts', check_cold_access_counts)),
    (2, ('node-census', check_node_census)),
    (3, ('pwc-steady-state', check_pwc_steady_state)),
    (4, ('virtualized-steady-state', check_virtualized_steady_state)),
    (5, ('oracle-equivalence', check_oracle_equivalence)),
    (6, ('recursive-reachability', check_recursive_reachability)),
    (7, ('allocator-fallback', check_allocator_fallback)),
    (8, ('prioritization-trend', check_prioritization_trend)),
    (9, ('nf-regions', check_nf_regions)),
    (10, ('energy-monotonicity', check_energy_monotonicity)),
])


@docval({'name': 'quick', 'type': bool, 'doc': 'use desk-scale reference counts and footprints', 'default': True},
        {'name': 'checks', 'type': (list, tuple), 'doc': 'numbers of the checks to run. All if omitted',
         'default': None},
        returns='list of CheckResult', rtype=list, is_method=False)
def repro(**kwargs):
    """Run the acceptance matrix"""
    quick, checks = popargs('quick', 'checks', kwargs)
    mode = _QUICK if quick else _FULL
    numbers = list(ACCEPTANCE_CHECKS) if checks is None else list(checks)
    unknown = [n for n in numbers if n not in ACCEPTANCE_CHECKS]
    if unknown:
        raise ConfigurationError("Unknown acceptance checks %s, expected numbers 1 to %i" %
                                 (unknown, len(ACCEPTANCE_CHECKS)))
    results = []
    for number in numbers:
        name, check = ACCEPTANCE_CHECKS[number]
        logger.info("Acceptance check %i: %s", number, name)
        passed, detail = check(mode)
        results.append(CheckResult(number, name, passed, detail))
        logger.info("%s", results[-1])
    return results
