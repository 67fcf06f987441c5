"""
Data and page-table accesses through an inclusive L1D/L2/L3 hierarchy backed by a fixed-latency DRAM.

Lines remember whether they hold page-table entries and the context that brought them in. While
the :py:class:`PressureGate` observes many L2-TLB misses, the prioritizable levels (L2 and L3)
evict data lines in preference to page-table lines.
"""
import logging
from collections import OrderedDict
from enum import Enum

import numpy as np
import pandas as pd
from hdmf.utils import docval, getargs

logger = logging.getLogger(__name__)

DATA = 0
PTE = 1
KIND_NAMES = ('data', 'pte')
DRAM = 'DRAM'

#: Probability of preferring a data victim while prioritizing page-table lines
PRIORITIZE_PROBABILITY = 0.99
#: Default DRAM latency in cycles
DRAM_LATENCY = 170
#: Default relative dynamic energy per access
ENERGY_COEFFICIENTS = OrderedDict([('L1D', 1.0), ('L2', 2.0), ('L3', 10.0), ('DRAM', 100.0)])


class ReplacementMode(Enum):
    NORMAL = 'normal'
    PRIORITIZE = 'prioritize'


class RandomDraws:
    """Uniform draws in [0, 1) from a seeded numpy generator, produced in batches"""

    def __init__(self, seed=0, batch=4096):
        self.__rng = np.random.default_rng(seed)
        self.__batch = batch
        self.__buffer = self.__rng.random(batch)
        self.__next = 0

    def random(self):
        if self.__next == self.__batch:
            self.__buffer = self.__rng.random(self.__batch)
            self.__next = 0
        value = self.__buffer[self.__next]
        self.__next += 1
        return float(value)


def select_victim(cache_set, mode, rng, ctx=0, probability=PRIORITIZE_PROBABILITY):
    """
    Choose the line to evict from a full set.

    :param cache_set: OrderedDict of line -> (kind, context) ordered from least to most recently used
    :param mode: ReplacementMode of the level
    :param rng: object with a ``random()`` method returning draws in [0, 1)
    :param ctx: context of the access causing the eviction
    :param probability: probability of evicting the least recently used data line of ``ctx`` when prioritizing

    :returns: the victim line
    """
    if mode is ReplacementMode.PRIORITIZE and rng.random() < probability:
        for line, (kind, owner) in cache_set.items():
            if kind == DATA and owner == ctx:
                return line
    return next(iter(cache_set))


class CacheLevel:
    """
    One set-associative cache level with LRU replacement.

    Counters are kept per access kind: ``lookups``, ``hits``, ``misses`` are indexed by the kind of the
    access, ``evictions`` by the kind of the evicted line.
    """

    @docval({'name': 'name', 'type': str, 'doc': 'name of the level, e.g., L2'},
            {'name': 'size', 'type': int, 'doc': 'capacity in bytes'},
            {'name': 'assoc', 'type': int, 'doc': 'associativity'},
            {'name': 'latency', 'type': int, 'doc': 'hit latency in cycles'},
            {'name': 'line_size', 'type': int, 'doc': 'line size in bytes', 'default': 64},
            {'name': 'prioritizable', 'type': bool,
             'doc': 'whether the level follows the replacement mode of the pressure gate', 'default': False})
    def __init__(self, **kwargs):
        name, size, assoc, latency, line_size, prioritizable = getargs('name', 'size', 'assoc', 'latency',
                                                                       'line_size', 'prioritizable', kwargs)
        if line_size <= 0 or line_size & (line_size - 1):
            raise ValueError("Line size of %s must be a power of two, got %i" % (name, line_size))
        if assoc <= 0 or size % (line_size * assoc):
            raise ValueError("%s: size %i is not a multiple of %i-way sets of %i B lines" %
                             (name, size, assoc, line_size))
        self.name = name
        self.size = size
        self.assoc = assoc
        self.latency = latency
        self.line_size = line_size
        self.prioritizable = prioritizable
        self.num_sets = size // (line_size * assoc)
        self.sets = dict()
        self.lookups = [0, 0]
        self.hits = [0, 0]
        self.misses = [0, 0]
        self.evictions = [0, 0]

    def lookup(self, line, kind, ctx=0):
        """Look up a line and update its recency on a hit"""
        self.lookups[kind] += 1
        cache_set = self.sets.get(line % self.num_sets)
        if cache_set is not None and line in cache_set:
            cache_set.move_to_end(line)
            cache_set[line] = (kind, ctx)
            self.hits[kind] += 1
            return True
        self.misses[kind] += 1
        return False

    def fill(self, line, kind, ctx, mode, rng, probability=PRIORITIZE_PROBABILITY):
        """
        Insert a line as most recently used

        :returns: the evicted line or None
        """
        index = line % self.num_sets
        cache_set = self.sets.get(index)
        if cache_set is None:
            cache_set = self.sets[index] = OrderedDict()
        victim = None
        if len(cache_set) >= self.assoc:
            victim = select_victim(cache_set, mode, rng, ctx, probability)
            self.evictions[cache_set.pop(victim)[0]] += 1
        cache_set[line] = (kind, ctx)
        return victim

    def invalidate(self, line):
        cache_set = self.sets.get(line % self.num_sets)
        if cache_set is not None:
            cache_set.pop(line, None)

    def __contains__(self, line):
        cache_set = self.sets.get(line % self.num_sets)
        return cache_set is not None and line in cache_set

    def lines(self, kind=None):
        """Number of resident lines, optionally of one kind"""
        return sum(1 for s in self.sets.values() for k, _ in s.values() if kind is None or k == kind)

    def reset_counters(self):
        self.lookups = [0, 0]
        self.hits = [0, 0]
        self.misses = [0, 0]
        self.evictions = [0, 0]


class PressureGate:
    """
    Detector for phases of high TLB pressure.

    The gate counts references and L2-TLB misses over windows of ``window`` references. At the end of
    every window the replacement mode becomes ``PRIORITIZE`` if the miss ratio of that window exceeds
    ``threshold`` and ``NORMAL`` otherwise. A disabled gate stays ``NORMAL``.
    """

    @docval({'name': 'window', 'type': int, 'doc': 'window length in memory references', 'default': 10000},
            {'name': 'threshold', 'type': (int, float), 'doc': 'L2-TLB misses per reference that enable prioritization',
             'default': 0.05},
            {'name': 'enabled', 'type': bool, 'doc': 'enable page-table prioritization', 'default': True})
    def __init__(self, **kwargs):
        window, threshold, enabled = getargs('window', 'threshold', 'enabled', kwargs)
        if window < 1:
            raise ValueError("Gate window must be at least one reference, got %i" % window)
        if threshold < 0:
            raise ValueError("Gate threshold must not be negative, got %s" % threshold)
        self.window = window
        self.threshold = float(threshold)
        self.enabled = enabled
        self.mode = ReplacementMode.NORMAL
        self.references = 0
        self.tlb_misses = 0
        self.windows = 0
        self.prioritized_windows = 0

    def update_pressure(self, l2_tlb_miss):
        """
        Account one memory reference and recompute the mode at window boundaries

        :returns: the ReplacementMode in effect for the next reference
        """
        self.references += 1
        if l2_tlb_miss:
            self.tlb_misses += 1
        if self.references == self.window:
            prioritize = self.enabled and self.tlb_misses / self.window > self.threshold
            mode = ReplacementMode.PRIORITIZE if prioritize else ReplacementMode.NORMAL
            if mode is not self.mode:
                logger.debug("Replacement mode %s -> %s after window %i (%i TLB misses)",
                             self.mode.value, mode.value, self.windows, self.tlb_misses)
            self.mode = mode
            self.windows += 1
            self.prioritized_windows += int(prioritize)
            self.references = 0
            self.tlb_misses = 0
        return self.mode

    def reset_counters(self):
        """Forget completed windows. The current mode and the window in progress are kept"""
        self.windows = 0
        self.prioritized_windows = 0

    @property
    def prioritized_fraction(self):
        """Fraction of completed windows after which prioritization was enabled"""
        return self.prioritized_windows / self.windows if self.windows else 0.0


class MemoryHierarchy:
    """Inclusive cache hierarchy in front of DRAM"""

    @docval({'name': 'levels', 'type': list, 'doc': 'CacheLevel objects ordered from the core outwards'},
            {'name': 'dram_latency', 'type': int, 'doc': 'DRAM access latency in cycles', 'default': DRAM_LATENCY},
            {'name': 'gate', 'type': PressureGate, 'doc': 'the pressure gate controlling replacement',
             'default': None},
            {'name': 'seed', 'type': int, 'doc': 'seed for replacement draws', 'default': 0},
            {'name': 'probability', 'type': (int, float),
             'doc': 'probability of preferring data victims when prioritizing', 'default': PRIORITIZE_PROBABILITY})
    def __init__(self, **kwargs):
        levels, dram_latency, gate, seed, probability = getargs('levels', 'dram_latency', 'gate', 'seed',
                                                                'probability', kwargs)
        if not levels:
            raise ValueError("A memory hierarchy needs at least one cache level")
        line_sizes = {level.line_size for level in levels}
        if len(line_sizes) != 1:
            raise ValueError("All cache levels must use the same line size, got %s" % sorted(line_sizes))
        self.levels = list(levels)
        self.line_size = line_sizes.pop()
        self.line_shift = self.line_size.bit_length() - 1
        self.dram_latency = dram_latency
        self.gate = gate if gate is not None else PressureGate(enabled=False)
        self.probability = probability
        self.rng = RandomDraws(seed)
        self.dram = [0, 0]
        self.names = tuple(level.name for level in self.levels) + (DRAM, )

    @classmethod
    def from_config(cls, config, line_size=64, **kwargs):
        """
        Create a hierarchy from a mapping of level name to dict(size, assoc, latency). Levels after the first
        are prioritizable. Remaining keyword arguments are passed to the constructor.
        """
        levels = [CacheLevel(name=name, size=int(spec['size']), assoc=int(spec['assoc']),
                             latency=int(spec['latency']), line_size=line_size, prioritizable=i > 0)
                  for i, (name, spec) in enumerate(config.items())]
        return cls(levels=levels, **kwargs)

    def access(self, addr, kind, ctx=0):
        """
        Access the line containing physical address ``addr``

        :returns: tuple of (latency in cycles, name of the level that serviced the access)
        """
        line = addr >> self.line_shift
        levels = self.levels
        serviced = len(levels)
        for i, level in enumerate(levels):
            if level.lookup(line, kind, ctx):
                serviced = i
                latency = level.latency
                break
        else:
            latency = levels[-1].latency + self.dram_latency
            self.dram[kind] += 1
        if serviced:
            prioritize = self.gate.mode is ReplacementMode.PRIORITIZE
            for i in range(serviced - 1, -1, -1):
                level = levels[i]
                mode = ReplacementMode.PRIORITIZE if prioritize and level.prioritizable else ReplacementMode.NORMAL
                victim = level.fill(line, kind, ctx, mode, self.rng, self.probability)
                if victim is not None:
                    for upper in levels[:i]:
                        upper.invalidate(victim)
        return latency, self.names[serviced]

    def __getitem__(self, name):
        for level in self.levels:
            if level.name == name:
                return level
        raise KeyError("No cache level named %s" % name)

    def reset_counters(self):
        for level in self.levels:
            level.reset_counters()
        self.dram = [0, 0]

    def counters(self):
        """
        Counter dump with one row per (level, kind)

        :returns: pandas DataFrame with columns level, kind, lookups, hits, misses, evictions
        """
        rows = []
        for level in self.levels:
            for kind, kind_name in enumerate(KIND_NAMES):
                rows.append(OrderedDict([('level', level.name), ('kind', kind_name),
                                         ('lookups', level.lookups[kind]), ('hits', level.hits[kind]),
                                         ('misses', level.misses[kind]), ('evictions', level.evictions[kind])]))
        for kind, kind_name in enumerate(KIND_NAMES):
            rows.append(OrderedDict([('level', DRAM), ('kind', kind_name), ('lookups', self.dram[kind]),
                                     ('hits', self.dram[kind]), ('misses', 0), ('evictions', 0)]))
        return pd.DataFrame(rows, columns=['level', 'kind', 'lookups', 'hits', 'misses', 'evictions'])


def relative_delta(value, baseline):
    """(value - baseline) / baseline, 0 if both are 0 and signed infinity if only the baseline is 0"""
    if baseline == 0:
        return 0.0 if value == 0 else float(np.copysign(np.inf, value))
    return (value - baseline) / baseline


class EnergyLedger:
    """
    Access counts per level split by kind, and the relative energy per access of each level.
    Energy is the sum of counter times coefficient, reported separately for the caches and DRAM.
    """

    @docval({'name': 'accesses', 'type': dict, 'doc': 'mapping of level name to [data, pte] access counts'},
            {'name': 'coefficients', 'type': dict, 'doc': 'relative energy per access of each level and DRAM',
             'default': None})
    def __init__(self, **kwargs):
        accesses, coefficients = getargs('accesses', 'coefficients', kwargs)
        coefficients = OrderedDict(ENERGY_COEFFICIENTS if coefficients is None else coefficients)
        missing = set(accesses) - set(coefficients)
        if missing:
            raise KeyError("No energy coefficients for %s" % sorted(missing))
        self.accesses = OrderedDict((k, [int(v[0]), int(v[1])]) for k, v in accesses.items())
        self.coefficients = OrderedDict((k, float(v)) for k, v in coefficients.items())

    @classmethod
    def from_hierarchy(cls, mem, coefficients=None):
        accesses = OrderedDict((level.name, list(level.lookups)) for level in mem.levels)
        accesses[DRAM] = list(mem.dram)
        return cls(accesses=accesses, coefficients=coefficients)

    def energy(self, name):
        return sum(self.accesses[name]) * self.coefficients[name]

    @property
    def cache_energy(self):
        return sum(self.energy(name) for name in self.accesses if name != DRAM)

    @property
    def dram_energy(self):
        return self.energy(DRAM) if DRAM in self.accesses else 0.0

    def to_dict(self):
        res = OrderedDict()
        for name, (data, pte) in self.accesses.items():
            res['%s_data' % name] = data
            res['%s_pte' % name] = pte
        res['cache_energy'] = self.cache_energy
        res['dram_energy'] = self.dram_energy
        res['total_energy'] = self.cache_energy + self.dram_energy
        return res


@docval({'name': 'ledger', 'type': EnergyLedger, 'doc': 'ledger of the variant run'},
        {'name': 'baseline_ledger', 'type': EnergyLedger, 'doc': 'ledger of the baseline run'},
        returns='relative energy delta per component', rtype=OrderedDict, is_method=False)
def energy_report(**kwargs):
    """
    Relative energy of a run against a baseline run for the cache hierarchy, DRAM, and their sum

    :raises: ValueError if the ledgers use different coefficients
    """
    ledger, baseline = getargs('ledger', 'baseline_ledger', kwargs)
    if ledger.coefficients != baseline.coefficients:
        raise ValueError("Energy coefficients differ: %s vs. baseline %s" %
                         (dict(ledger.coefficients), dict(baseline.coefficients)))
    return OrderedDict([('cache', relative_delta(ledger.cache_energy, baseline.cache_energy)),
                        ('dram', relative_delta(ledger.dram_energy, baseline.dram_energy)),
                        ('total', relative_delta(ledger.cache_energy + ledger.dram_energy,
                                                 baseline.cache_energy + baseline.dram_energy))])
