"""
Synthetic workloads: memory-reference traces and the virtual-to-physical layout of their footprint.

All generators are deterministic for a given seed. Footprints start at ``va_base``; the layout maps
the first part of the footprint with 2 MB pages and the rest with 4 kB pages.
"""
import logging
import warnings
from collections import OrderedDict

import numpy as np
from hdmf.utils import docval, getargs

from .addressing import PageSize, VA_BITS, is_canonical
from .pagetable import MappingSet
from .io.traces import read_trace_file, write_trace_file, TraceFormatError

logger = logging.getLogger(__name__)

#: Default first virtual address of a footprint (1 TB)
DEFAULT_VA_BASE = 1 << 40
#: Names of the trace generators
GENERATORS = ('uniform', 'sequential', 'chase')
#: Named fragmentation scenarios
FRAGMENTATION_PRESETS = OrderedDict([('0', 0.0), ('50', 0.5), ('100', 1.0)])

_4K = int(PageSize.SIZE_4K)
_2M = int(PageSize.SIZE_2M)


class Trace:
    """
    Ordered memory references (virtual address, read or write) plus the metadata of the run that produced
    them: footprint size and start, generator name, and seed.
    """

    @docval({'name': 'va', 'type': 'array_data', 'doc': 'virtual addresses in reference order'},
            {'name': 'is_write', 'type': 'array_data', 'doc': 'True for writes. All reads if omitted', 'default': None},
            {'name': 'footprint', 'type': int, 'doc': 'size of the referenced region in bytes', 'default': None},
            {'name': 'generator', 'type': str, 'doc': 'name of the generator', 'default': 'file'},
            {'name': 'seed', 'type': int, 'doc': 'seed of the generator', 'default': None},
            {'name': 'va_base', 'type': int, 'doc': 'first address of the referenced region',
             'default': DEFAULT_VA_BASE})
    def __init__(self, **kwargs):
        va, is_write, footprint, generator, seed, va_base = getargs('va', 'is_write', 'footprint', 'generator',
                                                                    'seed', 'va_base', kwargs)
        self.va = np.asarray(va, dtype=np.uint64)
        self.is_write = (np.zeros(len(self.va), dtype=bool) if is_write is None
                         else np.asarray(is_write, dtype=bool))
        if len(self.is_write) != len(self.va):
            raise ValueError("Trace has %i addresses but %i read/write flags" % (len(self.va), len(self.is_write)))
        self.footprint = footprint
        self.generator = generator
        self.seed = seed
        self.va_base = va_base
        if footprint is not None and len(self.va):
            outside = (self.va < np.uint64(va_base)) | (self.va >= np.uint64(va_base + footprint))
            if np.any(outside):
                warnings.warn("%i references of the %s trace fall outside the footprint [0x%x, 0x%x) and will be "
                              "unmapped" % (int(np.count_nonzero(outside)), generator, va_base, va_base + footprint))

    @property
    def metadata(self):
        res = OrderedDict([('generator', self.generator)])
        if self.footprint is not None:
            res['footprint'] = self.footprint
        res['seed'] = self.seed
        res['va_base'] = self.va_base
        return res

    @property
    def writes(self):
        return int(np.count_nonzero(self.is_write))

    def __len__(self):
        return len(self.va)

    def __iter__(self):
        for va, write in zip(self.va, self.is_write):
            yield int(va), 'W' if write else 'R'

    def __getitem__(self, index):
        return int(self.va[index]), 'W' if self.is_write[index] else 'R'

    def __eq__(self, other):
        return (isinstance(other, Trace) and self.metadata == other.metadata and
                np.array_equal(self.va, other.va) and np.array_equal(self.is_write, other.is_write))

    def __repr__(self):
        return 'Trace(%s, %i references, footprint=%s, seed=%s)' % (self.generator, len(self), self.footprint,
                                                                   self.seed)


class FragmentationPolicy:
    """Fraction of the footprint backed by 2 MB pages. The large pages back the start of the footprint"""

    @docval({'name': 'large_page_fraction', 'type': (int, float), 'doc': 'fraction in [0, 1]', 'default': 0.0})
    def __init__(self, **kwargs):
        fraction = float(getargs('large_page_fraction', kwargs))
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("large_page_fraction must be in [0, 1], got %s" % fraction)
        self.large_page_fraction = fraction
        self.placement = 'first'

    @classmethod
    def parse(cls, text):
        """Create a policy from a preset (``0``, ``50``, ``100``), a percentage such as ``25%``, or a fraction"""
        if isinstance(text, FragmentationPolicy):
            return text
        key = str(text).strip().rstrip('%')
        if key in FRAGMENTATION_PRESETS:
            return cls(large_page_fraction=FRAGMENTATION_PRESETS[key])
        try:
            value = float(key)
        except ValueError:
            raise ValueError("Cannot parse fragmentation '%s'" % text)
        if str(text).strip().endswith('%'):
            value /= 100.0
        return cls(large_page_fraction=value)

    def large_pages(self, footprint):
        """Number of 2 MB pages backing a footprint"""
        return int(round(self.large_page_fraction * footprint / _2M))

    def __eq__(self, other):
        return isinstance(other, FragmentationPolicy) and self.large_page_fraction == other.large_page_fraction

    def __repr__(self):
        return 'FragmentationPolicy(%g%% large pages)' % (100 * self.large_page_fraction)


def _check_footprint(footprint, va_base):
    if footprint < _4K or footprint % _4K:
        raise ValueError("Footprint must be a positive multiple of 4 kB, got %i" % footprint)
    if va_base % _4K:
        raise ValueError("va_base 0x%x is not page aligned" % va_base)
    if not is_canonical(va_base, VA_BITS) or not is_canonical(va_base + footprint - 1, VA_BITS):
        raise ValueError("Footprint [0x%x, 0x%x) is not canonical" % (va_base, va_base + footprint))


@docval({'name': 'seed', 'type': int, 'doc': 'seed of the generator'},
        {'name': 'footprint', 'type': int, 'doc': 'size of the referenced region in bytes'},
        {'name': 'n', 'type': int, 'doc': 'number of references'},
        {'name': 'va_base', 'type': int, 'doc': 'first address of the region', 'default': DEFAULT_VA_BASE},
        {'name': 'write_fraction', 'type': (int, float), 'doc': 'probability of a write', 'default': 0.0},
        returns='the trace', rtype=Trace, is_method=False)
def gen_uniform_random(**kwargs):
    """References to 8 byte words drawn uniformly over the footprint, like a random-update benchmark"""
    seed, footprint, n, va_base, write_fraction = getargs('seed', 'footprint', 'n', 'va_base', 'write_fraction',
                                                          kwargs)
    _check_footprint(footprint, va_base)
    rng = np.random.default_rng(seed)
    words = rng.integers(0, footprint // 8, size=n, dtype=np.uint64)
    va = np.uint64(va_base) + (words << np.uint64(3))
    is_write = rng.random(n) < write_fraction
    return Trace(va=va, is_write=is_write, footprint=footprint, generator='uniform', seed=seed, va_base=va_base)


@docval({'name': 'footprint', 'type': int, 'doc': 'size of the referenced region in bytes'},
        {'name': 'stride', 'type': int, 'doc': 'distance between consecutive references in bytes'},
        {'name': 'n', 'type': int, 'doc': 'number of references'},
        {'name': 'va_base', 'type': int, 'doc': 'first address of the region', 'default': DEFAULT_VA_BASE},
        returns='the trace', rtype=Trace, is_method=False)
def gen_sequential(**kwargs):
    """Strided scan of the footprint, wrapping around at its end"""
    footprint, stride, n, va_base = getargs('footprint', 'stride', 'n', 'va_base', kwargs)
    _check_footprint(footprint, va_base)
    if stride < 1:
        raise ValueError("stride must be positive, got %i" % stride)
    offsets = (np.arange(n, dtype=np.uint64) * np.uint64(stride)) % np.uint64(footprint)
    return Trace(va=np.uint64(va_base) + offsets, footprint=footprint, generator='sequential', va_base=va_base)


@docval({'name': 'seed', 'type': int, 'doc': 'seed of the generator'},
        {'name': 'footprint', 'type': int, 'doc': 'size of the referenced region in bytes'},
        {'name': 'n', 'type': int, 'doc': 'number of references'},
        {'name': 'va_base', 'type': int, 'doc': 'first address of the region', 'default': DEFAULT_VA_BASE},
        returns='the trace', rtype=Trace, is_method=False)
def gen_pointer_chase(**kwargs):
    """
    Chase through a random cycle over all 4 kB pages of the footprint. Each lap of ``footprint / 4096``
    references visits every page exactly once, at a fixed random line of the page.
    """
    seed, footprint, n, va_base = getargs('seed', 'footprint', 'n', 'va_base', kwargs)
    _check_footprint(footprint, va_base)
    rng = np.random.default_rng(seed)
    pages = footprint // _4K
    cycle = rng.permutation(pages).astype(np.uint64)
    lines = rng.integers(0, _4K // 64, size=pages, dtype=np.uint64) << np.uint64(6)
    visits = cycle[np.arange(n, dtype=np.int64) % pages] if n else np.zeros(0, dtype=np.uint64)
    va = np.uint64(va_base) + (visits << np.uint64(PageSize.SIZE_4K.shift)) + lines[visits.astype(np.int64)]
    return Trace(va=va, footprint=footprint, generator='chase', seed=seed, va_base=va_base)


@docval({'name': 'generator', 'type': str, 'doc': 'one of uniform, sequential, chase'},
        {'name': 'footprint', 'type': int, 'doc': 'size of the referenced region in bytes'},
        {'name': 'n', 'type': int, 'doc': 'number of references'},
        {'name': 'seed', 'type': int, 'doc': 'seed of the generator', 'default': 0},
        {'name': 'stride', 'type': int, 'doc': 'stride of the sequential generator', 'default': 64},
        {'name': 'va_base', 'type': int, 'doc': 'first address of the region', 'default': DEFAULT_VA_BASE},
        returns='the trace', rtype=Trace, is_method=False)
def generate(**kwargs):
    """Run a generator by name"""
    generator, footprint, n, seed, stride, va_base = getargs('generator', 'footprint', 'n', 'seed', 'stride',
                                                             'va_base', kwargs)
    if generator == 'uniform':
        return gen_uniform_random(seed=seed, footprint=footprint, n=n, va_base=va_base)
    if generator == 'sequential':
        return gen_sequential(footprint=footprint, stride=stride, n=n, va_base=va_base)
    if generator == 'chase':
        return gen_pointer_chase(seed=seed, footprint=footprint, n=n, va_base=va_base)
    raise ValueError("Unknown generator '%s', expected one of %s" % (generator, ', '.join(GENERATORS)))


@docval({'name': 'footprint', 'type': int, 'doc': 'size of the mapped region in bytes'},
        {'name': 'frag', 'type': FragmentationPolicy, 'doc': 'share of the footprint backed by 2 MB pages'},
        {'name': 'seed', 'type': int, 'doc': 'seed for the placement of 4 kB frames', 'default': 0},
        {'name': 'va_base', 'type': int, 'doc': 'first virtual address of the region', 'default': DEFAULT_VA_BASE},
        {'name': 'pa_base', 'type': int, 'doc': 'first physical address of the frames', 'default': 0},
        {'name': 'va_bits', 'type': int, 'doc': 'number of translated virtual address bits', 'default': VA_BITS},
        returns='the mappings', rtype=MappingSet, is_method=False)
def layout(**kwargs):
    """
    Map a footprint: the first ``large_page_fraction`` of it with 2 MB pages, the rest with 4 kB pages.

    2 MB frames are assigned in ascending order from ``pa_base``; the 4 kB frames follow them in an order
    shuffled with ``seed``.

    :raises: ValueError if the footprint or the bases are not aligned for the requested pages
    """
    footprint, frag, seed, va_base, pa_base, va_bits = getargs('footprint', 'frag', 'seed', 'va_base', 'pa_base',
                                                               'va_bits', kwargs)
    _check_footprint(footprint, va_base)
    if frag.large_page_fraction > 0:
        if footprint % _2M:
            raise ValueError("Footprint %i is not 2 MB aligned, as required for %s" % (footprint, frag))
        if va_base % _2M or pa_base % _2M:
            raise ValueError("va_base 0x%x and pa_base 0x%x must be 2 MB aligned for %s" % (va_base, pa_base, frag))
    num_large = frag.large_pages(footprint)
    large_bytes = num_large * _2M
    num_small = (footprint - large_bytes) // _4K
    rng = np.random.default_rng(seed)
    large_off = np.arange(num_large, dtype=np.uint64) << np.uint64(PageSize.SIZE_2M.shift)
    small_off = np.arange(num_small, dtype=np.uint64) << np.uint64(PageSize.SIZE_4K.shift)
    frames = rng.permutation(num_small).astype(np.uint64) << np.uint64(PageSize.SIZE_4K.shift)
    va = np.concatenate([large_off, np.uint64(large_bytes) + small_off]) + np.uint64(va_base)
    pa = np.concatenate([large_off, np.uint64(large_bytes) + frames]) + np.uint64(pa_base)
    size = np.concatenate([np.full(num_large, _2M, dtype=np.uint64), np.full(num_small, _4K, dtype=np.uint64)])
    logger.debug("Layout of %i bytes: %i 2 MB and %i 4 kB mappings", footprint, num_large, num_small)
    return MappingSet(va=va, pa=pa, size=size, va_bits=va_bits)


def load_trace(path):
    """
    Read a trace file

    :raises: TraceFormatError naming the offending line
    """
    va, is_write, metadata = read_trace_file(path)
    return Trace(va=va, is_write=is_write, footprint=metadata.get('footprint'),
                 generator=metadata.get('generator', 'file'), seed=metadata.get('seed'),
                 va_base=metadata.get('va_base', DEFAULT_VA_BASE))


def save_trace(trace, path):
    write_trace_file(path, trace.va, trace.is_write, trace.metadata)


__all__ = ['Trace', 'FragmentationPolicy', 'TraceFormatError', 'gen_uniform_random', 'gen_sequential',
           'gen_pointer_chase', 'generate', 'layout', 'load_trace', 'save_trace', 'DEFAULT_VA_BASE', 'GENERATORS']
