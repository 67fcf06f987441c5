"""
Radix page tables with flattened levels.

A table is built once from a :py:class:`MappingSet` under a :py:class:`LayoutPolicy` and then
treated as immutable by the walkers. Nodes store their entries as 64 bit words in numpy arrays,
using the same encoding hardware would read:

====== ==================================================================
bits   meaning
====== ==================================================================
0      present
1      terminal (the entry maps a page)
2-3    size code: size of the next node, or size of the mapped page
4      recursive (self-reference installed by :py:func:`install_recursion`)
12-51  frame (physical address of the next node or of the page)
====== ==================================================================
"""
import logging
import warnings
from collections import OrderedDict, namedtuple
from collections.abc import Callable

import numpy as np
from hdmf.utils import docval, getargs, popargs

from .addressing import (PageSize, LevelScheme, NonCanonicalAddressError, FIELD_BITS, VA_BITS, canonicalize, strip,
                         va_mask)

logger = logging.getLogger(__name__)

PRESENT = 0x1
TERMINAL = 0x2
SIZE_SHIFT = 2
SIZE_MASK = 0x3 << SIZE_SHIFT
RECURSIVE = 0x10
FRAME_MASK = 0x000F_FFFF_FFFF_F000

#: Default number of 2 MB mappings that marks a 1 GB region as not flattened at L2+L1
NF_THRESHOLD = 32
#: Default slot of the self-referencing root entry
REC_INDEX = 510
#: Default physical bases of the node allocator per size class
ALLOCATOR_BASES = OrderedDict([(PageSize.SIZE_4K, 0x100_0000_0000),
                               (PageSize.SIZE_2M, 0x140_0000_0000),
                               (PageSize.SIZE_1G, 0x200_0000_0000)])

_LARGE_SHIFT = PageSize.SIZE_2M.shift
_REGION_SHIFT = PageSize.SIZE_1G.shift


class RecursionLayoutError(ValueError):
    """Raised when a recursive mapping cannot be installed or followed for a table layout"""
    pass


class Translation(namedtuple('Translation', ['frame', 'page_size'])):
    """Result of a translation: physical base of the page and its size in bytes"""
    __slots__ = ()

    def address(self, va):
        """Physical address of ``va`` within the translated page"""
        return self.frame + (va & (self.page_size - 1))


class PTEntry(namedtuple('PTEntry', ['present', 'terminal', 'frame', 'next_node_size', 'recursive'])):
    """
    Decoded page-table entry. For terminal entries ``next_node_size`` holds the size of the mapped page.
    """
    __slots__ = ()

    @classmethod
    def decode(cls, raw):
        raw = int(raw)
        return cls(present=bool(raw & PRESENT),
                   terminal=bool(raw & TERMINAL),
                   frame=raw & FRAME_MASK,
                   next_node_size=PageSize.from_code((raw & SIZE_MASK) >> SIZE_SHIFT),
                   recursive=bool(raw & RECURSIVE))

    def encode(self):
        if not self.present:
            return 0
        return ((self.frame & FRAME_MASK) | PRESENT | (TERMINAL if self.terminal else 0) |
                (PageSize(self.next_node_size).code << SIZE_SHIFT) | (RECURSIVE if self.recursive else 0))


def encode_entry(frame, size, terminal=False, recursive=False):
    """Encode a present entry pointing to ``frame`` with the given size code"""
    return (frame & FRAME_MASK) | PRESENT | (TERMINAL if terminal else 0) | (size.code << SIZE_SHIFT) | \
        (RECURSIVE if recursive else 0)


class PTNode:
    """
    A page-table node of 4 kB, 2 MB, or 1 GB holding ``size / 8`` entries.

    Besides its physical placement the node records the virtual region it translates: the region
    starts at ``va_base`` (translated bits only) and spans ``2**span_bits`` bytes, so the node's index
    field covers bits ``[span_bits - width, span_bits)``.
    """

    @docval({'name': 'base', 'type': int, 'doc': 'physical address of the node'},
            {'name': 'size', 'type': PageSize, 'doc': 'size of the node'},
            {'name': 'va_base', 'type': int, 'doc': 'first virtual address translated through this node', 'default': 0},
            {'name': 'span_bits', 'type': int, 'doc': 'log2 of the virtual region translated through this node',
             'default': VA_BITS},
            {'name': 'depth', 'type': int, 'doc': 'number of nodes above this node on any walk', 'default': 0})
    def __init__(self, **kwargs):
        base, size, va_base, span_bits, depth = getargs('base', 'size', 'va_base', 'span_bits', 'depth', kwargs)
        if base & (size - 1):
            raise ValueError("Node base 0x%x is not aligned to its size %s" % (base, size.label))
        self.base = base
        self.size = size
        self.va_base = va_base
        self.span_bits = span_bits
        self.depth = depth
        self.entries = np.zeros(size.entries, dtype=np.uint64)

    @property
    def width(self):
        return self.size.width

    @property
    def lo(self):
        """Lowest virtual address bit indexed by this node"""
        return self.span_bits - self.size.width

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, index):
        return PTEntry.decode(self.entries[index])

    def __setitem__(self, index, entry):
        self.entries[index] = np.uint64(entry.encode() if isinstance(entry, PTEntry) else entry)

    def raw(self, index):
        return int(self.entries[index])

    @property
    def present_count(self):
        return int(np.count_nonzero(self.entries & np.uint64(PRESENT)))

    def __repr__(self):
        return 'PTNode(base=0x%x, size=%s, va_base=0x%x, span_bits=%i)' % (self.base, self.size.label,
                                                                         self.va_base, self.span_bits)


class MappingSet:
    """
    Ordered set of virtual to physical page mappings of 4 kB or 2 MB pages.

    Mappings are kept in numpy arrays sorted by virtual address. Virtual addresses are canonical.
    """

    @docval({'name': 'va', 'type': 'array_data', 'doc': 'canonical virtual addresses of the pages'},
            {'name': 'pa', 'type': 'array_data', 'doc': 'physical addresses of the pages'},
            {'name': 'size', 'type': 'array_data', 'doc': 'page sizes in bytes (4096 or 2097152)'},
            {'name': 'va_bits', 'type': int, 'doc': 'number of translated virtual address bits', 'default': VA_BITS})
    def __init__(self, **kwargs):
        va, pa, size, va_bits = getargs('va', 'pa', 'size', 'va_bits', kwargs)
        va = np.asarray(va, dtype=np.uint64)
        pa = np.asarray(pa, dtype=np.uint64)
        size = np.asarray(size, dtype=np.uint64)
        if not (len(va) == len(pa) == len(size)):
            raise ValueError("va, pa and size must have the same length, got %i, %i, %i" %
                             (len(va), len(pa), len(size)))
        self.va_bits = va_bits
        order = np.argsort(va & np.uint64(va_mask(va_bits)), kind='stable')
        self.va = va[order]
        self.pa = pa[order]
        self.size = size[order]
        self.__low = self.va & np.uint64(va_mask(va_bits))
        self.__validate()

    @classmethod
    def from_records(cls, records, va_bits=VA_BITS):
        """Create a MappingSet from an iterable of ``(va, pa, size)`` tuples"""
        records = list(records)
        columns = list(zip(*records)) if records else ([], [], [])
        return cls(va=list(columns[0]), pa=list(columns[1]), size=list(columns[2]), va_bits=va_bits)

    def __validate(self):
        if len(self.va) == 0:
            return
        sizes = set(int(s) for s in np.unique(self.size))
        bad = sizes - {PageSize.SIZE_4K, PageSize.SIZE_2M}
        if bad:
            raise ValueError("Unsupported page sizes %s, mappings use 4 kB or 2 MB pages" % sorted(bad))
        top = self.va >> np.uint64(self.va_bits - 1)
        noncanonical = (top != 0) & (top != np.uint64((1 << (65 - self.va_bits)) - 1))
        if np.any(noncanonical):
            raise NonCanonicalAddressError("Address 0x%x is not canonical for %i bit virtual addresses" %
                                           (int(self.va[np.argmax(noncanonical)]), self.va_bits))
        low = self.stripped_va
        misaligned = ((low | self.pa) & (self.size - np.uint64(1))) != 0
        if np.any(misaligned):
            i = int(np.argmax(misaligned))
            raise ValueError("Mapping 0x%x -> 0x%x is not aligned to its page size %i" %
                             (int(self.va[i]), int(self.pa[i]), int(self.size[i])))
        overlap = (low[:-1] + self.size[:-1]) > low[1:]
        if np.any(overlap):
            i = int(np.argmax(overlap))
            raise ValueError("Mappings at 0x%x and 0x%x overlap" % (int(self.va[i]), int(self.va[i + 1])))

    @property
    def stripped_va(self):
        """Translated bits of the virtual addresses"""
        return self.__low

    @property
    def shifts(self):
        """log2 of the page sizes"""
        return np.where(self.size == np.uint64(PageSize.SIZE_2M), _LARGE_SHIFT, PageSize.SIZE_4K.shift)

    def count(self, size):
        return int(np.count_nonzero(self.size == np.uint64(size)))

    @property
    def mapped_bytes(self):
        return int(self.size.sum())

    def __len__(self):
        return len(self.va)

    def __iter__(self):
        for va, pa, size in zip(self.va, self.pa, self.size):
            yield int(va), int(pa), int(size)

    def __eq__(self, other):
        return (isinstance(other, MappingSet) and len(self) == len(other) and
                bool(np.all(self.va == other.va)) and bool(np.all(self.pa == other.pa)) and
                bool(np.all(self.size == other.size)))

    def lookup(self, va):
        """
        Get the mapping containing ``va``

        :returns: Translation or None if va is not mapped
        """
        low = np.uint64(strip(va, self.va_bits))
        i = int(np.searchsorted(self.stripped_va, low, side='right')) - 1
        if i < 0 or int(self.stripped_va[i]) + int(self.size[i]) <= int(low):
            return None
        return Translation(int(self.pa[i]), int(self.size[i]))

    def covers(self, addresses):
        """
        Check which addresses fall into a mapped page

        :param addresses: array of translated address bits
        :returns: boolean numpy array
        """
        addresses = np.asarray(addresses, dtype=np.uint64)
        if len(self) == 0:
            return np.zeros(len(addresses), dtype=bool)
        low = self.stripped_va
        i = np.searchsorted(low, addresses, side='right').astype(np.int64) - 1
        found = i >= 0
        i = np.maximum(i, 0)
        return found & (low[i] + self.size[i] > addresses)

    def extents(self):
        """Contiguous virtual ranges covered by the mappings as a list of ``(start, end)`` translated bits"""
        if len(self) == 0:
            return []
        low = self.stripped_va
        ends = low + self.size
        breaks = np.nonzero(ends[:-1] != low[1:])[0]
        starts = np.concatenate(([0], breaks + 1))
        stops = np.concatenate((breaks, [len(low) - 1]))
        return [(int(low[a]), int(ends[b])) for a, b in zip(starts, stops)]


class LayoutPolicy:
    """
    How a table is laid out: the target level scheme (which adjacent levels are flattened) and the
    threshold of 2 MB mappings above which a 1 GB region is not flattened at L2+L1.
    """

    @docval({'name': 'scheme', 'type': (LevelScheme, str, list, tuple), 'doc': 'the target level scheme'},
            {'name': 'nf_threshold', 'type': int,
             'doc': 'mark 1 GB regions with at least this many 2 MB mappings as not flattened. None disables it',
             'default': None})
    def __init__(self, **kwargs):
        scheme, nf_threshold = getargs('scheme', 'nf_threshold', kwargs)
        self.scheme = LevelScheme.parse(scheme)
        if nf_threshold is not None and nf_threshold < 1:
            raise ValueError("nf_threshold must be at least 1, got %i" % nf_threshold)
        self.nf_threshold = nf_threshold
        if nf_threshold is not None and not self.spans_large_boundary:
            warnings.warn("nf_threshold has no effect for scheme %s: no flattened level spans the 2 MB boundary"
                          % self.scheme)

    @property
    def spans_large_boundary(self):
        """True if a level's index field strictly contains the 2 MB page boundary"""
        return any(shift < _LARGE_SHIFT < shift + w for w, shift in zip(self.scheme.widths, self.scheme.shifts))

    def __repr__(self):
        return 'LayoutPolicy(%s, nf_threshold=%s)' % (self.scheme, self.nf_threshold)


class Allocator:
    """
    Physical allocator for page-table nodes.

    Nodes are placed by a bump pointer per size class. Whether a 2 MB or 1 GB request succeeds is
    decided by an injectable policy; by default requests fail at random with a per-size failure
    rate drawn from a generator seeded with ``seed``. 4 kB requests never fail.
    """

    @docval({'name': 'seed', 'type': int, 'doc': 'seed for the failure draws', 'default': 0},
            {'name': 'failure_rates', 'type': dict, 'doc': 'failure probability per PageSize', 'default': None},
            {'name': 'policy', 'type': Callable,
             'doc': 'callable(size, request_number) returning True if the request may succeed. '
                    'Overrides failure_rates', 'default': None},
            {'name': 'bases', 'type': dict, 'doc': 'physical base address per PageSize', 'default': None})
    def __init__(self, **kwargs):
        seed, failure_rates, policy, bases = popargs('seed', 'failure_rates', 'policy', 'bases', kwargs)
        self.seed = seed
        self.failure_rates = OrderedDict((PageSize(k), float(v)) for k, v in (failure_rates or {}).items())
        for size, rate in self.failure_rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError("Failure rate for %s must be in [0, 1], got %s" % (size.label, rate))
        self.policy = policy
        self.bases = OrderedDict(ALLOCATOR_BASES)
        self.bases.update((PageSize(k), v) for k, v in (bases or {}).items())
        for size, base in self.bases.items():
            if base & (size - 1):
                raise ValueError("Base 0x%x of the %s class is not aligned" % (base, size.label))
        self.__rng = np.random.default_rng(seed)
        self.__next = OrderedDict(self.bases)
        self.requests = OrderedDict((s, 0) for s in PageSize)
        self.refusals = OrderedDict((s, 0) for s in PageSize)

    @classmethod
    def refusing(cls, *sizes, **kwargs):
        """Allocator that refuses every request of the given sizes"""
        return cls(failure_rates={s: 1.0 for s in sizes}, **kwargs)

    def allocate(self, size):
        """
        Allocate a node of the given size

        :returns: the physical base address or None if the request was refused
        """
        size = PageSize(size)
        self.requests[size] += 1
        if size != PageSize.SIZE_4K:
            if self.policy is not None:
                granted = bool(self.policy(size, self.requests[size]))
            else:
                granted = self.__rng.random() >= self.failure_rates.get(size, 0.0)
            if not granted:
                self.refusals[size] += 1
                return None
        base = self.__next[size]
        self.__next[size] = base + size
        return base

    def allocated_bytes(self, size):
        return self.__next[PageSize(size)] - self.bases[PageSize(size)]


class PageTable:
    """
    A radix page table: the root register (root address plus its two size bits), the target level
    scheme, and all nodes keyed by physical address.
    """

    @docval({'name': 'root', 'type': int, 'doc': 'physical address of the root node'},
            {'name': 'scheme', 'type': LevelScheme, 'doc': 'the target level scheme of the layout'},
            {'name': 'nodes', 'type': dict, 'doc': 'map of physical address to PTNode'},
            {'name': 'layout', 'type': LayoutPolicy, 'doc': 'the layout policy the table was built with',
             'default': None})
    def __init__(self, **kwargs):
        root, scheme, nodes, layout = getargs('root', 'scheme', 'nodes', 'layout', kwargs)
        if root not in nodes:
            raise KeyError("Root 0x%x is not a node of the table" % root)
        self.root = root
        self.scheme = scheme
        self.nodes = nodes
        self.layout = layout
        self.recursion_index = None

    @property
    def va_bits(self):
        return self.scheme.va_bits

    @property
    def root_node(self):
        return self.nodes[self.root]

    @property
    def root_node_size(self):
        return self.nodes[self.root].size

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def path(self, va):
        """
        Descend the table for ``va`` like a hardware walker without caches.

        :returns: list of (node, index, PTEntry) for every entry read, ending at the first non-present or terminal
                  entry
        """
        low = strip(va, self.va_bits)
        node = self.nodes[self.root]
        hi = self.va_bits
        steps = []
        while True:
            lo = hi - node.size.width
            if lo < PageSize.SIZE_4K.shift:
                raise ValueError("Walk of 0x%x ran past the page offset at node 0x%x" % (va, node.base))
            index = (low >> lo) & ((1 << node.size.width) - 1)
            entry = node[index]
            steps.append((node, index, entry))
            if not entry.present or entry.terminal:
                return steps
            node = self.nodes[entry.frame]
            hi = lo

    def levels(self, va):
        """Number of nodes on the walk of ``va``"""
        return len(self.path(va))

    def replicated_entries(self):
        """Number of terminal entries that map a page larger than the region they translate"""
        count = 0
        for node in self.nodes.values():
            raw = node.entries
            terminal = (raw & np.uint64(PRESENT | TERMINAL)) == np.uint64(PRESENT | TERMINAL)
            codes = (raw & np.uint64(SIZE_MASK)) >> np.uint64(SIZE_SHIFT)
            lo_code = (node.lo - PageSize.SIZE_4K.shift) // FIELD_BITS
            count += int(np.count_nonzero(terminal & (codes > np.uint64(lo_code))))
        return count

    def structure(self):
        """Comparable description of the table: sorted list of (base, size, va_base, span_bits, entries bytes)"""
        return [(n.base, int(n.size), n.va_base, n.span_bits, n.entries.tobytes())
                for n in sorted(self.nodes.values(), key=lambda n: n.base)]


def reference_translate(table, va):
    """
    Software reference translation of ``va`` by plain descent of the table.

    :returns: Translation of the mapped page or None if va is not mapped
    :raises: NonCanonicalAddressError if va is not canonical
    """
    entry = table.path(va)[-1][2]
    if not entry.present:
        return None
    return Translation(entry.frame, int(entry.next_node_size))


@docval({'name': 'maps', 'type': MappingSet, 'doc': 'the mappings'},
        {'name': 'threshold', 'type': int, 'doc': 'minimum number of 2 MB mappings per 1 GB region',
         'default': NF_THRESHOLD},
        returns='set of canonical 1 GB-aligned virtual addresses', rtype=set, is_method=False)
def mark_nf_regions(**kwargs):
    """Find the 1 GB regions holding at least ``threshold`` 2 MB mappings"""
    maps, threshold = getargs('maps', 'threshold', kwargs)
    if threshold < 1:
        raise ValueError("threshold must be at least 1, got %i" % threshold)
    large = maps.stripped_va[maps.size == np.uint64(PageSize.SIZE_2M)] >> np.uint64(_REGION_SHIFT)
    if len(large) == 0:
        return set()
    regions, counts = np.unique(large, return_counts=True)
    return {canonicalize(int(r) << _REGION_SHIFT, maps.va_bits) for r in regions[counts >= threshold]}


class _TableBuilder:
    """Depth-first construction of a table, one node per call of ``node``"""

    def __init__(self, maps, layout, alloc):
        self.layout = layout
        self.alloc = alloc
        self.va = maps.stripped_va
        self.pa = maps.pa
        self.shifts = maps.shifts
        if layout.nf_threshold is not None:
            self.nf_regions = {strip(r, maps.va_bits) >> _REGION_SHIFT
                               for r in mark_nf_regions(maps=maps, threshold=layout.nf_threshold)}
        else:
            self.nf_regions = set()
        self.nodes = OrderedDict()

    def in_nf_region(self, va_base, span_bits):
        first = va_base >> _REGION_SHIFT
        if span_bits <= _REGION_SHIFT:
            return first in self.nf_regions
        last = (va_base + (1 << span_bits) - 1) >> _REGION_SHIFT
        return any(first <= r <= last for r in self.nf_regions)

    def node(self, va_base, span_bits, widths, start, stop, depth):
        width = widths[0]
        lo = span_bits - width
        # 1) NF regions keep a 2 MB boundary so large pages terminate without replication
        if self.nf_regions and lo < _LARGE_SHIFT < span_bits and self.in_nf_region(va_base, span_bits):
            widths = [span_bits - _LARGE_SHIFT, _LARGE_SHIFT - lo] + list(widths[1:])
            width = widths[0]
            lo = span_bits - width
        # 2) Allocate the node, falling back to conventional levels if the allocator refuses
        size = PageSize.from_width(width)
        base = self.alloc.allocate(size)
        if base is None:
            logger.debug("%s node for 0x%x refused, falling back to %i conventional levels",
                         size.label, va_base, width // FIELD_BITS)
            widths = [FIELD_BITS] * (width // FIELD_BITS) + list(widths[1:])
            width = FIELD_BITS
            lo = span_bits - width
            size = PageSize.SIZE_4K
            base = self.alloc.allocate(size)
        node = PTNode(base=base, size=size, va_base=va_base, span_bits=span_bits, depth=depth)
        self.nodes[base] = node
        # 3) Fill the entries
        va = self.va[start:stop]
        shifts = self.shifts[start:stop]
        index = ((va >> np.uint64(lo)) & np.uint64((1 << width) - 1)).astype(np.int64)
        codes = ((shifts - PageSize.SIZE_4K.shift) // FIELD_BITS).astype(np.uint64)
        terminal = shifts == lo
        if np.any(terminal):
            node.entries[index[terminal]] = ((self.pa[start:stop][terminal] & np.uint64(FRAME_MASK)) |
                                             np.uint64(PRESENT | TERMINAL) |
                                             (codes[terminal] << np.uint64(SIZE_SHIFT)))
        for i in np.nonzero(shifts > lo)[0]:
            # Pages larger than the region of one entry are replicated over all entries they cover
            count = 1 << (int(shifts[i]) - lo)
            raw = encode_entry(int(self.pa[start + i]), PageSize.from_shift(int(shifts[i])), terminal=True)
            node.entries[index[i]:index[i] + count] = np.uint64(raw)
        deeper = np.nonzero(shifts < lo)[0]
        if len(deeper):
            for child_index in np.unique(index[deeper]):
                child_index = int(child_index)
                left = int(np.searchsorted(index, child_index, side='left'))
                right = int(np.searchsorted(index, child_index, side='right'))
                child = self.node(va_base + (child_index << lo), lo, widths[1:], start + left, start + right,
                                  depth + 1)
                node.entries[child_index] = np.uint64(encode_entry(child.base, child.size))
        return node


@docval({'name': 'maps', 'type': MappingSet, 'doc': 'the mappings the table must translate'},
        {'name': 'layout', 'type': LayoutPolicy, 'doc': 'the layout of the table'},
        {'name': 'alloc', 'type': Allocator, 'doc': 'allocator for the page-table nodes', 'default': None},
        returns='the page table', rtype=PageTable, is_method=False)
def build_table(**kwargs):
    """
    Build a page table translating every mapping of ``maps``.

    Flattened nodes the allocator refuses are realized as conventional 4 kB levels for that subtree.
    2 MB mappings under a flattened L2+L1 node are realized as 512 replicated terminal entries,
    unless the enclosing 1 GB region holds at least ``layout.nf_threshold`` 2 MB mappings.
    """
    maps, layout, alloc = getargs('maps', 'layout', 'alloc', kwargs)
    if maps.va_bits != layout.scheme.va_bits:
        raise ValueError("Mappings use %i bit addresses but scheme %s translates %i bits" %
                         (maps.va_bits, layout.scheme, layout.scheme.va_bits))
    alloc = alloc if alloc is not None else Allocator()
    builder = _TableBuilder(maps, layout, alloc)
    root = builder.node(0, layout.scheme.va_bits, list(layout.scheme.widths), 0, len(maps), 0)
    logger.debug("Built %s table with %i nodes for %i mappings", layout.scheme, len(builder.nodes), len(maps))
    return PageTable(root=root.base, scheme=layout.scheme, nodes=builder.nodes, layout=layout)


@docval({'name': 'table', 'type': PageTable, 'doc': 'the table to inspect'},
        returns='tuple of (OrderedDict of PageSize to node count, total bytes)', rtype=tuple, is_method=False)
def count_nodes(**kwargs):
    """Census of the nodes of a table"""
    table = getargs('table', kwargs)
    counts = OrderedDict((s, 0) for s in PageSize)
    for node in table.nodes.values():
        counts[node.size] += 1
    return counts, sum(int(s) * c for s, c in counts.items())


@docval({'name': 'table', 'type': PageTable, 'doc': 'the table to modify'},
        {'name': 'rec_index', 'type': int, 'doc': 'root slot (top 9 bits) of the self-reference', 'default': REC_INDEX},
        is_method=False)
def install_recursion(**kwargs):
    """
    Install a self-referencing entry in the root.

    A 4 kB root receives one recursive entry at ``rec_index``. A flattened 2 MB root receives 512
    copies at the 18 bit indices whose top 9 bits equal ``rec_index``.

    :raises: RecursionLayoutError if a slot is occupied or for 1 GB roots
    :raises: ValueError if rec_index is out of range
    """
    table, rec_index = getargs('table', 'rec_index', kwargs)
    root = table.root_node
    if root.size == PageSize.SIZE_1G:
        raise RecursionLayoutError("Recursion through 1 GB root nodes is not supported")
    if rec_index < 0 or rec_index >= 1 << FIELD_BITS:
        raise ValueError("rec_index %i out of range [0, %i)" % (rec_index, 1 << FIELD_BITS))
    copies = 1 << (root.size.width - FIELD_BITS)
    first = rec_index * copies
    slots = root.entries[first:first + copies]
    if np.any(slots & np.uint64(PRESENT)):
        raise RecursionLayoutError("Root slot(s) %i..%i for the recursive entry are occupied"
                                   % (first, first + copies - 1))
    slots[:] = np.uint64(encode_entry(root.base, root.size, recursive=True))
    table.recursion_index = rec_index
