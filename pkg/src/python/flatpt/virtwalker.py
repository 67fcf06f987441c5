"""
Two-dimensional (nested) walks of virtualized execution.

The guest table maps guest virtual (gVA) to guest physical addresses (gPA) and lives in guest
physical memory; the host table maps gPA to host physical addresses (hPA). Every guest entry read
needs the hPA of its node first, which costs a host walk unless the nested TLB holds it, and the
final data gPA needs one more host walk. Guest and host tables are flattened independently.
"""
import logging

import numpy as np
from hdmf.utils import docval, getargs, popargs

from .addressing import PageSize, OFFSET_BITS, ENTRY_SHIFT, strip
from .pagetable import PageTable, MappingSet, Translation, PRESENT, TERMINAL, RECURSIVE, FRAME_MASK, SIZE_SHIFT
from .memhier import MemoryHierarchy, PTE
from .walker import TLB, TLBHierarchy, PWCSet, PageWalker, WalkResult, MemAccess, TLBHit
from .io.config import ConfigurationError

logger = logging.getLogger(__name__)

_SIZES = (PageSize.SIZE_4K, PageSize.SIZE_2M, PageSize.SIZE_1G)
_LARGE_SHIFT = PageSize.SIZE_2M.shift


class HostMappingError(ConfigurationError):
    """Raised when the host table does not map a guest physical address the guest uses"""
    pass


class NestedTLB(TLB):
    """Fully associative cache of gPA page to hPA translations consulted before every host walk"""

    @docval({'name': 'entries', 'type': int, 'doc': 'number of entries', 'default': 16},
            {'name': 'latency', 'type': int, 'doc': 'lookup latency in cycles', 'default': 1},
            {'name': 'page_sizes', 'type': (list, tuple), 'doc': 'host page sizes the TLB holds',
             'default': (PageSize.SIZE_4K, PageSize.SIZE_2M)},
            {'name': 'enabled', 'type': bool, 'doc': 'enable the nested TLB', 'default': True},
            {'name': 'data_pages', 'type': bool,
             'doc': 'also cache translations of data pages, not only of guest page-table nodes', 'default': True})
    def __init__(self, **kwargs):
        enabled, data_pages = popargs('enabled', 'data_pages', kwargs)
        kwargs['assoc'] = kwargs['entries']
        super().__init__(name='nested', **kwargs)
        self.enabled = enabled
        self.data_pages = data_pages

    @classmethod
    def disabled(cls):
        return cls(enabled=False)


class VirtConfig:
    """The guest and host tables of a virtual machine plus the caches of the nested walker"""

    @docval({'name': 'guest_table', 'type': PageTable, 'doc': 'guest table, node addresses are gPAs'},
            {'name': 'host_table', 'type': PageTable, 'doc': 'host table translating gPAs'},
            {'name': 'guest_pwcs', 'type': PWCSet, 'doc': 'PWCs caching partial guest walks', 'default': None},
            {'name': 'vpwcs', 'type': PWCSet, 'doc': 'PWCs caching partial host walks', 'default': None},
            {'name': 'nested_tlb', 'type': NestedTLB, 'doc': 'the nested TLB', 'default': None})
    def __init__(self, **kwargs):
        guest_table, host_table, guest_pwcs, vpwcs, nested_tlb = getargs('guest_table', 'host_table', 'guest_pwcs',
                                                                          'vpwcs', 'nested_tlb', kwargs)
        self.guest_table = guest_table
        self.host_table = host_table
        self.guest_pwcs = guest_pwcs if guest_pwcs is not None else PWCSet.disabled()
        self.vpwcs = vpwcs if vpwcs is not None else PWCSet.disabled()
        self.nested_tlb = nested_tlb if nested_tlb is not None else NestedTLB.disabled()

    def check_host_coverage(self, host_maps, guest_maps=None):
        """
        Check that the host mappings cover every guest page-table node and, if given, every guest data page

        :raises: HostMappingError naming the first uncovered guest physical page
        """
        starts = [np.asarray([node.base for node in self.guest_table], dtype=np.uint64)]
        if guest_maps is not None:
            starts.append(guest_maps.pa)
        for pages in starts:
            covered = host_maps.covers(pages)
            if not np.all(covered):
                raise HostMappingError("Guest physical page 0x%x is not mapped by the host" %
                                       int(pages[np.argmin(covered)]))


class NestedWalkResult(WalkResult):
    """
    Outcome of one nested walk. ``skipped_levels`` and ``levels`` refer to the guest dimension; the
    host dimension is summarized by the number of host walks, the host levels they skipped through
    the vPWC, and the nested TLB hits.
    """
    __slots__ = ('host_walks', 'host_skipped_levels', 'nested_tlb_hits')

    def __init__(self, accesses, skipped_levels, levels, translation, granularity, lookup_latency,
                 host_walks=0, host_skipped_levels=0, nested_tlb_hits=0):
        super().__init__(accesses, skipped_levels, levels, translation, granularity, lookup_latency)
        self.host_walks = host_walks
        self.host_skipped_levels = host_skipped_levels
        self.nested_tlb_hits = nested_tlb_hits


class NestedWalker:
    """Translation path of one virtualized core"""

    @docval({'name': 'cfg', 'type': VirtConfig, 'doc': 'the tables and walk caches'},
            {'name': 'mem', 'type': MemoryHierarchy, 'doc': 'the memory hierarchy servicing page-table accesses'},
            {'name': 'tlbs', 'type': TLBHierarchy, 'doc': 'TLBs caching gVA to hPA translations', 'default': None},
            {'name': 'ctx', 'type': int, 'doc': 'context id of the accesses', 'default': 0})
    def __init__(self, **kwargs):
        cfg, mem, tlbs, ctx = getargs('cfg', 'mem', 'tlbs', 'ctx', kwargs)
        self.cfg = cfg
        self.mem = mem
        self.tlbs = tlbs if tlbs is not None else TLBHierarchy.disabled()
        self.ctx = ctx
        self.host = PageWalker(table=cfg.host_table, mem=mem, pwcs=cfg.vpwcs, ctx=ctx, stage='host')

    def translate(self, gva):
        """
        Translate ``gva`` through the TLBs, walking both dimensions on a miss

        :returns: tuple of (Translation to hPA or None, TLBHit or NestedWalkResult)
        """
        low = strip(gva, self.cfg.guest_table.va_bits)
        hit, level, latency = self.tlbs.lookup(low)
        if hit is not None:
            return hit, TLBHit(level, latency, hit)
        walk = self.walk(low)
        walk.lookup_latency += latency
        if walk.translation is not None:
            self.tlbs.fill(low, walk.translation, walk.granularity)
        return walk.translation, walk

    def resolve(self, gpa, walk, data=False):
        """
        Translate a guest physical address with the nested TLB or a host walk, recording the host accesses in
        ``walk``

        :returns: tuple of (host Translation, log2 of the host region it is valid for)
        :raises: HostMappingError if the host does not map gpa
        """
        nested = self.cfg.nested_tlb
        use_nested = nested.enabled and (nested.data_pages or not data)
        if use_nested:
            walk.lookup_latency += nested.latency
            hit = nested.lookup(gpa)
            if hit is not None:
                walk.nested_tlb_hits += 1
                return hit
        host = self.host.walk(gpa)
        walk.accesses.extend(host.accesses)
        walk.lookup_latency += host.lookup_latency
        walk.host_walks += 1
        walk.host_skipped_levels += host.skipped_levels
        if host.translation is None:
            raise HostMappingError("Guest physical address 0x%x is not mapped by the host" % gpa)
        if use_nested:
            nested.fill(gpa, host.translation, host.granularity)
        return host.translation, host.granularity

    def walk(self, low_gva):
        """
        Walk the guest table for ``low_gva``, resolving every guest node and the data page through the host

        :returns: NestedWalkResult with guest and host accesses in issue order
        """
        guest = self.cfg.guest_table
        nodes = guest.nodes
        pwcs = self.cfg.guest_pwcs
        mem = self.mem
        cursor = guest.va_bits
        node = guest.root
        size = nodes[node].size
        walk = NestedWalkResult([], 0, 0, None, None, 0)
        if pwcs.enabled:
            walk.lookup_latency += pwcs.latency
            hit = pwcs.lookup(low_gva)
            if hit is not None:
                cursor, node, size, walk.skipped_levels = hit
        pointers = []
        reads = 0
        guest_translation = None
        granularity = None
        while True:
            width = size.width
            lo = cursor - width
            if lo < OFFSET_BITS:
                raise ValueError("Guest walk of 0x%x ran past the page offset at node 0x%x" % (low_gva, node))
            index = (low_gva >> lo) & ((1 << width) - 1)
            entry_gpa = node + (index << ENTRY_SHIFT)
            host, _ = self.resolve(entry_gpa, walk)
            hpa = host.address(entry_gpa)
            latency, where = mem.access(hpa, PTE, self.ctx)
            walk.accesses.append(MemAccess(hpa, where, latency, True, 'guest'))
            reads += 1
            raw = int(nodes[node].entries[index])
            if not raw & PRESENT:
                break
            code = (raw >> SIZE_SHIFT) & 0x3
            if raw & TERMINAL:
                guest_translation = Translation(raw & FRAME_MASK, int(_SIZES[code]))
                granularity = lo
                break
            if raw & RECURSIVE:
                raise ValueError("Guest walk of 0x%x entered the recursive window at node 0x%x" % (low_gva, node))
            node = raw & FRAME_MASK
            size = _SIZES[code]
            cursor = lo
            pointers.append((cursor, node, size, walk.skipped_levels + reads))
        walk.levels = walk.skipped_levels + reads
        if guest_translation is None:
            return walk
        pwcs.fill(low_gva, pointers, walk.levels)
        data_gpa = guest_translation.address(low_gva)
        host, host_granularity = self.resolve(data_gpa, walk, data=True)
        page_size = min(guest_translation.page_size, host.page_size)
        walk.translation = Translation(host.address(data_gpa) & ~(page_size - 1), page_size)
        walk.granularity = min(granularity, host_granularity)
        return walk


@docval({'name': 'gva', 'type': int, 'doc': 'canonical guest virtual address'},
        {'name': 'cfg', 'type': VirtConfig, 'doc': 'the tables and walk caches'},
        {'name': 'tlbs', 'type': TLBHierarchy, 'doc': 'TLBs caching gVA to hPA translations'},
        {'name': 'mem', 'type': MemoryHierarchy, 'doc': 'the memory hierarchy'},
        returns='tuple of (Translation to hPA or None, TLBHit or NestedWalkResult)', rtype=tuple, is_method=False)
def nested_translate(**kwargs):
    """
    Translate one guest virtual address. The state of the walk caches lives in ``cfg``, ``tlbs``, and ``mem``,
    so repeated calls see warm structures.
    """
    gva, cfg, tlbs, mem = getargs('gva', 'cfg', 'tlbs', 'mem', kwargs)
    return NestedWalker(cfg=cfg, mem=mem, tlbs=tlbs).translate(gva)


@docval({'name': 'g_levels', 'type': int, 'doc': 'levels of the guest walk'},
        {'name': 'h_levels', 'type': int, 'doc': 'levels of every host walk'},
        returns='number of accesses of a nested walk without any caching', rtype=int, is_method=False)
def naive_access_count(**kwargs):
    g_levels, h_levels = getargs('g_levels', 'h_levels', kwargs)
    if g_levels < 1 or h_levels < 1:
        raise ValueError("Walks have at least one level, got %i and %i" % (g_levels, h_levels))
    return g_levels * h_levels + g_levels + h_levels


@docval({'name': 'guest_maps', 'type': MappingSet, 'doc': 'the gVA to gPA mappings of the guest'},
        {'name': 'guest_table', 'type': PageTable, 'doc': 'the guest table built from guest_maps'},
        {'name': 'large_page_fraction', 'type': (int, float),
         'doc': 'fraction of the host-backed 2 MB chunks mapped with 2 MB host pages', 'default': 0.0},
        {'name': 'pa_base', 'type': int, 'doc': 'first host physical address to assign', 'default': 0},
        {'name': 'va_bits', 'type': int, 'doc': 'address width of the host table', 'default': 48},
        returns='the gPA to hPA mappings', rtype=MappingSet, is_method=False)
def host_mappings(**kwargs):
    """
    Derive host mappings backing every guest physical page the guest uses: its data pages and its page-table
    nodes.

    The guest-physical space is backed in 2 MB chunks, in ascending gPA order and contiguously in host memory
    from ``pa_base``. The first ``large_page_fraction`` of the chunks are mapped by 2 MB host pages and the rest
    by 4 kB host pages.
    """
    guest_maps, guest_table, fraction, pa_base, va_bits = getargs('guest_maps', 'guest_table', 'large_page_fraction',
                                                                  'pa_base', 'va_bits', kwargs)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("large_page_fraction must be in [0, 1], got %s" % fraction)
    if pa_base & (PageSize.SIZE_2M - 1):
        raise ValueError("pa_base 0x%x is not 2 MB aligned" % pa_base)
    chunks = [guest_maps.pa >> np.uint64(_LARGE_SHIFT)]
    for node in guest_table:
        first = node.base >> _LARGE_SHIFT
        chunks.append(np.arange(first, first + max(1, int(node.size) >> _LARGE_SHIFT), dtype=np.uint64))
    chunks = np.unique(np.concatenate(chunks))
    num_large = int(round(fraction * len(chunks)))
    chunk_hpa = np.uint64(pa_base) + (np.arange(len(chunks), dtype=np.uint64) << np.uint64(_LARGE_SHIFT))
    small = chunks[num_large:]
    per_chunk = int(PageSize.SIZE_2M) // int(PageSize.SIZE_4K)
    offsets = np.tile(np.arange(per_chunk, dtype=np.uint64) << np.uint64(PageSize.SIZE_4K.shift), len(small))
    va = np.concatenate([chunks[:num_large] << np.uint64(_LARGE_SHIFT),
                         np.repeat(small << np.uint64(_LARGE_SHIFT), per_chunk) + offsets])
    pa = np.concatenate([chunk_hpa[:num_large], np.repeat(chunk_hpa[num_large:], per_chunk) + offsets])
    size = np.concatenate([np.full(num_large, int(PageSize.SIZE_2M), dtype=np.uint64),
                           np.full(len(small) * per_chunk, int(PageSize.SIZE_4K), dtype=np.uint64)])
    logger.debug("Host backs %i chunks of guest physical memory, %i with 2 MB pages", len(chunks), num_large)
    return MappingSet(va=va, pa=pa, size=size, va_bits=va_bits)
