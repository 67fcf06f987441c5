"""
Native address translation: L1/L2 TLBs, page-walker caches (PWCs), and the page walk itself.

The walker descends the table by reading each node's size bits from the entry that points to it,
so flattened nodes, fallback subtrees, and NF regions are walked without knowing the layout. Every
entry read is issued as a page-table access into the :py:class:`~flatpt.memhier.MemoryHierarchy`.
"""
import logging
from collections import OrderedDict, namedtuple, Counter

from hdmf.utils import docval, getargs

from .addressing import PageSize, OFFSET_BITS, FIELD_BITS, ENTRY_SHIFT, strip
from .pagetable import PageTable, Translation, PRESENT, TERMINAL, RECURSIVE, FRAME_MASK, SIZE_SHIFT
from .memhier import MemoryHierarchy, PTE

logger = logging.getLogger(__name__)

#: PWC stores in walk order from the leaf upwards
PWC_STORES = ('L2', 'L3', 'L4', 'L5')
#: How walks are assigned to PWC stores
PWC_ASSIGNMENTS = ('leaf', 'prefix')

_SIZES = (PageSize.SIZE_4K, PageSize.SIZE_2M, PageSize.SIZE_1G)
_WIDTHS = {s: s.width for s in _SIZES}


# One access issued by a walk. stage is native, guest, or host
MemAccess = namedtuple('MemAccess', ['addr', 'serviced_at', 'latency', 'is_pte', 'stage'], defaults=(True, 'native'))

TLBHit = namedtuple('TLBHit', ['level', 'latency', 'translation'])
PWCEntry = namedtuple('PWCEntry', ['node', 'size', 'consumed'])


class WalkResult:
    """
    Outcome of one page walk.

    :ivar accesses: list of MemAccess in issue order
    :ivar skipped_levels: levels skipped thanks to a PWC hit
    :ivar levels: number of nodes on the walk path of the address
    :ivar translation: Translation or None for an unmapped address
    :ivar granularity: log2 of the region translated by the terminal entry (the TLB fill size)
    :ivar lookup_latency: cycles spent in TLB and PWC lookups
    """
    __slots__ = ('accesses', 'skipped_levels', 'levels', 'translation', 'granularity', 'lookup_latency')

    def __init__(self, accesses, skipped_levels, levels, translation, granularity, lookup_latency):
        self.accesses = accesses
        self.skipped_levels = skipped_levels
        self.levels = levels
        self.translation = translation
        self.granularity = granularity
        self.lookup_latency = lookup_latency

    @property
    def total_latency(self):
        return self.lookup_latency + sum(a.latency for a in self.accesses)

    @property
    def pte_accesses(self):
        return sum(1 for a in self.accesses if a.is_pte)

    def __len__(self):
        return len(self.accesses)

    def __repr__(self):
        return 'WalkResult(accesses=%i, skipped=%i, levels=%i, latency=%i)' % (len(self.accesses),
                                                                               self.skipped_levels, self.levels,
                                                                               self.total_latency)


class TLB:
    """Set-associative TLB with LRU replacement per set, keyed by virtual page number and page size"""

    @docval({'name': 'name', 'type': str, 'doc': 'name of the TLB'},
            {'name': 'entries', 'type': int, 'doc': 'number of entries'},
            {'name': 'assoc', 'type': int, 'doc': 'associativity. Equal to entries for a fully associative TLB'},
            {'name': 'latency', 'type': int, 'doc': 'lookup latency in cycles', 'default': 1},
            {'name': 'page_sizes', 'type': (list, tuple), 'doc': 'page sizes the TLB holds',
             'default': (PageSize.SIZE_4K, )})
    def __init__(self, **kwargs):
        name, entries, assoc, latency, page_sizes = getargs('name', 'entries', 'assoc', 'latency', 'page_sizes',
                                                            kwargs)
        if entries < 1 or assoc < 1 or entries % assoc:
            raise ValueError("TLB %s: %i entries cannot be organized in %i-way sets" % (name, entries, assoc))
        self.name = name
        self.entries = entries
        self.assoc = assoc
        self.latency = latency
        self.page_sizes = tuple(PageSize(s) for s in page_sizes)
        self.shifts = tuple(s.shift for s in self.page_sizes)
        self.num_sets = entries // assoc
        self.sets = [OrderedDict() for _ in range(self.num_sets)]
        self.lookups = 0
        self.hits = 0

    def lookup(self, low_va):
        """:returns: tuple of (cached Translation, log2 of the entry's region) or None"""
        self.lookups += 1
        for shift in self.shifts:
            vpn = low_va >> shift
            tlb_set = self.sets[vpn % self.num_sets]
            key = (shift, vpn)
            if key in tlb_set:
                tlb_set.move_to_end(key)
                self.hits += 1
                return tlb_set[key], shift
        return None

    def fill(self, low_va, translation, shift):
        """Insert a translation valid for the ``2**shift`` region containing low_va. Ignored for unsupported sizes"""
        if shift not in self.shifts:
            return
        vpn = low_va >> shift
        tlb_set = self.sets[vpn % self.num_sets]
        key = (shift, vpn)
        if key in tlb_set:
            tlb_set.move_to_end(key)
        elif len(tlb_set) >= self.assoc:
            tlb_set.popitem(last=False)
        tlb_set[key] = translation

    def flush(self):
        for tlb_set in self.sets:
            tlb_set.clear()

    def reset_counters(self):
        self.lookups = 0
        self.hits = 0

    def __len__(self):
        return sum(len(s) for s in self.sets)


class TLBHierarchy:
    """
    First-level TLBs looked up in parallel, backed by a unified second-level TLB.
    A disabled hierarchy misses every lookup at no cost and ignores fills.
    """

    @docval({'name': 'l1', 'type': list, 'doc': 'first-level TLBs, looked up in parallel'},
            {'name': 'l2', 'type': TLB, 'doc': 'unified second-level TLB', 'default': None},
            {'name': 'enabled', 'type': bool, 'doc': 'enable the TLBs', 'default': True})
    def __init__(self, **kwargs):
        l1, l2, enabled = getargs('l1', 'l2', 'enabled', kwargs)
        self.l1 = list(l1)
        self.l2 = l2
        self.enabled = enabled
        self.l1_latency = max((t.latency for t in self.l1), default=0)
        self.lookups = 0
        self.l1_hits = 0
        self.l2_hits = 0

    @classmethod
    def disabled(cls):
        return cls(l1=[], l2=None, enabled=False)

    def lookup(self, low_va):
        """
        :returns: tuple of (Translation or None, name of the hitting level or None, lookup latency in cycles)
        """
        if not self.enabled:
            return None, None, 0
        self.lookups += 1
        for tlb in self.l1:
            hit = tlb.lookup(low_va)
            if hit is not None:
                self.l1_hits += 1
                return hit[0], 'L1', self.l1_latency
        latency = self.l1_latency
        if self.l2 is not None:
            latency += self.l2.latency
            hit = self.l2.lookup(low_va)
            if hit is not None:
                self.l2_hits += 1
                translation, shift = hit
                for tlb in self.l1:
                    tlb.fill(low_va, translation, shift)
                return translation, 'L2', latency
        return None, None, latency

    def fill(self, low_va, translation, shift):
        if not self.enabled:
            return
        for tlb in self.l1:
            tlb.fill(low_va, translation, shift)
        if self.l2 is not None:
            self.l2.fill(low_va, translation, shift)

    @property
    def misses(self):
        return self.lookups - self.l1_hits - self.l2_hits

    def reset_counters(self):
        self.lookups = 0
        self.l1_hits = 0
        self.l2_hits = 0
        for tlb in self.l1 + ([self.l2] if self.l2 is not None else []):
            tlb.reset_counters()


class PageWalkCache:
    """
    Fully associative LRU store of partial walks.

    Entries are keyed by ``(cursor, tag)``: the walk consumed all virtual address bits above ``cursor``
    and ``tag`` holds those bits. Walks of differently shaped subtrees can share a store without aliasing.
    """

    @docval({'name': 'name', 'type': str, 'doc': 'name of the store, e.g., L2'},
            {'name': 'entries', 'type': int, 'doc': 'number of entries'},
            {'name': 'latency', 'type': int, 'doc': 'lookup latency in cycles', 'default': 1})
    def __init__(self, **kwargs):
        name, entries, latency = getargs('name', 'entries', 'latency', kwargs)
        if entries < 1:
            raise ValueError("PWC store %s needs at least one entry, got %i" % (name, entries))
        self.name = name
        self.entries = entries
        self.latency = latency
        self.store = OrderedDict()
        self.cursors = Counter()
        self.lookups = 0
        self.hits = 0

    def lookup(self, low_va):
        """:returns: tuple (cursor, PWCEntry) of the deepest matching entry or None"""
        for cursor in sorted(self.cursors):
            key = (cursor, low_va >> cursor)
            entry = self.store.get(key)
            if entry is not None:
                self.store.move_to_end(key)
                return cursor, entry
        return None

    def insert(self, cursor, tag, entry):
        key = (cursor, tag)
        if key in self.store:
            self.store.move_to_end(key)
        else:
            if len(self.store) >= self.entries:
                old, _ = self.store.popitem(last=False)
                self.cursors[old[0]] -= 1
                if not self.cursors[old[0]]:
                    del self.cursors[old[0]]
            self.cursors[cursor] += 1
        self.store[key] = entry

    def __contains__(self, key):
        return key in self.store

    def __len__(self):
        return len(self.store)

    def clear(self):
        self.store.clear()
        self.cursors.clear()


class PWCSet:
    """
    The page-walker caches of one walker.

    A pointer read by a walk is cached in one store. With ``assignment='leaf'`` the store is chosen
    by the number of nodes left below the pointed-to node on the walk: pointers to the last node
    go to ``L2``, the next higher to ``L3``, and so on. A flattened ``[18, 18]`` table thus caches its
    root entries in the largest store. With ``assignment='prefix'`` the store is chosen by the number
    of address bits consumed, as in a conventional four-level table: a pointer read after consuming
    all bits above bit ``cursor`` goes to store ``L(k)`` with ``k = (cursor - 12) / 9 + 1``.
    """

    @docval({'name': 'sizes', 'type': dict, 'doc': 'number of entries per store name (L2, L3, L4, L5)'},
            {'name': 'latency', 'type': int, 'doc': 'lookup latency in cycles (stores are looked up in parallel)',
             'default': 1},
            {'name': 'assignment', 'type': str, 'doc': 'store assignment, leaf or prefix', 'default': 'leaf'},
            {'name': 'enabled', 'type': bool, 'doc': 'enable the PWCs', 'default': True})
    def __init__(self, **kwargs):
        sizes, latency, assignment, enabled = getargs('sizes', 'latency', 'assignment', 'enabled', kwargs)
        if assignment not in PWC_ASSIGNMENTS:
            raise ValueError("Unknown PWC assignment '%s', expected one of %s" % (assignment, PWC_ASSIGNMENTS))
        unknown = set(sizes) - set(PWC_STORES)
        if unknown:
            raise KeyError("Unknown PWC stores %s, expected names from %s" % (sorted(unknown), PWC_STORES))
        self.stores = OrderedDict((name, PageWalkCache(name=name, entries=int(sizes[name]), latency=latency))
                                  for name in PWC_STORES if sizes.get(name))
        self.latency = latency
        self.assignment = assignment
        self.enabled = enabled and bool(self.stores)
        self.lookups = 0
        self.hits = Counter()

    @classmethod
    def disabled(cls):
        return cls(sizes={}, enabled=False)

    def store_for(self, cursor, nodes_below):
        if self.assignment == 'leaf':
            position = nodes_below
        else:
            position = (cursor - OFFSET_BITS) // FIELD_BITS - 1
        if position < 0 or position >= len(PWC_STORES):
            return None
        return self.stores.get(PWC_STORES[position])

    def lookup(self, low_va):
        """
        Find the deepest cached partial walk of ``low_va``

        :returns: tuple of (cursor, node base, node size, levels consumed) or None
        """
        if not self.enabled:
            return None
        self.lookups += 1
        for store in self.stores.values():
            store.lookups += 1
        best = None
        for store in self.stores.values():
            hit = store.lookup(low_va)
            if hit is not None and (best is None or hit[0] < best[1][0]):
                best = (store, hit)
        if best is None:
            return None
        store, (cursor, entry) = best
        store.hits += 1
        self.hits[store.name] += 1
        return cursor, entry.node, entry.size, entry.consumed

    def fill(self, low_va, pointers, levels):
        """
        Insert the pointers read by a completed walk

        :param pointers: list of (cursor, node base, node size, levels consumed) for every non-terminal entry read
        :param levels: number of nodes on the walk path
        """
        if not self.enabled:
            return
        for cursor, node, size, consumed in pointers:
            store = self.store_for(cursor, levels - consumed - 1)
            if store is not None:
                store.insert(cursor, low_va >> cursor, PWCEntry(node, size, consumed))

    def clear(self):
        for store in self.stores.values():
            store.clear()

    def reset_counters(self):
        self.lookups = 0
        self.hits = Counter()
        for store in self.stores.values():
            store.lookups = 0
            store.hits = 0

    def hit_rate(self, name=None):
        if not self.lookups:
            return 0.0
        hits = sum(self.hits.values()) if name is None else self.hits[name]
        return hits / self.lookups


class PageWalker:
    """Translation path of one core for native execution"""

    @docval({'name': 'table', 'type': PageTable, 'doc': 'the page table to walk'},
            {'name': 'mem', 'type': MemoryHierarchy, 'doc': 'the memory hierarchy servicing page-table accesses'},
            {'name': 'tlbs', 'type': TLBHierarchy, 'doc': 'the TLBs', 'default': None},
            {'name': 'pwcs', 'type': PWCSet, 'doc': 'the page-walker caches', 'default': None},
            {'name': 'ctx', 'type': int, 'doc': 'context id of the accesses', 'default': 0},
            {'name': 'stage', 'type': str, 'doc': 'stage recorded with the accesses', 'default': 'native'})
    def __init__(self, **kwargs):
        table, mem, tlbs, pwcs, ctx, stage = getargs('table', 'mem', 'tlbs', 'pwcs', 'ctx', 'stage', kwargs)
        self.table = table
        self.mem = mem
        self.tlbs = tlbs if tlbs is not None else TLBHierarchy.disabled()
        self.pwcs = pwcs if pwcs is not None else PWCSet.disabled()
        self.ctx = ctx
        self.stage = stage

    def translate(self, va):
        """
        Translate ``va`` through the TLBs, walking the table on a miss

        :returns: tuple of (Translation or None, TLBHit or WalkResult)
        """
        low = strip(va, self.table.va_bits)
        hit, level, latency = self.tlbs.lookup(low)
        if hit is not None:
            return hit, TLBHit(level, latency, hit)
        walk = self.walk(low)
        walk.lookup_latency += latency
        if walk.translation is not None:
            self.tlbs.fill(low, walk.translation, walk.granularity)
        return walk.translation, walk

    def walk(self, low_va):
        """
        Walk the table for the translated bits ``low_va`` of an address, starting at the deepest PWC hit

        :returns: WalkResult
        """
        table = self.table
        nodes = table.nodes
        mem = self.mem
        cursor = table.va_bits
        node = table.root
        size = nodes[node].size
        skipped = 0
        lookup_latency = 0
        if self.pwcs.enabled:
            lookup_latency = self.pwcs.latency
            hit = self.pwcs.lookup(low_va)
            if hit is not None:
                cursor, node, size, skipped = hit
        accesses = []
        pointers = []
        translation = None
        granularity = None
        while True:
            width = _WIDTHS[size]
            lo = cursor - width
            if lo < OFFSET_BITS:
                raise ValueError("Walk of 0x%x ran past the page offset at node 0x%x" % (low_va, node))
            index = (low_va >> lo) & ((1 << width) - 1)
            addr = node + (index << ENTRY_SHIFT)
            latency, where = mem.access(addr, PTE, self.ctx)
            accesses.append(MemAccess(addr, where, latency, True, self.stage))
            raw = int(nodes[node].entries[index])
            if not raw & PRESENT:
                break
            code = (raw >> SIZE_SHIFT) & 0x3
            if raw & TERMINAL:
                translation = Translation(raw & FRAME_MASK, int(_SIZES[code]))
                granularity = lo
                break
            if raw & RECURSIVE:
                raise ValueError("Walk of 0x%x entered the recursive window at node 0x%x" % (low_va, node))
            node = raw & FRAME_MASK
            size = _SIZES[code]
            cursor = lo
            pointers.append((cursor, node, size, skipped + len(accesses)))
        levels = skipped + len(accesses)
        if translation is not None:
            self.pwcs.fill(low_va, pointers, levels)
        return WalkResult(accesses, skipped, levels, translation, granularity, lookup_latency)
