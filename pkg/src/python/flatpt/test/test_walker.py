"""
Unit test module for the native translation path: TLBs, page-walker caches, and page walks
"""
import unittest
import os
from collections import OrderedDict

try:
    from flatpt.addressing import PageSize
    from flatpt.pagetable import LayoutPolicy, build_table
    from flatpt.memhier import MemoryHierarchy
    from flatpt.walker import TLB, TLBHierarchy, PWCSet, PageWalker, WalkResult, TLBHit
    from flatpt.workload import FragmentationPolicy, layout
except ImportError:
    # If we are running tests directly in the GitHub repo without installing the package
    import sys
    sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
    from flatpt.addressing import PageSize
    from flatpt.pagetable import LayoutPolicy, build_table
    from flatpt.memhier import MemoryHierarchy
    from flatpt.walker import TLB, TLBHierarchy, PWCSet, PageWalker, WalkResult, TLBHit
    from flatpt.workload import FragmentationPolicy, layout

BASE = 1 << 40
_2M = int(PageSize.SIZE_2M)
CACHES = OrderedDict([('L1D', {'size': 32 << 10, 'assoc': 8, 'latency': 4}),
                      ('L2', {'size': 256 << 10, 'assoc': 8, 'latency': 12}),
                      ('L3', {'size': 2 << 20, 'assoc': 8, 'latency': 42})])


def make_memory():
    return MemoryHierarchy.from_config(CACHES, dram_latency=170)


def make_table(scheme, large_page_fraction=0.0):
    maps = layout(footprint=64 << 20, frag=FragmentationPolicy(large_page_fraction=large_page_fraction), seed=2)
    return maps, build_table(maps=maps, layout=LayoutPolicy(scheme=scheme))


def make_tlbs():
    return TLBHierarchy(l1=[TLB(name='L1-4K', entries=64, assoc=4),
                            TLB(name='L1-2M', entries=32, assoc=4, page_sizes=(PageSize.SIZE_2M, ))],
                        l2=TLB(name='L2', entries=1536, assoc=12, latency=9,
                               page_sizes=(PageSize.SIZE_4K, PageSize.SIZE_2M)))


def make_pwcs(assignment='leaf'):
    return PWCSet(sizes={'L2': 24, 'L3': 4, 'L4': 4}, assignment=assignment)


class TLBTests(unittest.TestCase):

    def test_lru_within_set(self):
        tlb = TLB(name='test', entries=2, assoc=2)
        for page in (1, 2, 3):
            tlb.fill(page << 12, page, 12)
        self.assertIsNone(tlb.lookup(1 << 12))
        self.assertEqual(tlb.lookup(3 << 12), (3, 12))
        self.assertEqual(len(tlb), 2)
        self.assertEqual(tlb.lookups, 2)
        self.assertEqual(tlb.hits, 1)

    def test_recency_update(self):
        tlb = TLB(name='test', entries=2, assoc=2)
        tlb.fill(1 << 12, 1, 12)
        tlb.fill(2 << 12, 2, 12)
        tlb.lookup(1 << 12)
        tlb.fill(3 << 12, 3, 12)
        self.assertIsNotNone(tlb.lookup(1 << 12))
        self.assertIsNone(tlb.lookup(2 << 12))

    def test_unsupported_size_ignored(self):
        tlb = TLB(name='test', entries=4, assoc=4)
        tlb.fill(0, 'page', 21)
        self.assertEqual(len(tlb), 0)

    def test_invalid_geometry(self):
        with self.assertRaisesRegex(ValueError, "6 entries cannot be organized in 4-way sets"):
            TLB(name='bad', entries=6, assoc=4)

    def test_hierarchy(self):
        tlbs = make_tlbs()
        self.assertEqual(tlbs.lookup(0x5000), (None, None, 10))
        tlbs.fill(0x5000, 'page', 12)
        self.assertEqual(tlbs.lookup(0x5008), ('page', 'L1', 1))
        self.assertEqual(tlbs.lookups, 2)
        self.assertEqual(tlbs.l1_hits, 1)
        self.assertEqual(tlbs.misses, 1)

    def test_disabled(self):
        tlbs = TLBHierarchy.disabled()
        tlbs.fill(0x5000, 'page', 12)
        self.assertEqual(tlbs.lookup(0x5000), (None, None, 0))
        self.assertEqual(tlbs.lookups, 0)


class PWCSetTests(unittest.TestCase):

    def test_unknown_store(self):
        with self.assertRaisesRegex(KeyError, "Unknown PWC stores"):
            PWCSet(sizes={'L6': 4})

    def test_unknown_assignment(self):
        with self.assertRaisesRegex(ValueError, "Unknown PWC assignment 'deepest'"):
            PWCSet(sizes={'L2': 4}, assignment='deepest')

    def test_disabled(self):
        pwcs = PWCSet.disabled()
        self.assertFalse(pwcs.enabled)
        self.assertIsNone(pwcs.lookup(0))
        self.assertEqual(pwcs.hit_rate(), 0.0)


class PageWalkerTests(unittest.TestCase):

    def test_cold_walk_conventional(self):
        maps, table = make_table('[9,9,9,9]')
        walker = PageWalker(table=table, mem=make_memory())
        va = BASE + 0x12345
        translation, walk = walker.translate(va)
        self.assertIsInstance(walk, WalkResult)
        self.assertEqual(translation, maps.lookup(va))
        self.assertEqual(len(walk), 4)
        self.assertEqual(walk.levels, 4)
        self.assertEqual(walk.skipped_levels, 0)
        self.assertEqual([a.serviced_at for a in walk.accesses], ['DRAM'] * 4)
        self.assertEqual(walk.total_latency, 4 * (42 + 170))
        self.assertTrue(all(a.is_pte and a.stage == 'native' for a in walk.accesses))

    def test_cold_walk_flattened(self):
        maps, table = make_table('[18,18]')
        walker = PageWalker(table=table, mem=make_memory())
        translation, walk = walker.translate(BASE + 0x12345)
        self.assertEqual(len(walk), 2)
        self.assertEqual(translation, maps.lookup(BASE + 0x12345))
        self.assertEqual(walk.accesses[0].addr >> 21, table.root >> 21)

    def test_cold_walk_l3_l2_flattened(self):
        _, table = make_table('[9,18,9]')
        _, walk = PageWalker(table=table, mem=make_memory()).translate(BASE)
        self.assertEqual(len(walk), 3)

    def test_repeated_walk_hits_l1d(self):
        _, table = make_table('[9,9,9,9]')
        walker = PageWalker(table=table, mem=make_memory())
        walker.translate(BASE)
        _, walk = walker.translate(BASE)
        self.assertEqual([a.serviced_at for a in walk.accesses], ['L1D'] * 4)

    def test_pwc_skips_levels(self):
        _, table = make_table('[9,9,9,9]')
        pwcs = make_pwcs()
        walker = PageWalker(table=table, mem=make_memory(), pwcs=pwcs)
        walker.translate(BASE)
        _, walk = walker.translate(BASE + 0x1000)
        self.assertEqual(len(walk), 1)
        self.assertEqual(walk.skipped_levels, 3)
        self.assertEqual(walk.levels, 4)
        # another 2 MB region of the same 1 GB region reuses the L3-depth pointer
        _, walk = walker.translate(BASE + 5 * _2M)
        self.assertEqual(len(walk), 2)
        self.assertEqual(walk.skipped_levels, 2)
        self.assertAlmostEqual(pwcs.hit_rate(), 2 / 3)
        self.assertAlmostEqual(pwcs.hit_rate('L2'), 1 / 3)
        self.assertAlmostEqual(pwcs.hit_rate('L3'), 1 / 3)

    def test_pwc_flattened_leaf_store(self):
        _, table = make_table('[18,18]')
        pwcs = make_pwcs()
        walker = PageWalker(table=table, mem=make_memory(), pwcs=pwcs)
        walker.translate(BASE)
        _, walk = walker.translate(BASE + 20 * _2M)
        self.assertEqual(len(walk), 1)
        self.assertEqual(walk.skipped_levels, 1)
        self.assertEqual(pwcs.hit_rate('L2'), 0.5)

    def test_pwc_prefix_assignment(self):
        _, table = make_table('[18,18]')
        pwcs = make_pwcs('prefix')
        walker = PageWalker(table=table, mem=make_memory(), pwcs=pwcs)
        walker.translate(BASE)
        _, walk = walker.translate(BASE + 20 * _2M)
        self.assertEqual(len(walk), 1)
        self.assertEqual(pwcs.hit_rate('L3'), 0.5)
        self.assertEqual(pwcs.hit_rate('L2'), 0.0)

    def test_store_for(self):
        sizes = {'L2': 4, 'L3': 4, 'L4': 4, 'L5': 4}
        leaf, prefix = PWCSet(sizes=sizes), PWCSet(sizes=sizes, assignment='prefix')
        # pointer to a flattened L2+L1 node read after consuming bits 47..30
        self.assertEqual(leaf.store_for(30, 0).name, 'L2')
        self.assertEqual(prefix.store_for(30, 0).name, 'L3')
        self.assertEqual([prefix.store_for(c, 0).name for c in (21, 30, 39, 48)], ['L2', 'L3', 'L4', 'L5'])
        self.assertEqual([leaf.store_for(39, n).name for n in range(4)], ['L2', 'L3', 'L4', 'L5'])
        self.assertIsNone(leaf.store_for(39, 4))
        self.assertIsNone(prefix.store_for(12, 0))

    def test_tlb_hit_after_walk(self):
        maps, table = make_table('[9,9,9,9]')
        walker = PageWalker(table=table, mem=make_memory(), tlbs=make_tlbs())
        walker.translate(BASE + 0x40)
        translation, result = walker.translate(BASE + 0x80)
        self.assertIsInstance(result, TLBHit)
        self.assertEqual(result.level, 'L1')
        self.assertEqual(translation, maps.lookup(BASE))

    def test_large_page_tlb_fill(self):
        # a 2 MB page mapped by a terminal L2 entry fills the 2 MB TLB
        maps, table = make_table('[9,9,9,9]', large_page_fraction=0.5)
        walker = PageWalker(table=table, mem=make_memory(), tlbs=make_tlbs())
        _, walk = walker.translate(BASE)
        self.assertEqual(walk.granularity, 21)
        translation, result = walker.translate(BASE + 0x10000)
        self.assertIsInstance(result, TLBHit)
        self.assertEqual(translation.page_size, _2M)

    def test_replicated_entry_tlb_fill(self):
        # a 2 MB page realized by replicated entries only fills the TLB for one 4 kB region
        maps, table = make_table('[18,18]', large_page_fraction=0.5)
        walker = PageWalker(table=table, mem=make_memory(), tlbs=make_tlbs())
        translation, walk = walker.translate(BASE)
        self.assertEqual(translation.page_size, _2M)
        self.assertEqual(walk.granularity, 12)
        translation, result = walker.translate(BASE + 0x10000)
        self.assertIsInstance(result, WalkResult)
        self.assertEqual(translation, maps.lookup(BASE))

    def test_unmapped(self):
        _, table = make_table('[9,9,9,9]')
        tlbs = make_tlbs()
        walker = PageWalker(table=table, mem=make_memory(), tlbs=tlbs)
        translation, walk = walker.translate(BASE + (64 << 20))
        self.assertIsNone(translation)
        self.assertEqual(len(walk), 3)
        translation, walk = walker.translate(BASE + (64 << 20))
        self.assertIsInstance(walk, WalkResult)


if __name__ == '__main__':
    unittest.main()
