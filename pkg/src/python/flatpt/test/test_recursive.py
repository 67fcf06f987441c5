"""
Unit test module for self-referencing page tables
"""
import unittest
import os

try:
    from flatpt.addressing import PageSize, canonicalize
    from flatpt.pagetable import LayoutPolicy, RecursionLayoutError, REC_INDEX, build_table, install_recursion
    from flatpt.recursive import (recursion_step, recursion_count, make_recursive_va, recursive_translate,
                                  recursive_va_for_node)
    from flatpt.workload import FragmentationPolicy, layout
except ImportError:
    # If we are running tests directly in the GitHub repo without installing the package
    import sys
    sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
    from flatpt.addressing import PageSize, canonicalize
    from flatpt.pagetable import LayoutPolicy, RecursionLayoutError, REC_INDEX, build_table, install_recursion
    from flatpt.recursive import (recursion_step, recursion_count, make_recursive_va, recursive_translate,
                                  recursive_va_for_node)
    from flatpt.workload import FragmentationPolicy, layout

BASE = 1 << 40


def recursive_table(scheme, install=True):
    maps = layout(footprint=64 << 20, frag=FragmentationPolicy(), seed=5)
    table = build_table(maps=maps, layout=LayoutPolicy(scheme=scheme))
    if install:
        install_recursion(table=table)
    return maps, table


class RecursionCountTests(unittest.TestCase):

    def test_conventional(self):
        _, table = recursive_table('[9,9,9,9]')
        self.assertEqual(recursion_step(table), 9)
        self.assertEqual(recursion_count(table=table, node=table.root_node), 4)
        leaf = table.path(BASE)[-1][0]
        self.assertEqual(leaf.size, PageSize.SIZE_4K)
        self.assertEqual(recursion_count(table=table, node=leaf), 1)

    def test_flattened(self):
        _, table = recursive_table('[18,18]')
        self.assertEqual(recursion_count(table=table, node=table.root_node), 3)
        leaf = table.path(BASE)[-1][0]
        self.assertEqual(recursion_count(table=table, node=leaf), 1)

    def test_without_overlap(self):
        _, table = recursive_table('[18,18]')
        self.assertEqual(recursion_step(table, overlap=False), 18)
        leaf = table.path(BASE)[-1][0]
        with self.assertRaisesRegex(RecursionLayoutError, "cannot be reached with 18 bit recursion steps"):
            recursion_count(table=table, node=leaf, overlap=False)

    def test_without_overlap_partial(self):
        # only the node indexed from bit 21 sits at a multiple of the 18 bit step
        _, table = recursive_table('[18,9,9]')
        root, middle, leaf = [node for node, _, _ in table.path(BASE)]
        self.assertEqual(recursion_count(table=table, node=root), 3)
        self.assertEqual(recursion_count(table=table, node=middle, overlap=False), 1)
        for node in (root, leaf):
            with self.assertRaises(RecursionLayoutError):
                recursion_count(table=table, node=node, overlap=False)

    def test_not_installed(self):
        _, table = recursive_table('[9,9,9,9]', install=False)
        with self.assertRaisesRegex(RecursionLayoutError, "No recursive entry"):
            recursion_count(table=table, node=table.root_node)


class RecursiveTranslateTests(unittest.TestCase):

    def check_every_node(self, scheme):
        _, table = recursive_table(scheme)
        for node in table:
            k, va = recursive_va_for_node(table=table, node=node)
            translation = recursive_translate(table=table, va=va)
            self.assertEqual(translation.frame, node.base, msg='node 0x%x, k=%i' % (node.base, k))
            self.assertEqual(translation.page_size, int(node.size))

    def test_conventional_reaches_every_node(self):
        self.check_every_node('[9,9,9,9]')

    def test_flattened_reaches_every_node(self):
        self.check_every_node('[18,18]')

    def test_l4_l3_flattened_reaches_every_node(self):
        self.check_every_node('[18,9,9]')

    def test_data_pages(self):
        maps, table = recursive_table('[18,18]')
        va = BASE + 0x7000
        self.assertEqual(recursive_translate(table=table, va=va), maps.lookup(va))
        self.assertIsNone(recursive_translate(table=table, va=BASE + (64 << 20)))

    def test_entry_address(self):
        # the recursive address of a leaf points at the entry used for the target
        _, table = recursive_table('[9,9,9,9]')
        va = BASE + 0x5123
        leaf, index, _ = table.path(va)[-1]
        rva = make_recursive_va(rec_index=REC_INDEX, k=1, target_va=va, table=table)
        translation = recursive_translate(table=table, va=rva)
        self.assertEqual(translation.address(rva), leaf.base + 8 * index)


class MakeRecursiveVATests(unittest.TestCase):

    def test_zero_recursions(self):
        _, table = recursive_table('[9,9,9,9]')
        self.assertEqual(make_recursive_va(rec_index=REC_INDEX, k=0, target_va=BASE, table=table), BASE)

    def test_canonical_high_half(self):
        _, table = recursive_table('[9,9,9,9]')
        va = make_recursive_va(rec_index=REC_INDEX, k=4, target_va=BASE, table=table)
        self.assertEqual(va >> 48, 0xFFFF)
        self.assertEqual(va, canonicalize(va))

    def test_wrong_index(self):
        _, table = recursive_table('[9,9,9,9]')
        with self.assertRaisesRegex(RecursionLayoutError, "installed at 510, not 3"):
            make_recursive_va(rec_index=3, k=1, target_va=BASE, table=table)

    def test_unreachable_count(self):
        _, table = recursive_table('[18,18]')
        with self.assertRaisesRegex(RecursionLayoutError, "No node on the walk"):
            make_recursive_va(rec_index=REC_INDEX, k=2, target_va=BASE, table=table)

    def test_too_many_recursions(self):
        _, table = recursive_table('[9,9,9,9]')
        with self.assertRaisesRegex(RecursionLayoutError, "exceed the 48 bit address"):
            make_recursive_va(rec_index=REC_INDEX, k=5, target_va=BASE, table=table)


if __name__ == '__main__':
    unittest.main()
