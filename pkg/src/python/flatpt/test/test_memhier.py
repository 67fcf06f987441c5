"""
Unit test module for the cache hierarchy, the pressure gate, and the energy ledger
"""
import unittest
import os
import math
from collections import OrderedDict

try:
    from flatpt.memhier import (CacheLevel, MemoryHierarchy, PressureGate, ReplacementMode, EnergyLedger,
                                select_victim, relative_delta, energy_report, DATA, PTE)
except ImportError:
    # If we are running tests directly in the GitHub repo without installing the package
    import sys
    sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
    from flatpt.memhier import (CacheLevel, MemoryHierarchy, PressureGate, ReplacementMode, EnergyLedger,
                                select_victim, relative_delta, energy_report, DATA, PTE)


class FixedDraws:
    """Replacement draws that always return the same value"""

    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def one_set_hierarchy(gate=None, probability=1.0):
    levels = [CacheLevel(name='L1D', size=128, assoc=2, latency=4),
              CacheLevel(name='L2', size=128, assoc=2, latency=12, prioritizable=True)]
    return MemoryHierarchy(levels=levels, dram_latency=100, gate=gate, probability=probability)


class CacheLevelTests(unittest.TestCase):

    def test_invalid_geometry(self):
        with self.assertRaisesRegex(ValueError, "is not a multiple of 8-way sets"):
            CacheLevel(name='L2', size=1000, assoc=8, latency=12)
        with self.assertRaisesRegex(ValueError, "power of two"):
            CacheLevel(name='L2', size=4096, assoc=8, latency=12, line_size=48)

    def test_lru(self):
        level = CacheLevel(name='L1D', size=128, assoc=2, latency=4)
        self.assertEqual(level.num_sets, 1)
        level.fill(1, DATA, 0, ReplacementMode.NORMAL, FixedDraws(0.0))
        level.fill(2, DATA, 0, ReplacementMode.NORMAL, FixedDraws(0.0))
        self.assertTrue(level.lookup(1, DATA))
        self.assertEqual(level.fill(3, DATA, 0, ReplacementMode.NORMAL, FixedDraws(0.0)), 2)
        self.assertIn(1, level)
        self.assertNotIn(2, level)
        self.assertEqual(level.evictions, [1, 0])
        self.assertEqual(level.lines(DATA), 2)

    def test_counters_by_kind(self):
        level = CacheLevel(name='L1D', size=128, assoc=2, latency=4)
        level.lookup(1, PTE)
        level.fill(1, PTE, 0, ReplacementMode.NORMAL, FixedDraws(0.0))
        level.lookup(1, PTE)
        level.lookup(2, DATA)
        self.assertEqual(level.lookups, [1, 2])
        self.assertEqual(level.hits, [0, 1])
        self.assertEqual(level.misses, [1, 1])


class SelectVictimTests(unittest.TestCase):

    def setUp(self):
        self.cache_set = OrderedDict([(10, (PTE, 0)), (11, (DATA, 1)), (12, (DATA, 0)), (13, (PTE, 0))])

    def test_normal_is_lru(self):
        self.assertEqual(select_victim(self.cache_set, ReplacementMode.NORMAL, FixedDraws(0.0)), 10)

    def test_prioritize_prefers_data_of_context(self):
        self.assertEqual(select_victim(self.cache_set, ReplacementMode.PRIORITIZE, FixedDraws(0.0), ctx=0), 12)
        self.assertEqual(select_victim(self.cache_set, ReplacementMode.PRIORITIZE, FixedDraws(0.0), ctx=1), 11)

    def test_prioritize_draw_above_probability(self):
        self.assertEqual(select_victim(self.cache_set, ReplacementMode.PRIORITIZE, FixedDraws(0.995)), 10)

    def test_prioritize_without_data_lines(self):
        cache_set = OrderedDict([(10, (PTE, 0)), (13, (PTE, 0))])
        self.assertEqual(select_victim(cache_set, ReplacementMode.PRIORITIZE, FixedDraws(0.0)), 10)


class PressureGateTests(unittest.TestCase):

    def test_window(self):
        gate = PressureGate(window=4, threshold=0.25)
        for miss in (True, False, True):
            self.assertIs(gate.update_pressure(miss), ReplacementMode.NORMAL)
        self.assertIs(gate.update_pressure(False), ReplacementMode.PRIORITIZE)
        for _ in range(4):
            gate.update_pressure(False)
        self.assertIs(gate.mode, ReplacementMode.NORMAL)
        self.assertEqual(gate.windows, 2)
        self.assertEqual(gate.prioritized_fraction, 0.5)

    def test_threshold_is_strict(self):
        gate = PressureGate(window=4, threshold=0.25)
        for miss in (True, False, False, False):
            gate.update_pressure(miss)
        self.assertIs(gate.mode, ReplacementMode.NORMAL)

    def test_disabled(self):
        gate = PressureGate(window=1, threshold=0.0, enabled=False)
        gate.update_pressure(True)
        self.assertIs(gate.mode, ReplacementMode.NORMAL)
        self.assertEqual(gate.prioritized_fraction, 0.0)

    def test_reset_counters_keeps_mode(self):
        gate = PressureGate(window=1, threshold=0.0)
        gate.update_pressure(True)
        gate.reset_counters()
        self.assertEqual(gate.windows, 0)
        self.assertIs(gate.mode, ReplacementMode.PRIORITIZE)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            PressureGate(window=0)
        with self.assertRaises(ValueError):
            PressureGate(threshold=-0.1)


class MemoryHierarchyTests(unittest.TestCase):

    def test_latencies(self):
        mem = one_set_hierarchy()
        self.assertEqual(mem.access(0x1000, DATA), (112, 'DRAM'))
        self.assertEqual(mem.access(0x1008, DATA), (4, 'L1D'))
        self.assertEqual(mem.dram, [1, 0])
        self.assertEqual(mem.names, ('L1D', 'L2', 'DRAM'))

    def test_inclusion(self):
        mem = one_set_hierarchy()
        a, b, c = 0x0, 0x40, 0x80
        mem.access(a, DATA)
        mem.access(b, DATA)
        mem.access(a, DATA)
        mem.access(c, DATA)
        # a is the least recently used line of L2, so its eviction removes it from L1D as well
        self.assertNotIn(a >> 6, mem['L2'])
        self.assertNotIn(a >> 6, mem['L1D'])
        self.assertIn(b >> 6, mem['L1D'])
        self.assertEqual(mem.access(b, DATA), (4, 'L1D'))

    def test_prioritized_level_keeps_page_table_lines(self):
        gate = PressureGate(window=1, threshold=0.0)
        gate.update_pressure(True)
        mem = one_set_hierarchy(gate=gate)
        mem.access(0x0, PTE)
        mem.access(0x40, DATA)
        mem.access(0x80, DATA)
        self.assertIn(0, mem['L2'])
        self.assertNotIn(1, mem['L2'])
        self.assertNotIn(1, mem['L1D'])

    def test_normal_mode_evicts_page_table_lines(self):
        mem = one_set_hierarchy()
        mem.access(0x0, PTE)
        mem.access(0x40, DATA)
        mem.access(0x80, DATA)
        self.assertNotIn(0, mem['L2'])

    def test_counters(self):
        mem = one_set_hierarchy()
        mem.access(0x0, PTE)
        mem.access(0x0, PTE)
        df = mem.counters()
        self.assertEqual(list(df.columns), ['level', 'kind', 'lookups', 'hits', 'misses', 'evictions'])
        self.assertEqual(len(df), 6)
        row = df[(df['level'] == 'L1D') & (df['kind'] == 'pte')].iloc[0]
        self.assertEqual((row['lookups'], row['hits'], row['misses']), (2, 1, 1))
        row = df[(df['level'] == 'DRAM') & (df['kind'] == 'pte')].iloc[0]
        self.assertEqual(row['lookups'], 1)
        mem.reset_counters()
        self.assertEqual(mem.counters()['lookups'].sum(), 0)

    def test_unknown_level(self):
        with self.assertRaises(KeyError):
            one_set_hierarchy()['L3']

    def test_l1d_sized_working_set_hits(self):
        mem = MemoryHierarchy.from_config(OrderedDict([('L1D', {'size': 32 << 10, 'assoc': 8, 'latency': 4}),
                                                       ('L2', {'size': 256 << 10, 'assoc': 8, 'latency': 12})]))
        for addr in range(0, 32 << 10, 8):
            mem.access(addr, DATA)
        mem.reset_counters()
        for _ in range(3):
            for addr in range(0, 32 << 10, 8):
                self.assertEqual(mem.access(addr, DATA), (4, 'L1D'))
        self.assertEqual(mem['L1D'].misses, [0, 0])
        self.assertEqual(mem.dram, [0, 0])

    def test_mixed_line_sizes(self):
        levels = [CacheLevel(name='L1D', size=128, assoc=2, latency=4),
                  CacheLevel(name='L2', size=256, assoc=2, latency=12, line_size=128)]
        with self.assertRaisesRegex(ValueError, "same line size"):
            MemoryHierarchy(levels=levels)


class EnergyTests(unittest.TestCase):

    def test_ledger(self):
        ledger = EnergyLedger(accesses={'L1D': [10, 5], 'DRAM': [1, 1]})
        self.assertEqual(ledger.cache_energy, 15.0)
        self.assertEqual(ledger.dram_energy, 200.0)
        res = ledger.to_dict()
        self.assertEqual(res['L1D_pte'], 5)
        self.assertEqual(res['total_energy'], 215.0)

    def test_from_hierarchy(self):
        mem = one_set_hierarchy()
        mem.access(0x0, DATA)
        ledger = EnergyLedger.from_hierarchy(mem, coefficients={'L1D': 1, 'L2': 2, 'DRAM': 100})
        self.assertEqual(ledger.accesses, OrderedDict([('L1D', [1, 0]), ('L2', [1, 0]), ('DRAM', [1, 0])]))
        self.assertEqual(ledger.to_dict()['total_energy'], 103.0)

    def test_missing_coefficient(self):
        with self.assertRaisesRegex(KeyError, "No energy coefficients"):
            EnergyLedger(accesses={'L4': [1, 1]})

    def test_energy_report(self):
        base = EnergyLedger(accesses={'L1D': [10, 10], 'DRAM': [2, 2]})
        variant = EnergyLedger(accesses={'L1D': [10, 5], 'DRAM': [1, 1]})
        res = energy_report(ledger=variant, baseline_ledger=base)
        self.assertAlmostEqual(res['cache'], -0.25)
        self.assertAlmostEqual(res['dram'], -0.5)
        self.assertAlmostEqual(res['total'], (215.0 - 420.0) / 420.0)
        other = EnergyLedger(accesses={'L1D': [1, 1]}, coefficients={'L1D': 2.0})
        with self.assertRaisesRegex(ValueError, "Energy coefficients differ"):
            energy_report(ledger=other, baseline_ledger=base)

    def test_relative_delta(self):
        self.assertEqual(relative_delta(1, 2), -0.5)
        self.assertEqual(relative_delta(0, 0), 0.0)
        self.assertEqual(relative_delta(3, 0), math.inf)
        self.assertEqual(relative_delta(-3, 0), -math.inf)


if __name__ == '__main__':
    unittest.main()
