"""
Unit test module for scenarios, runs, comparisons, sweeps, and the acceptance matrix
"""
import unittest
import warnings
import os
import shutil

try:
    from flatpt.addressing import LevelScheme
    from flatpt.io.config import ConfigurationError, set_path, write_config
    from flatpt.runner import (Scenario, MetricsReport, run_scenario, compare, sweep, repro, parse_axis,
                               parse_setting, REPORT_FILES)
    from flatpt.workload import gen_sequential
except ImportError:
    # If we are running tests directly in the GitHub repo without installing the package
    import sys
    sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
    from flatpt.addressing import LevelScheme
    from flatpt.io.config import ConfigurationError, set_path, write_config
    from flatpt.runner import (Scenario, MetricsReport, run_scenario, compare, sweep, repro, parse_axis,
                               parse_setting, REPORT_FILES)
    from flatpt.workload import gen_sequential

NO_CACHES = {'tlb.enabled': False, 'pwc.enabled': False, 'vpwc.enabled': False, 'nested_tlb.enabled': False}
SMALL = {'workload.footprint': '64M', 'workload.refs': 200, 'seed': 1}


def make_scenario(*settings, **kwargs):
    """Scenario from dicts of dotted key paths"""
    config = {}
    for group in settings + (kwargs, ):
        for key, value in group.items():
            set_path(config, key, value)
    return Scenario(config=config)


class ScenarioTests(unittest.TestCase):

    def test_defaults(self):
        scenario = Scenario()
        self.assertEqual(scenario.label, 'run')
        self.assertEqual(scenario.scheme, LevelScheme(widths=[9, 9, 9, 9]))
        self.assertFalse(scenario.virtualized)
        self.assertIsNone(scenario.host_scheme)
        self.assertEqual(scenario.footprint, 256 << 20)
        self.assertEqual(scenario.warmup_refs, 0)
        self.assertFalse(scenario.prioritization)
        self.assertEqual(scenario['caches.L1D.assoc'], 8)

    def test_default_nf_threshold(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            scenario = Scenario()
        self.assertEqual(scenario.nf_threshold, 32)
        self.assertEqual(scenario['virtualization.host.nf_threshold'], 32)
        self.assertEqual([str(x.message) for x in w if 'nf_threshold' in str(x.message)], [])

    def test_unknown_key(self):
        with self.assertRaisesRegex(KeyError, "No configuration key 'layout.levels'"):
            Scenario()['layout.levels']

    def test_guest_scheme(self):
        scenario = make_scenario({'virtualization.enabled': True, 'virtualization.guest.scheme': '[18,18]',
                                  'virtualization.host.scheme': '[9,18,9]'})
        self.assertEqual(str(scenario.scheme), '[18,18]')
        self.assertEqual(str(scenario.host_scheme), '[9,18,9]')

    def test_with_overrides(self):
        scenario = Scenario()
        flat = scenario.with_overrides({'layout.scheme': '[18,18]', 'label': 'flat'})
        self.assertEqual(str(flat.scheme), '[18,18]')
        self.assertEqual(flat.label, 'flat')
        self.assertEqual(str(scenario.scheme), '[9,9,9,9]')

    def test_from_file(self):
        path = 'test_runner.yaml'
        try:
            write_config({'layout': {'scheme': '[18,18]'}, 'workload': {'footprint': '1G'}}, path)
            scenario = Scenario.from_file(path, overrides={'seed': 5})
            self.assertEqual(str(scenario.scheme), '[18,18]')
            self.assertEqual(scenario.seed, 5)
            self.assertEqual(scenario.footprint, 1 << 30)
        finally:
            if os.path.exists(path):
                os.remove(path)

    def test_invalid_scheme(self):
        with self.assertRaisesRegex(ConfigurationError, "Invalid level widths"):
            make_scenario({'layout.scheme': '[10,9,9,9]'})

    def test_invalid_settings(self):
        invalid = [({'workload.generator': 'zipf'}, "Unknown generator 'zipf'"),
                   ({'workload.refs': 10, 'warmup_refs': 10}, "must be smaller than workload.refs"),
                   ({'workload.trace': 'missing.trace'}, "Trace file missing.trace does not exist"),
                   ({'workload.mappings': 'missing.map'}, "Mapping file missing.map does not exist"),
                   ({'virtualization.enabled': True, 'virtualization.host.scheme': None}, "needs a host layout"),
                   ({'pwc.assignment': 'deepest'}, "pwc.assignment must be one of"),
                   ({'prioritization.probability': 1.5}, "prioritization.probability must be in"),
                   ({'allocator.failure_rate.2M': 2.0}, "allocator.failure_rate.2M must be in"),
                   ({'fragmentation.large_page_fraction': 0.5, 'workload.footprint': '3M'}, "not 2 MB aligned"),
                   ({'caches.L2.size': '1000'}, "Invalid scenario"),
                   ({'workload.footprint': 'lots'}, "Invalid size 'lots'")]
        for settings, message in invalid:
            with self.assertRaisesRegex(ConfigurationError, message, msg=str(settings)):
                make_scenario(settings)

    def test_missing_section(self):
        with self.assertRaisesRegex(ConfigurationError, "Missing configuration section 'tlb'"):
            Scenario(config={'tlb': None})


class RunScenarioTests(unittest.TestCase):

    def test_cold_native_walks(self):
        for scheme, count in (('[9,9,9,9]', 4.0), ('[18,18]', 2.0), ('[9,18,9]', 3.0)):
            report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'layout.scheme': scheme}))
            self.assertEqual(report['walks.mean_accesses'], count, msg=scheme)
            self.assertEqual(report['walks.max_accesses'], count, msg=scheme)
            self.assertEqual(report['walks.walks'], 200)
            self.assertEqual(report['walks.unmapped'], 0)

    def test_cold_virtualized_walks(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'virtualization.enabled': True}))
        self.assertEqual(report['walks.mean_accesses'], 24.0)
        self.assertEqual(report['walks.host_walks_per_walk'], 5.0)
        self.assertEqual(report.run['host_scheme'], '[9,9,9,9]')
        self.assertTrue(report.run['virtualized'])

    def test_census(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'layout.scheme': '[18,18]'}))
        self.assertEqual(report['census.nodes_2m'], 2)
        self.assertEqual(report['census.nodes_4k'], 0)
        self.assertEqual(report['census.mappings_4k'], 16384)

    def test_large_pages_in_nf_regions(self):
        large = {'layout.scheme': '[18,18]', 'fragmentation.large_page_fraction': 1.0}
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, large))
        self.assertEqual(report['census.mappings_2m'], 32)
        self.assertEqual(report['census.replicated_entries'], 0)
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, large, {'layout.nf_threshold': None}))
        self.assertEqual(report['census.replicated_entries'], 32 * 512)

    def test_gate_stays_on_under_uniform_references(self):
        report = run_scenario(cfg=make_scenario({'workload.generator': 'uniform', 'workload.footprint': '256M',
                                                 'workload.refs': 20000, 'seed': 1, 'prioritization.enabled': True,
                                                 'prioritization.window': 1000}))
        self.assertGreaterEqual(report['walks.prioritized_fraction'], 0.9)
        report = run_scenario(cfg=make_scenario({'workload.generator': 'sequential', 'workload.footprint': '64M',
                                                 'workload.refs': 20000, 'seed': 1, 'prioritization.enabled': True,
                                                 'prioritization.window': 1000}))
        self.assertEqual(report['walks.prioritized_fraction'], 0.0)

    def test_translation_caches(self):
        report = run_scenario(cfg=make_scenario(SMALL))
        self.assertLess(report['walks.mean_accesses'], 4.0)
        self.assertGreater(report['pwc.hit_rate'], 0.0)
        self.assertGreater(report['tlb.lookups'], 0)

    def test_deterministic(self):
        scenario = make_scenario(SMALL, {'layout.scheme': '[18,18]', 'prioritization.enabled': True})
        self.assertEqual(run_scenario(cfg=scenario).to_json(), run_scenario(cfg=scenario).to_json())

    def test_warmup(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'warmup_refs': 50}))
        self.assertEqual(report['walks.references'], 150)
        self.assertEqual(report.workload['warmup_refs'], 50)
        self.assertEqual(report.workload['references'], 200)

    def test_given_trace(self):
        trace = gen_sequential(footprint=64 << 20, stride=4096, n=100)
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL), trace=trace)
        self.assertEqual(report['walks.references'], 100)
        self.assertEqual(report.run['generator'], 'sequential')

    def test_warmup_longer_than_trace(self):
        trace = gen_sequential(footprint=64 << 20, stride=4096, n=10)
        with self.assertRaisesRegex(ConfigurationError, "warmup_refs \\(50\\) must be smaller than the 10"):
            run_scenario(cfg=make_scenario(SMALL, {'warmup_refs': 50}), trace=trace)

    def test_unknown_metric(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL))
        with self.assertRaisesRegex(KeyError, "No metric walks.speed in report run"):
            report['walks.speed']


class MetricsReportTests(unittest.TestCase):

    def setUp(self):
        self.out_dir = 'test_runner_out'

    def tearDown(self):
        if os.path.exists(self.out_dir):
            shutil.rmtree(self.out_dir)

    def test_write_and_read(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'conv'}))
        report.write(self.out_dir)
        for name in REPORT_FILES:
            self.assertTrue(os.path.exists(os.path.join(self.out_dir, name)))
        loaded = MetricsReport.from_json(os.path.join(self.out_dir, 'report.json'))
        self.assertEqual(loaded.label, 'conv')
        self.assertEqual({k: dict(v) for k, v in loaded.metrics.items()},
                         {k: dict(v) for k, v in report.metrics.items()})
        self.assertEqual(dict(loaded.workload), dict(report.workload))
        self.assertEqual(len(loaded.counters), len(report.counters))

    def test_text(self):
        report = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'conv'}))
        text = report.to_text()
        self.assertTrue(text.startswith('label          conv\n'))
        self.assertIn('[walks]', text)
        self.assertIn('mean_accesses', text)

    def test_from_dict_invalid(self):
        with self.assertRaisesRegex(ValueError, "missing 'metrics'"):
            MetricsReport.from_dict({'run': {}, 'workload': {}})


class CompareTests(unittest.TestCase):

    def test_deltas(self):
        base = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'conv'}))
        flat = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'flat', 'layout.scheme': '[18,18]'}))
        res = compare(baseline=base, variants=[flat, flat])
        self.assertEqual(res.baseline_label, 'conv')
        self.assertEqual(res.get_delta('flat', 'walks', 'mean_accesses'), -0.5)
        self.assertEqual(res.get_delta('flat#2', 'walks', 'mean_accesses'), -0.5)
        self.assertEqual(res.get_delta('flat', 'walks', 'walks'), 0.0)

    def test_compare_emits_no_warnings(self):
        base = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'conv'}))
        flat = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'label': 'flat', 'layout.scheme': '[18,18]'}))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            compare(baseline=base, variants=[flat])
        self.assertEqual([str(w.message) for w in caught if issubclass(w.category, UserWarning)], [])

    def test_different_workload(self):
        base = run_scenario(cfg=make_scenario(NO_CACHES, SMALL))
        other = run_scenario(cfg=make_scenario(NO_CACHES, SMALL, {'seed': 2}))
        with self.assertRaisesRegex(ValueError, "replayed a different workload"):
            compare(baseline=base, variants=[other])


class SweepTests(unittest.TestCase):

    def test_sweep(self):
        scenario = make_scenario(NO_CACHES, SMALL, {'label': 'cold'})
        table, reports = sweep(scenario=scenario, axes={'layout.scheme': ['[9,9,9,9]', '[18,18]']})
        self.assertEqual(table.metric('walks', 'mean_accesses'), [4.0, 2.0])
        self.assertEqual([r.label for r in reports], ['cold[scheme=[9,9,9,9]]', 'cold[scheme=[18,18]]'])
        self.assertEqual(list(table.to_flat_dataframe()['label']), [r.label for r in reports])

    def test_product(self):
        scenario = make_scenario(NO_CACHES, SMALL)
        table, reports = sweep(scenario=scenario, axes={'layout.scheme': ['[9,9,9,9]', '[18,18]'],
                                                        'prioritization.enabled': [False, True]})
        self.assertEqual(len(table), 4)
        self.assertEqual([r.run['prioritization'] for r in reports], [False, True, False, True])

    def test_invalid_jobs(self):
        with self.assertRaisesRegex(ConfigurationError, "jobs must be at least 1"):
            sweep(scenario=Scenario(), axes={}, jobs=0)

    def test_invalid_combination(self):
        with self.assertRaises(ConfigurationError):
            sweep(scenario=make_scenario(NO_CACHES, SMALL), axes={'layout.scheme': ['[18,18]', '[10,9]']})


class ParseTests(unittest.TestCase):

    def test_parse_axis(self):
        self.assertEqual(parse_axis('pwc.L3=4,8,16'), ('pwc.L3', [4, 8, 16]))
        self.assertEqual(parse_axis('layout.scheme=[9,9,9,9],[18,18]'),
                         ('layout.scheme', [[9, 9, 9, 9], [18, 18]]))
        self.assertEqual(parse_axis(' prioritization.enabled = false,true'),
                         ('prioritization.enabled', [False, True]))
        with self.assertRaisesRegex(ConfigurationError, "Invalid sweep axis 'pwc.L3'"):
            parse_axis('pwc.L3')

    def test_parse_setting(self):
        self.assertEqual(parse_setting('tlb.enabled=false'), ('tlb.enabled', False))
        self.assertEqual(parse_setting('layout.scheme=[18,18]'), ('layout.scheme', [18, 18]))
        self.assertEqual(parse_setting('workload.footprint=8G'), ('workload.footprint', '8G'))
        with self.assertRaisesRegex(ConfigurationError, "Invalid setting '=1'"):
            parse_setting('=1')


class ReproTests(unittest.TestCase):

    def test_desk_scale_checks(self):
        results = repro(checks=[1, 2, 6, 7])
        self.assertEqual([r.number for r in results], [1, 2, 6, 7])
        for r in results:
            self.assertTrue(r.passed, msg=str(r))

    def test_unknown_check(self):
        with self.assertRaisesRegex(ConfigurationError, "Unknown acceptance checks \\[11\\]"):
            repro(checks=[11])


if __name__ == '__main__':
    unittest.main()
