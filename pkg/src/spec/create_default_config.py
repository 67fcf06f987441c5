from collections import OrderedDict
import os

from ruamel.yaml import YAML


def main():
    # machine configuration of the evaluation, plus a small default workload
    config = OrderedDict([
        ('label', 'run'),
        ('seed', 0),
        ('warmup_refs', 0),
        ('workload', OrderedDict([('generator', 'uniform'),
                                  ('footprint', '256M'),
                                  ('refs', 100000),
                                  ('stride', 64),
                                  ('trace', None),
                                  ('mappings', None),
                                  ('va_base', 0x10000000000)])),
        ('fragmentation', OrderedDict([('large_page_fraction', 0.0)])),
        ('layout', OrderedDict([('scheme', '[9,9,9,9]'),
                                ('nf_threshold', 32)])),
        ('virtualization', OrderedDict([('enabled', False),
                                        ('guest', OrderedDict([('scheme', None), ('nf_threshold', 32)])),
                                        ('host', OrderedDict([('scheme', '[9,9,9,9]'), ('nf_threshold', 32)])),
                                        ('host_large_page_fraction', 0.0)])),
        ('allocator', OrderedDict([('failure_rate', OrderedDict([('2M', 0.0), ('1G', 0.0)]))])),
        ('tlb', OrderedDict([('enabled', True),
                             ('l1_4k', OrderedDict([('entries', 64), ('assoc', 4), ('latency', 1)])),
                             ('l1_2m', OrderedDict([('entries', 32), ('assoc', 4), ('latency', 1)])),
                             ('l2', OrderedDict([('entries', 1536), ('assoc', 12), ('latency', 9)]))])),
        ('pwc', OrderedDict([('enabled', True), ('assignment', 'leaf'), ('latency', 1),
                             ('L2', 24), ('L3', 4), ('L4', 4), ('L5', 4)])),
        ('vpwc', OrderedDict([('enabled', True), ('assignment', 'leaf'), ('latency', 1),
                              ('L2', 24), ('L3', 4), ('L4', 4), ('L5', 4)])),
        ('nested_tlb', OrderedDict([('enabled', True), ('entries', 16), ('latency', 1), ('data_pages', True)])),
        ('caches', OrderedDict([('line_size', 64),
                                ('L1D', OrderedDict([('size', '32K'), ('assoc', 8), ('latency', 4)])),
                                ('L2', OrderedDict([('size', '256K'), ('assoc', 8), ('latency', 12)])),
                                ('L3', OrderedDict([('size', '16M'), ('assoc', 8), ('latency', 42)]))])),
        ('dram_latency', 170),
        ('prioritization', OrderedDict([('enabled', False), ('window', 10000), ('threshold', 0.05),
                                        ('probability', 0.99)])),
        ('energy', OrderedDict([('L1D', 1.0), ('L2', 2.0), ('L3', 10.0), ('DRAM', 100.0)])),
    ])

    yaml = YAML()
    yaml.default_flow_style = False
    yaml.representer.add_representer(OrderedDict, lambda r, d: r.represent_mapping('tag:yaml.org,2002:map',
                                                                                   d.items()))
    output_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..', 'spec'))
    with open(os.path.join(output_dir, 'flatpt.defaults.yaml'), 'w') as f:
        yaml.dump(config, f)


if __name__ == "__main__":
    # usage: python create_default_config.py
    main()
