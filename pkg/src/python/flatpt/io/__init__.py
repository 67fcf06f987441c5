"""
subpackage with the on-disk formats: scenario configuration files, memory-reference traces, and mapping files
"""
