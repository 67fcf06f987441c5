"""
Text format of memory-reference traces.

One reference per line, ``R`` or ``W`` followed by the hexadecimal virtual address. Blank lines are
skipped; lines starting with ``#`` are comments, and comments of the form ``# key: value`` before the
first reference hold the trace metadata::

    # generator: uniform
    # footprint: 8589934592
    # seed: 1
    # va_base: 0x10000000000
    R 0x10000d2c4b8
    W 0x1000004c1c0
"""
import logging
from collections import OrderedDict

import numpy as np

logger = logging.getLogger(__name__)

#: Metadata keys written to and read from trace headers, with their value parsers
TRACE_METADATA = OrderedDict([('generator', str),
                              ('footprint', lambda v: int(v, 0)),
                              ('seed', lambda v: None if v == 'None' else int(v, 0)),
                              ('va_base', lambda v: int(v, 0))])


class TraceFormatError(ValueError):
    """Raised when a trace or mapping file cannot be parsed. ``lineno`` is the 1-based line of the error"""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        if lineno is not None:
            message = "%s, line %i: %s" % (path if path is not None else '<trace>', lineno, message)
        super().__init__(message)


def read_trace_file(path):
    """
    Parse a trace file

    :returns: tuple of (numpy uint64 array of addresses, numpy bool array of write flags, dict of metadata)
    :raises: TraceFormatError naming the offending line
    """
    addresses = []
    writes = []
    metadata = dict()
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                key, sep, value = line[1:].partition(':')
                key = key.strip()
                if sep and not addresses and key in TRACE_METADATA:
                    try:
                        metadata[key] = TRACE_METADATA[key](value.strip())
                    except ValueError:
                        raise TraceFormatError("invalid value '%s' for %s" % (value.strip(), key), path, lineno)
                continue
            fields = line.split()
            if len(fields) != 2 or fields[0].upper() not in ('R', 'W'):
                raise TraceFormatError("expected 'R|W <hex address>', found '%s'" % line, path, lineno)
            try:
                va = int(fields[1], 16)
            except ValueError:
                raise TraceFormatError("invalid address '%s'" % fields[1], path, lineno)
            if va < 0 or va >> 64:
                raise TraceFormatError("address '%s' does not fit in 64 bits" % fields[1], path, lineno)
            addresses.append(va)
            writes.append(fields[0].upper() == 'W')
    logger.debug("Read %i references from %s", len(addresses), path)
    return np.array(addresses, dtype=np.uint64), np.array(writes, dtype=bool), metadata


def write_trace_file(path, addresses, writes, metadata=None):
    with open(path, 'w') as f:
        for key, value in (metadata or {}).items():
            if key == 'va_base':
                f.write('# %s: 0x%x\n' % (key, value))
            else:
                f.write('# %s: %s\n' % (key, value))
        for va, write in zip(addresses, writes):
            f.write('%s 0x%x\n' % ('W' if write else 'R', int(va)))
