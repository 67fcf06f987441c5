"""
Text format of mapping sets: one mapping per line, ``<hex va> <hex pa> <4k|2m>``, with ``#`` comments.
A ``# va_bits: N`` comment sets the address width.
"""
import logging

from ..addressing import PageSize, VA_BITS
from ..pagetable import MappingSet
from .traces import TraceFormatError

logger = logging.getLogger(__name__)


def load_mappings(path, va_bits=None):
    """
    Read a MappingSet from a text file

    :raises: TraceFormatError naming the offending line
    """
    records = []
    file_va_bits = None
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                key, sep, value = line[1:].partition(':')
                if sep and key.strip() == 'va_bits':
                    try:
                        file_va_bits = int(value)
                    except ValueError:
                        raise TraceFormatError("invalid va_bits '%s'" % value.strip(), path, lineno)
                continue
            fields = line.split()
            if len(fields) != 3:
                raise TraceFormatError("expected '<hex va> <hex pa> <4k|2m>', found '%s'" % line, path, lineno)
            try:
                va = int(fields[0], 16)
                pa = int(fields[1], 16)
                size = PageSize.parse(fields[2])
            except ValueError as e:
                raise TraceFormatError(str(e), path, lineno)
            records.append((va, pa, int(size)))
    va_bits = va_bits or file_va_bits or VA_BITS
    try:
        return MappingSet.from_records(records, va_bits=va_bits)
    except ValueError as e:
        raise TraceFormatError(str(e), path)


def save_mappings(maps, path):
    with open(path, 'w') as f:
        f.write('# va_bits: %i\n' % maps.va_bits)
        for va, pa, size in maps:
            f.write('0x%x 0x%x %s\n' % (va, pa, PageSize(size).label))
