"""
Address arithmetic for radix page tables with arbitrary level schemes.

A level scheme lists the index width of every level of a page table, root first. The conventional
x86-64 table is ``[9, 9, 9, 9]`` with a 12 bit page offset. Flattening two adjacent levels merges
their index fields into a single 18 bit field, e.g., ``[18, 18]``.
"""
import logging
from enum import IntEnum

from hdmf.utils import docval, getargs

logger = logging.getLogger(__name__)

#: Bytes per page-table entry
ENTRY_BYTES = 8
#: log2(ENTRY_BYTES)
ENTRY_SHIFT = 3
#: Index width of a conventional 4 kB page-table node
FIELD_BITS = 9
#: Index widths a page-table level may use (4 kB, 2 MB, and 1 GB nodes)
VALID_WIDTHS = (9, 18, 27)
#: Maximum number of levels of a scheme (five-level paging)
MAX_LEVELS = 5
#: Default page offset width
OFFSET_BITS = 12
#: Default number of translated virtual address bits
VA_BITS = 48


class NonCanonicalAddressError(ValueError):
    """Raised when a virtual address is not sign-extended above the translated bits"""
    pass


class PageSize(IntEnum):
    """
    Sizes of pages and page-table nodes.

    The same two bit encoding is used for the size of the node an entry points to, for the size of
    the page a terminal entry maps, and for the root register.
    """
    SIZE_4K = 1 << 12
    SIZE_2M = 1 << 21
    SIZE_1G = 1 << 30

    @property
    def shift(self):
        """log2 of the size in bytes"""
        return int(self.value).bit_length() - 1

    @property
    def width(self):
        """Index width of a page-table node of this size"""
        return self.shift - ENTRY_SHIFT

    @property
    def entries(self):
        """Number of entries of a page-table node of this size"""
        return 1 << self.width

    @property
    def code(self):
        """Two bit encoding of the size"""
        return _SIZE_ORDER.index(self)

    @property
    def label(self):
        return _SIZE_LABELS[self.code]

    @classmethod
    def from_code(cls, code):
        return _SIZE_ORDER[code]

    @classmethod
    def from_shift(cls, shift):
        try:
            return cls(1 << shift)
        except ValueError:
            raise ValueError("No page size with shift %i" % shift)

    @classmethod
    def from_width(cls, width):
        """Get the node size whose index width is ``width``"""
        return cls.from_shift(width + ENTRY_SHIFT)

    @classmethod
    def parse(cls, text):
        """Parse a size label such as ``4k``, ``2M`` or ``1g``"""
        key = str(text).strip().lower()
        if key not in _SIZE_LABELS:
            raise ValueError("Unknown page size '%s', expected one of %s" % (text, ', '.join(_SIZE_LABELS)))
        return _SIZE_ORDER[_SIZE_LABELS.index(key)]


_SIZE_ORDER = (PageSize.SIZE_4K, PageSize.SIZE_2M, PageSize.SIZE_1G)
_SIZE_LABELS = ('4k', '2m', '1g')


def va_mask(va_bits):
    """Mask selecting the translated bits of a virtual address"""
    return (1 << va_bits) - 1


def is_canonical(va, va_bits=VA_BITS):
    """Check that the bits of ``va`` above ``va_bits`` sign-extend bit ``va_bits - 1``"""
    if va < 0 or va >> 64:
        return False
    top = va >> (va_bits - 1)
    return top == 0 or top == (1 << (65 - va_bits)) - 1


def canonicalize(value, va_bits=VA_BITS):
    """Sign-extend the low ``va_bits`` bits of ``value`` to a 64 bit canonical address"""
    value &= va_mask(va_bits)
    if value >> (va_bits - 1):
        value |= ((1 << 64) - 1) ^ va_mask(va_bits)
    return value


def strip(va, va_bits=VA_BITS):
    """
    Get the translated bits of a canonical virtual address

    :raises: NonCanonicalAddressError if va is not canonical
    """
    if not is_canonical(va, va_bits):
        raise NonCanonicalAddressError("Address 0x%x is not canonical for %i bit virtual addresses" % (va, va_bits))
    return va & va_mask(va_bits)


class LevelScheme:
    """
    Shape of a radix page table: index width of each level (root first), page offset width, and
    the number of translated virtual address bits.
    """

    @docval({'name': 'widths', 'type': 'array_data', 'doc': 'per-level index widths in bits, root first'},
            {'name': 'offset_bits', 'type': int, 'doc': 'page-offset width of the leaf pages', 'default': OFFSET_BITS},
            {'name': 'va_bits', 'type': int, 'doc': 'total translated bits. Derived from the widths if omitted',
             'default': None})
    def __init__(self, **kwargs):
        widths, offset_bits, va_bits = getargs('widths', 'offset_bits', 'va_bits', kwargs)
        widths = tuple(int(w) for w in widths)
        if len(widths) == 0 or len(widths) > MAX_LEVELS:
            raise ValueError("A level scheme needs between 1 and %i levels, got %i" % (MAX_LEVELS, len(widths)))
        bad = [w for w in widths if w not in VALID_WIDTHS]
        if bad:
            raise ValueError("Invalid level widths %s, each width must be one of %s" % (bad, VALID_WIDTHS))
        total = sum(widths) + offset_bits
        if va_bits is None:
            va_bits = total
        elif va_bits != total:
            raise ValueError("Level widths %s plus %i offset bits translate %i bits, expected %i" %
                             (list(widths), offset_bits, total, va_bits))
        if va_bits > 64:
            raise ValueError("Cannot translate more than 64 bits, got %i" % va_bits)
        self.__widths = widths
        self.__offset_bits = offset_bits
        self.__va_bits = va_bits
        # shifts[i] is the position of the lowest bit of level i's index field
        shifts = []
        hi = va_bits
        for w in widths:
            hi -= w
            shifts.append(hi)
        self.__shifts = tuple(shifts)

    @classmethod
    def parse(cls, text):
        """Create a scheme from text such as ``"9,9,9,9"``, ``"[18, 18]"`` or a list of widths"""
        if isinstance(text, LevelScheme):
            return text
        if isinstance(text, str):
            fields = text.strip().strip('[]').replace('+', ',').replace('-', ',').split(',')
            try:
                widths = [int(f) for f in fields if f.strip()]
            except ValueError:
                raise ValueError("Cannot parse level scheme '%s'" % text)
        else:
            widths = list(text)
        return cls(widths=widths)

    @property
    def widths(self):
        return self.__widths

    @property
    def offset_bits(self):
        return self.__offset_bits

    @property
    def va_bits(self):
        return self.__va_bits

    @property
    def levels(self):
        return len(self.__widths)

    @property
    def shifts(self):
        """Lowest bit position of each level's index field"""
        return self.__shifts

    @property
    def is_flattened(self):
        return any(w != FIELD_BITS for w in self.__widths)

    def prefix_bits(self, depth):
        """Number of index bits consumed after ``depth`` levels"""
        return sum(self.__widths[:depth])

    def __eq__(self, other):
        return (isinstance(other, LevelScheme) and self.widths == other.widths and
                self.offset_bits == other.offset_bits and self.va_bits == other.va_bits)

    def __hash__(self):
        return hash((self.__widths, self.__offset_bits, self.__va_bits))

    def __repr__(self):
        return 'LevelScheme(%s)' % list(self.__widths)

    def __str__(self):
        return '[%s]' % ','.join(str(w) for w in self.__widths)


@docval({'name': 'va', 'type': int, 'doc': 'canonical virtual address'},
        {'name': 'scheme', 'type': LevelScheme, 'doc': 'the level scheme to decode the address with'},
        returns='tuple of (list of per-level indices, page offset)', rtype=tuple, is_method=False)
def decompose(**kwargs):
    """
    Split a virtual address into its per-level indices and page offset

    :raises: NonCanonicalAddressError if the address is not canonical
    """
    va, scheme = getargs('va', 'scheme', kwargs)
    low = strip(va, scheme.va_bits)
    indices = [(low >> shift) & ((1 << w) - 1) for w, shift in zip(scheme.widths, scheme.shifts)]
    return indices, low & ((1 << scheme.offset_bits) - 1)


@docval({'name': 'indices', 'type': 'array_data', 'doc': 'per-level indices, root first'},
        {'name': 'offset', 'type': int, 'doc': 'page offset'},
        {'name': 'scheme', 'type': LevelScheme, 'doc': 'the level scheme to encode the address with'},
        returns='canonical virtual address', rtype=int, is_method=False)
def compose(**kwargs):
    """
    Build a canonical virtual address from per-level indices and a page offset

    :raises: IndexError if an index or the offset does not fit its field
    """
    indices, offset, scheme = getargs('indices', 'offset', 'scheme', kwargs)
    if len(indices) != scheme.levels:
        raise ValueError("Expected %i indices for scheme %s, got %i" % (scheme.levels, scheme, len(indices)))
    if offset < 0 or offset >> scheme.offset_bits:
        raise IndexError("Offset 0x%x does not fit in %i bits" % (offset, scheme.offset_bits))
    value = offset
    for level, (index, w, shift) in enumerate(zip(indices, scheme.widths, scheme.shifts)):
        index = int(index)
        if index < 0 or index >> w:
            raise IndexError("Index %i of level %i does not fit in %i bits" % (index, level, w))
        value |= index << shift
    return canonicalize(value, scheme.va_bits)


@docval({'name': 'va', 'type': int, 'doc': 'canonical virtual address'},
        {'name': 'depth', 'type': int, 'doc': 'number of levels consumed'},
        {'name': 'scheme', 'type': LevelScheme, 'doc': 'the level scheme'},
        returns='the index bits of the first depth levels', rtype=int, is_method=False)
def region_tag(**kwargs):
    """
    Get the tag identifying a partial walk: the top ``sum(widths[:depth])`` translated bits.

    Addresses with equal tags share the same walk prefix and reach the same node after ``depth``
    levels.
    """
    va, depth, scheme = getargs('va', 'depth', 'scheme', kwargs)
    if depth < 1 or depth >= scheme.levels:
        raise ValueError("Depth %i out of range for scheme %s, expected 1 <= depth < %i" %
                         (depth, scheme, scheme.levels))
    return strip(va, scheme.va_bits) >> scheme.shifts[depth - 1]
