"""
Self-referencing page tables.

With a recursive entry installed in the root, a walk that follows it ``k`` times ends ``k`` levels
early and returns a page-table node instead of a data page. Inside a flattened 2 MB root the
recursive entry is replicated over 512 slots, so following it consumes only the top 9 bits of the
18 bit field and the low 9 bits become the high bits of the next field (overlapping index bits).
Without the overlap the cursor advances by the full node width and some nodes cannot be reached.
"""
import logging

from hdmf.utils import docval, getargs

from .addressing import PageSize, FIELD_BITS, OFFSET_BITS, ENTRY_BYTES, canonicalize, strip
from .pagetable import PageTable, PTNode, Translation, RecursionLayoutError, PRESENT, TERMINAL, RECURSIVE, \
    FRAME_MASK, SIZE_SHIFT

logger = logging.getLogger(__name__)

__all__ = ['RecursionLayoutError', 'recursion_step', 'recursion_count', 'make_recursive_va', 'recursive_translate',
           'recursive_va_for_node']

_SIZES = (PageSize.SIZE_4K, PageSize.SIZE_2M, PageSize.SIZE_1G)


def _check_installed(table):
    if table.recursion_index is None:
        raise RecursionLayoutError("No recursive entry is installed in the table")
    if table.root_node_size == PageSize.SIZE_1G:
        raise RecursionLayoutError("Recursion through 1 GB root nodes is not supported")


def recursion_step(table, overlap=True):
    """Number of virtual address bits consumed by following the recursive entry once"""
    return FIELD_BITS if overlap else table.root_node_size.width


@docval({'name': 'table', 'type': PageTable, 'doc': 'a table with recursion installed'},
        {'name': 'node', 'type': PTNode, 'doc': 'the node to reach'},
        {'name': 'overlap', 'type': bool, 'doc': 'overlap index bits when following the recursive entry',
         'default': True},
        returns='number of recursions returning the node', rtype=int, is_method=False)
def recursion_count(**kwargs):
    """
    Get the recursion count ``k`` whose walk ends at ``node``.

    A node indexed from bit ``lo`` is returned when ``lo - 3`` bits have been consumed by recursions.

    :raises: RecursionLayoutError if no integer count reaches the node
    """
    table, node, overlap = getargs('table', 'node', 'overlap', kwargs)
    _check_installed(table)
    step = recursion_step(table, overlap)
    budget = node.lo - (OFFSET_BITS - FIELD_BITS)
    if budget <= 0 or budget % step:
        raise RecursionLayoutError("Node 0x%x indexed from bit %i cannot be reached with %i bit recursion steps" %
                                   (node.base, node.lo, step))
    return budget // step


@docval({'name': 'rec_index', 'type': int, 'doc': 'root slot (top 9 bits) of the recursive entry'},
        {'name': 'k', 'type': int, 'doc': 'number of times the walk follows the recursive entry'},
        {'name': 'target_va', 'type': int, 'doc': 'canonical virtual address whose walk leads to the wanted node'},
        {'name': 'table', 'type': PageTable, 'doc': 'a table with recursion installed'},
        {'name': 'overlap', 'type': bool, 'doc': 'overlap index bits when following the recursive entry',
         'default': True},
        returns='canonical virtual address', rtype=int, is_method=False)
def make_recursive_va(**kwargs):
    """
    Build the address whose walk follows the recursive entry ``k`` times and then descends along the
    walk of ``target_va``.

    The result translates to the address of the entry used for ``target_va`` in the node returned.

    :raises: RecursionLayoutError if recursion is not installed or no node of the walk of target_va is
             indexed at the bit position the k recursions leave
    """
    rec_index, k, target_va, table, overlap = getargs('rec_index', 'k', 'target_va', 'table', 'overlap', kwargs)
    if k == 0:
        return target_va
    _check_installed(table)
    if rec_index != table.recursion_index:
        raise RecursionLayoutError("Recursive entry is installed at %i, not %i" % (table.recursion_index, rec_index))
    va_bits = table.va_bits
    step = recursion_step(table, overlap)
    if k < 0 or va_bits - step * k < OFFSET_BITS:
        raise RecursionLayoutError("%i recursions of %i bits exceed the %i bit address" % (k, step, va_bits))
    consumed = step * k
    if not any(node.lo - (OFFSET_BITS - FIELD_BITS) == consumed for node, _, _ in table.path(target_va)):
        raise RecursionLayoutError("No node on the walk of 0x%x is reached after %i recursions of %i bits" %
                                   (target_va, k, step))
    # each recursion field repeats rec_index so that its low bits select the same slot again
    field = 0
    for i in range(step // FIELD_BITS):
        field |= rec_index << (FIELD_BITS * i)
    value = 0
    for i in range(k):
        value |= field << (va_bits - step * (i + 1))
    value |= (strip(target_va, va_bits) >> consumed) & ~(ENTRY_BYTES - 1)
    return canonicalize(value, va_bits)


@docval({'name': 'table', 'type': PageTable, 'doc': 'the table to walk'},
        {'name': 'va', 'type': int, 'doc': 'canonical virtual address'},
        {'name': 'overlap', 'type': bool, 'doc': 'overlap index bits when following the recursive entry',
         'default': True},
        returns='Translation of the data page or page-table node, or None if va is not mapped',
        rtype=(Translation, type(None)), is_method=False)
def recursive_translate(**kwargs):
    """
    Walk the table honoring recursive entries.

    Following a recursive entry advances the cursor by 9 bits (overlap) or by the root's width. Once
    the remaining bits exactly index the node pointed to, that node is returned as if it were a page
    of its size.

    :raises: RecursionLayoutError if the walk runs past the page offset or reaches a 1 GB node
    """
    table, va, overlap = getargs('table', 'va', 'overlap', kwargs)
    low = strip(va, table.va_bits)
    nodes = table.nodes
    node = nodes[table.root]
    cursor = table.va_bits
    while True:
        width = node.size.width
        lo = cursor - width
        if lo < OFFSET_BITS:
            raise RecursionLayoutError("Malformed recursive address 0x%x: cursor at bit %i in node 0x%x" %
                                       (va, cursor, node.base))
        raw = int(node.entries[(low >> lo) & ((1 << width) - 1)])
        if not raw & PRESENT:
            return None
        size = _SIZES[(raw >> SIZE_SHIFT) & 0x3]
        if raw & TERMINAL:
            return Translation(raw & FRAME_MASK, int(size))
        if raw & RECURSIVE:
            cursor -= FIELD_BITS if overlap else width
        else:
            cursor = lo
        if cursor == size.shift:
            if size == PageSize.SIZE_1G:
                raise RecursionLayoutError("Recursive address 0x%x lands on 1 GB node 0x%x" % (va, raw & FRAME_MASK))
            return Translation(raw & FRAME_MASK, int(size))
        node = nodes[raw & FRAME_MASK]


@docval({'name': 'table', 'type': PageTable, 'doc': 'a table with recursion installed'},
        {'name': 'node', 'type': PTNode, 'doc': 'the node to reach'},
        {'name': 'overlap', 'type': bool, 'doc': 'overlap index bits when following the recursive entry',
         'default': True},
        returns='tuple of (recursion count, canonical virtual address)', rtype=tuple, is_method=False)
def recursive_va_for_node(**kwargs):
    """
    Get an address whose recursive walk returns ``node``

    :raises: RecursionLayoutError if the node cannot be reached
    """
    table, node, overlap = getargs('table', 'node', 'overlap', kwargs)
    k = recursion_count(table=table, node=node, overlap=overlap)
    target = canonicalize(node.va_base, table.va_bits)
    va = make_recursive_va(rec_index=table.recursion_index, k=k, target_va=target, table=table, overlap=overlap)
    return k, va
