"""Uniform spatial hash over grain centres.

Grains are bucketed by integer cell coordinates with a counting sort, so
the bucket contents (and therefore the pair order) depend only on grain
indices and positions.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def cell_hash(ix: int, iy: int, iz: int, mask: int) -> int:
    """Hash integer cell coordinates into a power-of-two table."""
    return ((ix * 73856093) ^ (iy * 19349663) ^ (iz * 83492791)) & mask


@njit(cache=True)
def build_grid(positions, cell_size):
    """Bucket grains into hashed cells.

    Returns:
        `(cells, start, order, mask)` where `cells[i]` are the integer cell
        coordinates of grain `i`, grains of bucket `k` are
        `order[start[k]:start[k + 1]]` in ascending index order, and `mask`
        is the table size minus one.
    """
    n = positions.shape[0]
    size = 1
    while size < 2 * max(n, 1):
        size *= 2
    mask = size - 1
    cells = np.empty((n, 3), dtype=np.int64)
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        for a in range(3):
            cells[i, a] = np.int64(np.floor(positions[i, a] / cell_size))
        keys[i] = cell_hash(cells[i, 0], cells[i, 1], cells[i, 2], mask)
    start = np.zeros(size + 1, dtype=np.int64)
    for i in range(n):
        start[keys[i] + 1] += 1
    for k in range(size):
        start[k + 1] += start[k]
    fill = start.copy()
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        order[fill[keys[i]]] = i
        fill[keys[i]] += 1
    return cells, start, order, mask


@njit(cache=True)
def _scan_pairs(positions, cells, start, order, mask, reach, out_i, out_j, write):
    """Visit each pair `i < j` closer than `reach` exactly once."""
    n = positions.shape[0]
    reach2 = reach * reach
    count = 0
    for i in range(n):
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    cx = cells[i, 0] + dx
                    cy = cells[i, 1] + dy
                    cz = cells[i, 2] + dz
                    k = cell_hash(cx, cy, cz, mask)
                    for idx in range(start[k], start[k + 1]):
                        j = order[idx]
                        if j <= i:
                            continue
                        if cells[j, 0] != cx or cells[j, 1] != cy or cells[j, 2] != cz:
                            continue
                        d0 = positions[i, 0] - positions[j, 0]
                        d1 = positions[i, 1] - positions[j, 1]
                        d2 = positions[i, 2] - positions[j, 2]
                        if d0 * d0 + d1 * d1 + d2 * d2 < reach2:
                            if write:
                                out_i[count] = i
                                out_j[count] = j
                            count += 1
    return count


@njit(cache=True)
def find_pairs(positions, cell_size):
    """Return candidate pairs `(i, j)`, `i < j`, with centres within `cell_size`.

    Pairs are sorted by `i`; for equal `i` they follow the fixed neighbour
    cell order, then ascending `j`.
    """
    cells, start, order, mask = build_grid(positions, cell_size)
    dummy = np.empty(0, dtype=np.int64)
    count = _scan_pairs(positions, cells, start, order, mask, cell_size,
                        dummy, dummy, False)
    out_i = np.empty(count, dtype=np.int64)
    out_j = np.empty(count, dtype=np.int64)
    _scan_pairs(positions, cells, start, order, mask, cell_size, out_i, out_j, True)
    return out_i, out_j
