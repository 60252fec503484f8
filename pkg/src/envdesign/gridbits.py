"""Bitmask grid reachability, vectorized over batches of wall layouts.

An n x n grid with n <= 8 fits one uint64: cell (r, c) is bit r*n + c.
Frontier propagation with shifts gives BFS over whole batches of maps at
once, which is what makes exhaustive maze enumeration and per-step
validity masking affordable.
"""

from __future__ import annotations

import numpy as np

MAX_SIDE = 8


def _masks(n: int):
    """(full-grid mask, not-west-column mask, not-east-column mask)."""
    if not (1 <= n <= MAX_SIDE):
        raise ValueError(f"side must be in [1, {MAX_SIDE}], got {n}")
    full = (1 << (n * n)) - 1
    west = 0
    east = 0
    for r in range(n):
        west |= 1 << (r * n)
        east |= 1 << (r * n + n - 1)
    return (
        np.uint64(full),
        np.uint64(full & ~west),
        np.uint64(full & ~east),
    )


def _spread(frontier: np.ndarray, open_cells: np.ndarray, n: int) -> np.ndarray:
    """One BFS expansion: 4-neighbor growth restricted to open cells."""
    full, not_west, not_east = _masks(n)
    shift = np.uint64(n)
    one = np.uint64(1)
    grown = (
        frontier
        | ((frontier << shift) & full)
        | (frontier >> shift)
        | ((frontier & not_east) << one)
        | ((frontier & not_west) >> one)
    )
    return grown & open_cells


def reachable_from_start(walls: np.ndarray, n: int) -> np.ndarray:
    """Fixed point of BFS growth from cell (0,0) for each wall mask."""
    walls = np.asarray(walls, dtype=np.uint64)
    full, _, _ = _masks(n)
    open_cells = full & ~walls
    reach = np.uint64(1) & open_cells
    for _ in range(n * n):
        grown = _spread(reach, open_cells, n)
        if np.array_equal(grown, reach):
            break
        reach = grown
    return reach


def connected(walls: np.ndarray, n: int) -> np.ndarray:
    """True where the end cell (n-1, n-1) is reachable from the start."""
    end_bit = np.uint64(1) << np.uint64(n * n - 1)
    return (reachable_from_start(walls, n) & end_bit) != 0


def distance_to_end(walls: np.ndarray, n: int) -> np.ndarray:
    """BFS distance in moves from start to end per mask; -1 if unreachable."""
    walls = np.atleast_1d(np.asarray(walls, dtype=np.uint64))
    full, _, _ = _masks(n)
    open_cells = full & ~walls
    end_bit = np.uint64(1) << np.uint64(n * n - 1)
    reach = np.uint64(1) & open_cells
    dist = np.full(walls.shape, -1, dtype=np.int64)
    dist[(reach & end_bit) != 0] = 0
    for step in range(1, n * n):
        grown = _spread(reach, open_cells, n)
        newly_done = (dist < 0) & ((grown & end_bit) != 0)
        dist[newly_done] = step
        if np.array_equal(grown, reach):
            break
        reach = grown
    return dist


def grid_to_mask(walls_grid: np.ndarray) -> int:
    """Pack a boolean n x n wall grid into one integer mask."""
    n = walls_grid.shape[0]
    mask = 0
    for r in range(n):
        for c in range(n):
            if walls_grid[r, c]:
                mask |= 1 << (r * n + c)
    return mask


def mask_to_grid(mask: int, n: int) -> np.ndarray:
    """Unpack an integer wall mask into a boolean n x n grid."""
    grid = np.zeros((n, n), dtype=bool)
    mask = int(mask)
    for r in range(n):
        for c in range(n):
            if mask & (1 << (r * n + c)):
                grid[r, c] = True
    return grid
