"""Triangular process grid and block-cyclic layout arithmetic.

Everything here is pure index bookkeeping: which worker owns which block of a
triangular / rectangular / vector object, and which global element indices a
worker's blocks cover.  All external indices are 1-based.
"""

from dataclasses import dataclass
from math import ceil, isqrt

import numpy as np

from .errors import DimensionMismatch, NotTriangularNumber, OutOfTriangle

DEFAULT_BLOCK_TARGET = 1000


def triangular_order(P):
    """Return D with P = D(D+1)/2, or raise NotTriangularNumber."""
    if P < 1:
        raise NotTriangularNumber(f"P must be >= 1, got {P}")
    D = (isqrt(8 * P + 1) - 1) // 2
    if D * (D + 1) // 2 != P:
        raise NotTriangularNumber(f"{P} is not a triangular number")
    return D


@dataclass(frozen=True)
class ProcessGrid:
    """D x D lower-triangular grid of P = D(D+1)/2 workers.

    Ranks 1..P run column-major down the lower triangle, so for D=4 the
    diagonal coordinates (1,1),(2,2),(3,3),(4,4) carry ranks 1, 5, 8, 10.
    """

    D: int

    def __post_init__(self):
        if self.D < 1:
            raise NotTriangularNumber(f"grid order must be >= 1, got {self.D}")

    @property
    def P(self):
        return self.D * (self.D + 1) // 2

    def coord_to_rank(self, y, z):
        D = self.D
        if not (1 <= z <= y <= D):
            raise OutOfTriangle(f"({y},{z}) not in lower triangle of order {D}")
        # blocks in columns 1..z-1, then position within column z
        before = (z - 1) * D - (z - 1) * (z - 2) // 2
        return before + (y - z + 1)

    def rank_to_coord(self, rank):
        if not (1 <= rank <= self.P):
            raise OutOfTriangle(f"rank {rank} outside 1..{self.P}")
        z = 1
        r = rank
        while r > self.D - z + 1:
            r -= self.D - z + 1
            z += 1
        return (z + r - 1, z)

    def coords(self):
        """All coordinates in rank order."""
        return [self.rank_to_coord(r) for r in range(1, self.P + 1)]

    def is_diagonal(self, coord):
        return coord[0] == coord[1]


def grid_from_process_count(P):
    """Build the ProcessGrid for a triangular worker count."""
    return ProcessGrid(triangular_order(P))


@dataclass(frozen=True)
class BlockLayout:
    """One-dimensional blocking of an index range 1..n into B = h*D blocks."""

    n: int
    h: int
    D: int

    def __post_init__(self):
        if self.n < 1 or self.h < 1 or self.D < 1:
            raise DimensionMismatch(
                f"invalid layout n={self.n} h={self.h} D={self.D}")

    @property
    def B(self):
        return self.h * self.D

    @property
    def block_size(self):
        return ceil(self.n / self.B)

    @property
    def padded_n(self):
        return self.B * self.block_size

    def block_range(self, J):
        """Global 1-based [start, stop] element indices of block J (padded)."""
        bs = self.block_size
        return (J - 1) * bs + 1, J * bs


def default_h(n, D, target=DEFAULT_BLOCK_TARGET):
    """Smallest h whose block size is at most `target` (ceil(n/(hD)) <= target)."""
    h = 1
    while ceil(n / (h * D)) > target:
        h += 1
    return h


def _residue(I, D):
    return (I - 1) % D + 1


def block_owner(I, J, grid):
    """Owner coordinate of lower-triangular block (I, J) under residue folding."""
    if J > I:
        raise OutOfTriangle(f"block ({I},{J}) above the diagonal")
    a = _residue(I, grid.D)
    b = _residue(J, grid.D)
    return (a, b) if a >= b else (b, a)


def rect_block_owner(I, J, grid):
    """Owner coordinate of rectangular block (I, J); folds above-diagonal residues."""
    a = _residue(I, grid.D)
    b = _residue(J, grid.D)
    return (a, b) if a >= b else (b, a)


def vector_block_owner(J, grid):
    """Vector blocks live block-cyclically on the diagonal workers."""
    c = _residue(J, grid.D)
    return (c, c)


def triangular_blocks(coord, layout, grid):
    """Blocks of a lower-triangular object owned by `coord`, sorted by (J, I)."""
    out = [(I, J)
           for J in range(1, layout.B + 1)
           for I in range(J, layout.B + 1)
           if block_owner(I, J, grid) == coord]
    return out


def rect_blocks(coord, row_layout, col_layout, grid):
    """Blocks of a rectangular object owned by `coord`, sorted by (J, I)."""
    return [(I, J)
            for J in range(1, col_layout.B + 1)
            for I in range(1, row_layout.B + 1)
            if rect_block_owner(I, J, grid) == coord]


def vector_blocks(coord, layout, grid):
    """Vector blocks owned by `coord`, ascending."""
    return [J for J in range(1, layout.B + 1)
            if vector_block_owner(J, grid) == coord]


def triangular_length(coord, layout, grid):
    """Stored element count (column-wise, lower triangle only on diagonal blocks)."""
    bs = layout.block_size
    total = 0
    for I, J in triangular_blocks(coord, layout, grid):
        total += bs * (bs + 1) // 2 if I == J else bs * bs
    return total


def rect_length(coord, row_layout, col_layout, grid):
    n_blocks = len(rect_blocks(coord, row_layout, col_layout, grid))
    return n_blocks * row_layout.block_size * col_layout.block_size


def vector_length(coord, layout, grid):
    return len(vector_blocks(coord, layout, grid)) * layout.block_size


def _block_indices(I, J, row_layout, col_layout, lower_only):
    """(i, j) element index arrays for one block, column-major."""
    bs_r, bs_c = row_layout.block_size, col_layout.block_size
    r0, _ = row_layout.block_range(I)
    c0, _ = col_layout.block_range(J)
    jj, ii = np.meshgrid(np.arange(bs_c), np.arange(bs_r), indexing="xy")
    # column-major order within the block
    ii = ii.T.ravel() + r0
    jj = jj.T.ravel() + c0
    if lower_only:
        keep = ii >= jj
        ii, jj = ii[keep], jj[keep]
    return ii, jj


def local_index_sets(kind, coord, grid, row_layout, col_layout=None):
    """Global element indices covered by `coord`'s blocks, in storage order.

    Blocks are visited column-major over the block grid and elements
    column-major within each block; diagonal blocks of triangular objects
    contribute only their lower triangle.  Returns (i, j, padded) arrays where
    `padded` flags entries with i > n_rows or j > n_cols.
    """
    if kind == "triangular":
        col_layout = row_layout
        blocks = triangular_blocks(coord, row_layout, grid)
        parts = [_block_indices(I, J, row_layout, col_layout, I == J)
                 for I, J in blocks]
    elif kind == "rectangular":
        if col_layout is None:
            raise DimensionMismatch("rectangular index sets need a column layout")
        blocks = rect_blocks(coord, row_layout, col_layout, grid)
        parts = [_block_indices(I, J, row_layout, col_layout, False)
                 for I, J in blocks]
    elif kind == "vector":
        bs = row_layout.block_size
        parts = []
        for J in vector_blocks(coord, row_layout, grid):
            s0, _ = row_layout.block_range(J)
            i = np.arange(s0, s0 + bs)
            parts.append((i, np.ones_like(i)))
        col_layout = BlockLayout(1, 1, 1)
    else:
        raise DimensionMismatch(f"unknown kind {kind!r}")

    if not parts:
        empty = np.zeros(0, dtype=int)
        return empty, empty, np.zeros(0, dtype=bool)
    i = np.concatenate([p[0] for p in parts])
    j = np.concatenate([p[1] for p in parts])
    padded = (i > row_layout.n) | (j > col_layout.n)
    return i, j, padded
