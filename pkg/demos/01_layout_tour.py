"""A tour of the triangular process grid and the folded block-cyclic layout.

Run: python demos/01_layout_tour.py
"""

import numpy as np

from blockgp.grid import (BlockLayout, ProcessGrid, block_owner, default_h,
                          grid_from_process_count, triangular_blocks)

print("=== The triangular process grid ===")
print("Workers sit on the lower triangle of a D x D grid, so the worker")
print("count must be a triangular number P = D(D+1)/2.\n")
for P in (1, 3, 6, 10):
    print(f"  P={P:>2} workers -> grid order D={grid_from_process_count(P).D}")

grid = ProcessGrid(4)
print("\nRanks run column-major down the triangle (D=4):")
for y in range(1, 5):
    row = ["  ."] * 4
    for z in range(1, y + 1):
        row[z - 1] = f"{grid.coord_to_rank(y, z):>3}"
    print("   " + " ".join(row))

print("\n=== Block ownership by residue folding ===")
print("With h blocks per grid dimension, block (I, J) belongs to the worker")
print("at the folded residue pair.  For D=2, h=2 (a 4x4 block triangle):\n")
grid2 = ProcessGrid(2)
for I in range(1, 5):
    cells = []
    for J in range(1, I + 1):
        cells.append(str(block_owner(I, J, grid2)))
    print("   " + "  ".join(cells))
layout = BlockLayout(n=20, h=2, D=2)
print("\nBlock counts per worker (diagonal h(h+1)/2=3, off-diagonal h^2=4):")
for coord in grid2.coords():
    blocks = triangular_blocks(coord, layout, grid2)
    print(f"  worker {coord}: {len(blocks)} blocks {blocks}")

print("\n=== Padding ===")
print("The matrix order is padded up to B * blockSize; the padded tail of a")
print("triangular operand is filled with an identity pattern so Cholesky,")
print("solves, and log-determinants are unaffected.\n")
for n in (257, 1000, 67275):
    D = 4
    h = default_h(n, D)
    lay = BlockLayout(n=n, h=h, D=D)
    print(f"  n={n:>6}: default h={h}, B={lay.B:>3}, "
          f"blockSize={lay.block_size:>4}, padded to {lay.padded_n} "
          f"(+{lay.padded_n - n})")
