"""Master-side API for the distributed linear-algebra kernels."""

import numpy as np

from ..errors import DimensionMismatch
from ..grid import BlockLayout, default_h
from . import kernels  # noqa: F401  (registers the worker kernels)
from .objects import (DistRectangular, DistTriangular, DistVector, LocalPiece,
                      assemble)


def make_layout(n, grid, h=None):
    """Layout for an n-point dimension on the given grid (h defaults to the
    block-size heuristic)."""
    if h is None:
        h = default_h(n, grid.D)
    return BlockLayout(n, h, grid.D)


def _check_square(L):
    if not isinstance(L, DistTriangular):
        raise DimensionMismatch("expected a distributed triangular matrix")


def construct_distributed(cluster, name, kind, generator, params,
                          inputs_name=None, row_layout=None, col_layout=None):
    """Distributed construction from a registered entrywise generator."""
    cluster.run("distla.construct", name=name, kind=kind, generator=generator,
                params=np.asarray(params, dtype=float), inputs_name=inputs_name,
                row_layout=row_layout, col_layout=col_layout)
    if kind == "triangular":
        return DistTriangular(name, row_layout)
    if kind == "rectangular":
        return DistRectangular(name, row_layout, col_layout)
    return DistVector(name, row_layout)


def construct_rnorm_distributed(cluster, name, kind, row_layout,
                                col_layout=None, fill="normal"):
    """Distributed i.i.d. N(0,1) object drawn from per-rank streams."""
    cluster.run("distla.rnorm", name=name, kind=kind, row_layout=row_layout,
                col_layout=col_layout, fill=fill)
    if kind == "rectangular":
        return DistRectangular(name, row_layout, col_layout)
    return DistVector(name, row_layout)


def distribute(cluster, name, array, kind, row_layout, col_layout=None):
    """Split a master-side dense object across the workers."""
    array = np.asarray(array, dtype=float)
    if kind == "vector" and array.shape != (row_layout.n,):
        raise DimensionMismatch(f"vector length {array.shape} != {row_layout.n}")
    cluster.run("distla.split", name=name, kind=kind, array=array,
                row_layout=row_layout, col_layout=col_layout)
    if kind == "triangular":
        return DistTriangular(name, row_layout)
    if kind == "rectangular":
        return DistRectangular(name, row_layout, col_layout)
    return DistVector(name, row_layout)


def distributed_cholesky(cluster, tri, out_name):
    """Factor a distributed SPD matrix; consumes the input object in place.

    Returns (handle to L, per-rank residency stats for the memory check).
    """
    _check_square(tri)
    stats = cluster.run("distla.cholesky", name=tri.name, out_name=out_name)
    return DistTriangular(out_name, tri.layout), stats


def triangular_solve(cluster, L, rhs, out_name, side="forward"):
    """x with L x = b (side="forward") or L^T x = b (side="back")."""
    _check_square(L)
    forward = {"forward": True, "back": False}[side]
    if isinstance(rhs, DistVector):
        if rhs.layout.B != L.layout.B or rhs.layout.n != L.layout.n:
            raise DimensionMismatch("rhs layout does not conform to L")
        cluster.run("distla.solve_vector", l_name=L.name, rhs_name=rhs.name,
                    out_name=out_name, forward=forward)
        return DistVector(out_name, rhs.layout)
    if rhs.row_layout != L.layout:
        raise DimensionMismatch("rhs row layout does not conform to L")
    cluster.run("distla.solve_rect", l_name=L.name, rhs_name=rhs.name,
                out_name=out_name, forward=forward)
    return DistRectangular(out_name, rhs.row_layout, rhs.col_layout)


def mult_chol(cluster, L, x, out_name):
    """L @ x for a distributed vector or rectangular x."""
    _check_square(L)
    if isinstance(x, DistVector):
        if x.layout.B != L.layout.B:
            raise DimensionMismatch("x layout does not conform to L")
        cluster.run("distla.mult_vector", l_name=L.name, x_name=x.name,
                    out_name=out_name)
        return DistVector(out_name, x.layout)
    if x.row_layout != L.layout:
        raise DimensionMismatch("x row layout does not conform to L")
    cluster.run("distla.mult_rect", l_name=L.name, x_name=x.name,
                out_name=out_name)
    return DistRectangular(out_name, x.row_layout, x.col_layout)


def crossprod_mat_vec(cluster, V, u, out_name):
    """V^T u as a distributed vector on V's column layout."""
    if u.layout != V.row_layout:
        raise DimensionMismatch("u layout does not match V's row layout")
    cluster.run("distla.xprod_mat_vec", v_name=V.name, u_name=u.name,
                out_name=out_name)
    return DistVector(out_name, V.col_layout)


def crossprod_self(cluster, V, out_name):
    """V^T V (lower storage) on V's column layout."""
    cluster.run("distla.xprod_self", v_name=V.name, out_name=out_name)
    return DistTriangular(out_name, V.col_layout)


def crossprod_self_diag(cluster, V, out_name):
    """diag(V^T V) as a distributed vector."""
    cluster.run("distla.xprod_self_diag", v_name=V.name, out_name=out_name)
    return DistVector(out_name, V.col_layout)


def collect(cluster, handle):
    """Reassemble the unpadded dense object on the master.

    Triangular objects come back as dense lower-triangular arrays.
    """
    if isinstance(handle, DistTriangular):
        kind, rl, cl = "triangular", handle.layout, handle.layout
    elif isinstance(handle, DistRectangular):
        kind, rl, cl = "rectangular", handle.row_layout, handle.col_layout
    else:
        kind, rl, cl = "vector", handle.layout, None
    pieces = cluster.run("distla.collect", name=handle.name)
    return assemble(kind, pieces, rl, cl)


def collect_diagonal(cluster, handle):
    """Diagonal of a distributed triangular matrix, unpadded."""
    _check_square(handle)
    lay = handle.layout
    bs = lay.block_size
    pieces = cluster.run("distla.collect", name=handle.name, diagonal_only=True)
    d = np.zeros(lay.padded_n)
    for blocks in pieces:
        for (I, _J), v in blocks.items():
            d[(I - 1) * bs:I * bs] = v
    return d[:lay.n]


def log_det_from_chol(cluster, L):
    """log det C = 2 sum log diag(L), reduced in rank order."""
    _check_square(L)
    return float(sum(cluster.run("distla.logdet", l_name=L.name)))


def sum_squares(cluster, vec):
    """Squared Euclidean norm of a distributed vector."""
    return float(sum(cluster.run("distla.sumsq", name=vec.name)))


__all__ = [
    "BlockLayout", "DistRectangular", "DistTriangular", "DistVector",
    "LocalPiece", "collect", "collect_diagonal", "construct_distributed",
    "construct_rnorm_distributed", "crossprod_mat_vec", "crossprod_self",
    "crossprod_self_diag", "distribute", "distributed_cholesky",
    "log_det_from_chol", "make_layout", "mult_chol", "sum_squares",
    "triangular_solve",
]
