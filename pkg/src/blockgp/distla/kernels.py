"""Worker-side SPMD kernels for the distributed linear algebra.

Every kernel walks the same globally-known schedule on every worker; data
dependencies are enforced purely by tag-matched blocking receives, so results
are deterministic for a fixed (P, h, seed).  Sends are non-blocking and each
consumer receives its own copy of a block, which keeps the number of
simultaneously-resident blocks on a worker bounded during the Cholesky sweep
(owned blocks plus at most a handful of in-flight temporaries).
"""

import numpy as np
import scipy.linalg as la

from .. import registry
from ..errors import (DimensionMismatch, GeneratorError, NotPositiveDefinite,
                      SingularDiagonal)
from .objects import LocalPiece, owned_blocks, pad_block, split_array


def _res(I, D):
    return (I - 1) % D + 1


def _fold(a, b):
    return (a, b) if a >= b else (b, a)


def _owner(I, J, D):
    return _fold(_res(I, D), _res(J, D))


# ---------------------------------------------------------------------------
# construction

@registry.register("distla.construct")
def construct(ctx, name, kind, generator, params, inputs_name,
              row_layout, col_layout=None):
    """Fill owned blocks by evaluating an entrywise generator."""
    gen = registry.lookup(generator)
    inputs = ctx.fetch(inputs_name) if inputs_name else None
    params = np.asarray(params, dtype=float)
    cl = col_layout or row_layout
    bs_r, bs_c = row_layout.block_size, cl.block_size
    blocks = {}
    for key in owned_blocks(kind, ctx.coord, ctx.grid, row_layout, col_layout):
        if kind == "vector":
            J = key
            i0 = (J - 1) * bs_r + 1
            i = np.arange(i0, i0 + bs_r)
            live = i <= row_layout.n
            block = np.zeros(bs_r)
            try:
                block[live] = np.asarray(gen(params, inputs, i[live]), dtype=float)
            except Exception as exc:
                raise GeneratorError(ctx.rank, exc) from exc
        else:
            I, J = key
            r0, c0 = (I - 1) * bs_r + 1, (J - 1) * bs_c + 1
            jj, ii = np.meshgrid(np.arange(c0, c0 + bs_c),
                                 np.arange(r0, r0 + bs_r), indexing="xy")
            block = np.zeros((bs_r, bs_c))
            mask = (ii <= row_layout.n) & (jj <= cl.n)
            if kind == "triangular" and I == J:
                mask &= ii >= jj
            try:
                vals = np.asarray(gen(params, inputs, ii[mask], jj[mask]),
                                  dtype=float)
            except Exception as exc:
                raise GeneratorError(ctx.rank, exc) from exc
            block[mask] = vals
            pad_block(kind, block, I, J, row_layout, cl)
            ctx.log_event("construct", I, J)
        blocks[key] = block
    ctx.store[name] = LocalPiece(kind, row_layout, cl if kind != "vector" else None,
                                 blocks)


@registry.register("distla.rnorm")
def construct_rnorm(ctx, name, kind, row_layout, col_layout=None, fill="normal"):
    """Fill owned blocks with i.i.d. N(0,1) draws from this rank's stream.

    Padded positions are drawn too (keeping the stream position a pure
    function of the block size) and then zeroed.  `fill="zeros"` is the test
    hook for noise-free simulation.
    """
    cl = col_layout or row_layout
    bs_r, bs_c = row_layout.block_size, cl.block_size
    blocks = {}
    for key in owned_blocks(kind, ctx.coord, ctx.grid, row_layout, col_layout):
        if kind == "vector":
            draw = bs_r
        else:
            draw = bs_r * bs_c
        z = (np.zeros(draw) if fill == "zeros" else ctx.normals(draw))
        if kind == "vector":
            block = z
            pad_block(kind, block, key, key, row_layout)
        else:
            I, J = key
            block = z.reshape((bs_r, bs_c), order="F")
            pad_block(kind, block, I, J, row_layout, cl)
        blocks[key] = block
    ctx.store[name] = LocalPiece(kind, row_layout, cl if kind != "vector" else None,
                                 blocks)


# ---------------------------------------------------------------------------
# Cholesky

@registry.register("distla.cholesky")
def cholesky(ctx, name, out_name):
    """Right-looking block Cholesky over the folded triangular layout.

    Factors in place (the input name is consumed).  Column J of each step:
    the diagonal owner factors, column owners triangular-solve, then every
    trailing block (R, C) is updated with the pair L(R,J), L(C,J), each
    received as a per-use copy and released immediately.  Returns the peak
    number of simultaneously-resident blocks for the memory-bound check.
    """
    piece = ctx.fetch(name)
    if out_name != name:
        ctx.store[out_name] = piece
        del ctx.store[name]
    lay = piece.row_layout
    D, B, bs = ctx.grid.D, lay.B, lay.block_size
    me = ctx.coord
    blocks = piece.blocks
    owned = len(blocks)
    peak = owned

    try:
        return _cholesky_sweep(ctx, out_name, blocks, D, B, bs, me,
                               owned, peak)
    except BaseException:
        ctx.store.pop(out_name, None)  # no partial factor is retained
        raise


def _cholesky_sweep(ctx, out_name, blocks, D, B, bs, me, owned, peak):
    for J in range(1, B + 1):
        rj = _res(J, D)
        downer = (rj, rj)
        # factor the diagonal block
        if me == downer:
            try:
                L = la.cholesky(blocks[(J, J)], lower=True, check_finite=False)
            except la.LinAlgError:
                raise NotPositiveDefinite(J) from None
            blocks[(J, J)] = L
            ctx.log_event("factor", J, J)
            for dest in sorted({_owner(I, J, D) for I in range(J + 1, B + 1)}):
                if dest != me:
                    ctx.send(dest, (out_name, "diag", J, J), L)
        # triangular solves down column J
        my_rows = [I for I in range(J + 1, B + 1) if _owner(I, J, D) == me]
        if my_rows:
            if me == downer:
                Ljj = blocks[(J, J)]
            else:
                Ljj = ctx.recv(downer, (out_name, "diag", J, J), (bs, bs))
                peak = max(peak, owned + 1)
            for I in my_rows:
                blocks[(I, J)] = la.solve_triangular(
                    Ljj, blocks[(I, J)].T, lower=True, check_finite=False).T
                ctx.log_event("solve", I, J)
        # trailing updates, one task at a time
        for C in range(J + 1, B + 1):
            for R in range(C, B + 1):
                towner = _owner(R, C, D)
                srcs = [(R, _owner(R, J, D))]
                if R != C:
                    srcs.append((C, _owner(C, J, D)))
                for X, xowner in srcs:
                    if xowner == me and towner != me:
                        ctx.send(towner, (out_name, "col", X, J), blocks[(X, J)])
                if towner != me:
                    continue
                held = 0
                ins = []
                for X, xowner in srcs:
                    if xowner == me:
                        ins.append(blocks[(X, J)])
                    else:
                        ins.append(ctx.recv(xowner, (out_name, "col", X, J),
                                            (bs, bs)))
                        held += 1
                peak = max(peak, owned + held)
                if R == C:
                    W = ins[0]
                    blocks[(R, C)] -= np.tril(W @ W.T)
                else:
                    blocks[(R, C)] -= ins[0] @ ins[1].T
                ctx.log_event("update", R, C)
    return {"peak_blocks": peak, "owned_blocks": owned}


# ---------------------------------------------------------------------------
# triangular solves

@registry.register("distla.solve_vector")
def solve_vector(ctx, l_name, rhs_name, out_name, forward=True):
    """Solve L x = b (forward) or L^T x = b (backward) for a distributed vector.

    Partial products run where the L block lives; the diagonal owner of each
    result block accumulates partials in a fixed order and solves.
    """
    Lp = ctx.fetch(l_name)
    bp = ctx.fetch(rhs_name)
    lay = Lp.row_layout
    D, B, bs = ctx.grid.D, lay.B, lay.block_size
    me = ctx.coord
    x = {}
    local_partials = {}
    order = range(1, B + 1) if forward else range(B, 0, -1)
    for J in order:
        rj = _res(J, D)
        downer = (rj, rj)
        Ks = list(range(1, J)) if forward else list(range(J + 1, B + 1))
        for K in Ks:
            Lkey = (J, K) if forward else (K, J)
            lowner = _owner(*Lkey, D)
            kowner = (_res(K, D), _res(K, D))
            # the x_K owner ships a copy to the L-block owner, per use
            if kowner == me and lowner != me:
                ctx.send(lowner, (out_name, "x", K, J), x[K])
            if lowner != me:
                continue
            xk = x[K] if kowner == me else ctx.recv(kowner, (out_name, "x", K, J),
                                                    (bs,))
            Lb = Lp.blocks[Lkey]
            partial = Lb @ xk if forward else Lb.T @ xk
            if downer == me:
                local_partials[(J, K)] = partial
            else:
                ctx.send(downer, (out_name, "ps", J, K), partial)
        if downer == me:
            acc = bp.blocks[J].copy()
            for K in Ks:
                Lkey = (J, K) if forward else (K, J)
                lowner = _owner(*Lkey, D)
                p = (local_partials.pop((J, K)) if lowner == me
                     else ctx.recv(lowner, (out_name, "ps", J, K), (bs,)))
                acc -= p
            Ljj = Lp.blocks[(J, J)]
            if np.any(np.diag(Ljj) == 0.0):
                raise SingularDiagonal(f"zero diagonal in block {J}")
            x[J] = la.solve_triangular(Ljj, acc, lower=True,
                                       trans=0 if forward else 1,
                                       check_finite=False)
    ctx.store[out_name] = LocalPiece("vector", lay, None, x)


@registry.register("distla.solve_rect")
def solve_rect(ctx, l_name, rhs_name, out_name, forward=True):
    """Triangular solve with a rectangular right-hand side, all columns.

    Partials run where the solved RHS block lives, so only L blocks travel.
    """
    Lp = ctx.fetch(l_name)
    Bp = ctx.fetch(rhs_name)
    rlay, clay = Bp.row_layout, Bp.col_layout
    D, Br, Bc = ctx.grid.D, rlay.B, clay.B
    bs_r, bs_c = rlay.block_size, clay.block_size
    me = ctx.coord
    X = {}
    order = range(1, Br + 1) if forward else range(Br, 0, -1)
    for J in order:
        rj = _res(J, D)
        downer = (rj, rj)
        Ks = list(range(1, J)) if forward else list(range(J + 1, Br + 1))
        for c in range(1, Bc + 1):
            rc = _res(c, D)
            towner = _fold(rj, rc)
            # diagonal factor ships per use
            if downer == me and towner != me:
                ctx.send(towner, (out_name, "diag", J, J), Lp.blocks[(J, J)])
            acc = None
            if towner == me:
                acc = Bp.blocks[(J, c)].copy()
            for K in Ks:
                Lkey = (J, K) if forward else (K, J)
                lowner = _owner(*Lkey, D)
                sowner = _fold(_res(K, D), rc)  # holds the solved X[(K, c)]
                if lowner == me and sowner != me:
                    ctx.send(sowner, (out_name, "col", Lkey[0], Lkey[1]),
                             Lp.blocks[Lkey])
                if sowner == me:
                    Lb = (Lp.blocks[Lkey] if lowner == me
                          else ctx.recv(lowner, (out_name, "col", *Lkey),
                                        (bs_r, bs_r)))
                    partial = Lb @ X[(K, c)] if forward else Lb.T @ X[(K, c)]
                    if towner == me:
                        acc -= partial
                    else:
                        ctx.send(towner, (out_name, "ps", J, c), partial)
                elif towner == me:
                    acc -= ctx.recv(sowner, (out_name, "ps", J, c), (bs_r, bs_c))
            if towner == me:
                Ljj = (Lp.blocks[(J, J)] if downer == me
                       else ctx.recv(downer, (out_name, "diag", J, J),
                                     (bs_r, bs_r)))
                if np.any(np.diag(Ljj) == 0.0):
                    raise SingularDiagonal(f"zero diagonal in block {J}")
                X[(J, c)] = la.solve_triangular(Ljj, acc, lower=True,
                                                trans=0 if forward else 1,
                                                check_finite=False)
    ctx.store[out_name] = LocalPiece("rectangular", rlay, clay, X)


# ---------------------------------------------------------------------------
# multiplications

@registry.register("distla.mult_vector")
def mult_vector(ctx, l_name, x_name, out_name):
    """y = L x for a distributed vector x."""
    Lp = ctx.fetch(l_name)
    xp = ctx.fetch(x_name)
    lay = Lp.row_layout
    D, B, bs = ctx.grid.D, lay.B, lay.block_size
    me = ctx.coord
    y = {}
    for I in range(1, B + 1):
        ri = _res(I, D)
        towner = (ri, ri)
        acc = np.zeros(bs) if towner == me else None
        for J in range(1, I + 1):
            lowner = _owner(I, J, D)
            jowner = (_res(J, D), _res(J, D))
            if jowner == me and lowner != me:
                ctx.send(lowner, (out_name, "x", J, I), xp.blocks[J])
            if lowner == me:
                xj = (xp.blocks[J] if jowner == me
                      else ctx.recv(jowner, (out_name, "x", J, I), (bs,)))
                partial = Lp.blocks[(I, J)] @ xj
                if towner == me:
                    acc += partial
                else:
                    ctx.send(towner, (out_name, "ps", I, J), partial)
            elif towner == me:
                acc += ctx.recv(lowner, (out_name, "ps", I, J), (bs,))
        if towner == me:
            y[I] = acc
    ctx.store[out_name] = LocalPiece("vector", lay, None, y)


@registry.register("distla.mult_rect")
def mult_rect(ctx, l_name, x_name, out_name):
    """Y = L X for a distributed rectangular X (partials where X lives)."""
    Lp = ctx.fetch(l_name)
    Xp = ctx.fetch(x_name)
    rlay, clay = Xp.row_layout, Xp.col_layout
    D, Br, Bc = ctx.grid.D, rlay.B, clay.B
    bs_r, bs_c = rlay.block_size, clay.block_size
    me = ctx.coord
    Y = {}
    for I in range(1, Br + 1):
        ri = _res(I, D)
        for c in range(1, Bc + 1):
            rc = _res(c, D)
            towner = _fold(ri, rc)
            acc = np.zeros((bs_r, bs_c)) if towner == me else None
            for J in range(1, I + 1):
                lowner = _owner(I, J, D)
                sowner = _fold(_res(J, D), rc)
                if lowner == me and sowner != me:
                    ctx.send(sowner, (out_name, "col", I, J), Lp.blocks[(I, J)])
                if sowner == me:
                    Lb = (Lp.blocks[(I, J)] if lowner == me
                          else ctx.recv(lowner, (out_name, "col", I, J),
                                        (bs_r, bs_r)))
                    partial = Lb @ Xp.blocks[(J, c)]
                    if towner == me:
                        acc += partial
                    else:
                        ctx.send(towner, (out_name, "ps", I, c), partial)
                elif towner == me:
                    acc += ctx.recv(sowner, (out_name, "ps", I, c),
                                    (bs_r, bs_c))
            if towner == me:
                Y[(I, c)] = acc
    ctx.store[out_name] = LocalPiece("rectangular", rlay, clay, Y)


# ---------------------------------------------------------------------------
# crossproducts

@registry.register("distla.xprod_mat_vec")
def xprod_mat_vec(ctx, v_name, u_name, out_name):
    """w = V^T u; partials run where the V block lives."""
    Vp = ctx.fetch(v_name)
    up = ctx.fetch(u_name)
    rlay, clay = Vp.row_layout, Vp.col_layout
    D, Br, Bc = ctx.grid.D, rlay.B, clay.B
    bs_r, bs_c = rlay.block_size, clay.block_size
    me = ctx.coord
    w = {}
    for A in range(1, Bc + 1):
        ra = _res(A, D)
        towner = (ra, ra)
        acc = np.zeros(bs_c) if towner == me else None
        for I in range(1, Br + 1):
            vowner = _fold(_res(I, D), ra)
            iowner = (_res(I, D), _res(I, D))
            if iowner == me and vowner != me:
                ctx.send(vowner, (out_name, "x", I, A), up.blocks[I])
            if vowner == me:
                ui = (up.blocks[I] if iowner == me
                      else ctx.recv(iowner, (out_name, "x", I, A), (bs_r,)))
                partial = Vp.blocks[(I, A)].T @ ui
                if towner == me:
                    acc += partial
                else:
                    ctx.send(towner, (out_name, "ps", A, I), partial)
            elif towner == me:
                acc += ctx.recv(vowner, (out_name, "ps", A, I), (bs_c,))
        if towner == me:
            w[A] = acc
    ctx.store[out_name] = LocalPiece("vector", clay, None, w)


@registry.register("distla.xprod_self")
def xprod_self(ctx, v_name, out_name):
    """S = V^T V in lower-triangular storage over V's column layout."""
    Vp = ctx.fetch(v_name)
    rlay, clay = Vp.row_layout, Vp.col_layout
    D, Br, Bc = ctx.grid.D, rlay.B, clay.B
    bs_r, bs_c = rlay.block_size, clay.block_size
    me = ctx.coord
    S = {}
    for A in range(1, Bc + 1):
        ra = _res(A, D)
        for Bcol in range(1, A + 1):
            rb = _res(Bcol, D)
            towner = _fold(ra, rb)
            acc = np.zeros((bs_c, bs_c)) if towner == me else None
            for I in range(1, Br + 1):
                aowner = _fold(_res(I, D), ra)
                bowner = _fold(_res(I, D), rb)
                if bowner == me and aowner != me and Bcol != A:
                    ctx.send(aowner, (out_name, "col", I, Bcol),
                             Vp.blocks[(I, Bcol)])
                if aowner == me:
                    vb = (Vp.blocks[(I, Bcol)] if (bowner == me or Bcol == A)
                          else ctx.recv(bowner, (out_name, "col", I, Bcol),
                                        (bs_r, bs_c)))
                    if Bcol == A:
                        vb = Vp.blocks[(I, A)]
                    partial = Vp.blocks[(I, A)].T @ vb
                    if towner == me:
                        acc += partial
                    else:
                        ctx.send(towner, (out_name, "ps", A, Bcol), partial)
                elif towner == me:
                    acc += ctx.recv(aowner, (out_name, "ps", A, Bcol),
                                    (bs_c, bs_c))
            if towner == me:
                S[(A, Bcol)] = np.tril(acc) if A == Bcol else acc
    ctx.store[out_name] = LocalPiece("triangular", clay, clay, S)


@registry.register("distla.xprod_self_diag")
def xprod_self_diag(ctx, v_name, out_name):
    """diag(V^T V) as a distributed vector on V's column layout."""
    Vp = ctx.fetch(v_name)
    rlay, clay = Vp.row_layout, Vp.col_layout
    D, Br, Bc = ctx.grid.D, rlay.B, clay.B
    bs_c = clay.block_size
    me = ctx.coord
    d = {}
    for A in range(1, Bc + 1):
        ra = _res(A, D)
        towner = (ra, ra)
        acc = np.zeros(bs_c) if towner == me else None
        for I in range(1, Br + 1):
            vowner = _fold(_res(I, D), ra)
            if vowner == me:
                V = Vp.blocks[(I, A)]
                partial = np.einsum("ij,ij->j", V, V)
                if towner == me:
                    acc += partial
                else:
                    ctx.send(towner, (out_name, "ps", A, I), partial)
            elif towner == me:
                acc += ctx.recv(vowner, (out_name, "ps", A, I), (bs_c,))
        if towner == me:
            d[A] = acc
    ctx.store[out_name] = LocalPiece("vector", clay, None, d)


# ---------------------------------------------------------------------------
# reductions and collection

@registry.register("distla.logdet")
def logdet(ctx, l_name):
    """Local contribution 2 * sum(log diag) over unpadded diagonal entries."""
    Lp = ctx.fetch(l_name)
    lay = Lp.row_layout
    bs = lay.block_size
    total = 0.0
    for (I, J), block in sorted(Lp.blocks.items()):
        if I != J:
            continue
        r0 = (I - 1) * bs  # 0-based
        live = min(max(lay.n - r0, 0), bs)
        d = np.diag(block)[:live]
        if np.any(d <= 0.0):
            raise SingularDiagonal(f"non-positive diagonal in block {I}")
        total += 2.0 * float(np.sum(np.log(d)))
    return total


@registry.register("distla.sumsq")
def sumsq(ctx, name):
    """Local sum of squares of unpadded vector entries."""
    xp = ctx.fetch(name)
    lay = xp.row_layout
    bs = lay.block_size
    total = 0.0
    for J, block in sorted(xp.blocks.items()):
        live = min(max(lay.n - (J - 1) * bs, 0), bs)
        total += float(np.dot(block[:live], block[:live]))
    return total


@registry.register("distla.collect")
def collect_blocks(ctx, name, diagonal_only=False):
    """Ship owned blocks (or just diagonal slices) back to the master."""
    piece = ctx.fetch(name)
    if not diagonal_only:
        return {k: np.array(v) for k, v in piece.blocks.items()}
    out = {}
    for (I, J), block in piece.blocks.items():
        if I == J:
            out[(I, J)] = np.diag(block).copy()
    return out


@registry.register("distla.split")
def split(ctx, name, kind, array, row_layout, col_layout=None):
    """Store this worker's share of a master-side dense array."""
    blocks = split_array(kind, array, ctx.grid, ctx.coord, row_layout, col_layout)
    ctx.store[name] = LocalPiece(kind, row_layout,
                                 (col_layout or row_layout) if kind != "vector"
                                 else None, blocks)


# ---------------------------------------------------------------------------
# elementwise helpers used through remote_apply

def _blockwise(op, a, b=None):
    if isinstance(a, LocalPiece):
        if b is None:
            blocks = {k: op(v) for k, v in a.blocks.items()}
        else:
            if not isinstance(b, LocalPiece) or set(a.blocks) != set(b.blocks):
                raise DimensionMismatch("local pieces do not align")
            blocks = {k: op(v, b.blocks[k]) for k, v in a.blocks.items()}
        return LocalPiece(a.kind, a.row_layout, a.col_layout, blocks)
    return op(a) if b is None else op(a, b)


registry.register("negate", lambda a: _blockwise(np.negative, a))
registry.register("add", lambda a, b: _blockwise(np.add, a, b))
registry.register("sub", lambda a, b: _blockwise(np.subtract, a, b))
