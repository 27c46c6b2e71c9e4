"""Worker runtime: object store, collectives, error propagation, backends."""

import struct

import numpy as np
import pytest

from blockgp import distla, registry, spawn
from blockgp.errors import (BackendUnavailable, ClusterDown, NoSuchObject,
                            NotTriangularNumber, UnknownFunction,
                            WorkerFailure)
from blockgp.transport import wire
from blockgp.transport.base import RUNTIME_OBJECT

from conftest import spd_matrix


class TestSpawn:
    def test_single_worker(self, cluster_factory):
        cl = cluster_factory(1, seed=42)
        assert cl.grid.D == 1 and cl.P == 1

    def test_ten_workers_order_four(self, cluster_factory):
        cl = cluster_factory(10, seed=42)
        assert cl.grid.D == 4

    def test_non_triangular_count(self):
        with pytest.raises(NotTriangularNumber):
            spawn(8)

    def test_unknown_backend(self):
        with pytest.raises(BackendUnavailable):
            spawn(3, backend="smoke-signals")

    def test_runtime_metadata_resident(self, cluster_factory):
        cl = cluster_factory(3)
        for rank in range(1, 4):
            meta = cl.pull(RUNTIME_OBJECT, rank)
            assert meta["rank"] == rank
            assert meta["coord"] == cl.grid.rank_to_coord(rank)


class TestObjectStore:
    def test_push_pull_round_trip(self, cluster_factory):
        cl = cluster_factory(10)
        theta = np.array([1.0, 2.5, 0.125])
        cl.push("theta", theta)
        np.testing.assert_array_equal(cl.pull("theta", 7), theta)

    def test_pull_unknown_name(self, cluster_factory):
        cl = cluster_factory(3)
        with pytest.raises(NoSuchObject):
            cl.pull("missing", 2)

    def test_ls_reflects_store(self, cluster_factory):
        cl = cluster_factory(3)
        assert cl.remote_ls(1) == [RUNTIME_OBJECT]
        cl.push("theta", 1.0)
        for rank in range(1, 4):
            assert "theta" in cl.remote_ls(rank)

    def test_rm_removes_everywhere_and_is_idempotent(self, cluster_factory):
        cl = cluster_factory(3)
        cl.push("x", 5.0)
        cl.remote_rm("x")
        cl.remote_rm("x")  # absent name is fine
        assert "x" not in cl.remote_ls(2)
        with pytest.raises(NoSuchObject):
            cl.pull("x", 1)

    def test_push_to_subset(self, cluster_factory):
        cl = cluster_factory(3)
        cl.push("x", 1.0, targets=[2])
        assert "x" in cl.remote_ls(2)
        assert "x" not in cl.remote_ls(1)

    def test_no_hidden_sharing(self, cluster_factory):
        cl = cluster_factory(1)
        x = np.arange(4.0)
        cl.push("x", x)
        x[:] = -1.0
        np.testing.assert_array_equal(cl.pull("x", 1), np.arange(4.0))


class TestRemoteApply:
    def test_negate_distributed_vector(self, cluster_factory):
        cl = cluster_factory(3)
        x = np.arange(10.0)
        layout = distla.make_layout(10, cl.grid, h=1)
        distla.distribute(cl, "x", x, "vector", layout)
        cl.remote_apply("negate", "x", "y")
        got = distla.collect(cl, distla.DistVector("y", layout))
        np.testing.assert_array_equal(got, -x)

    def test_elementwise_add(self, cluster_factory):
        cl = cluster_factory(6)
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(17), rng.standard_normal(17)
        layout = distla.make_layout(17, cl.grid, h=2)
        distla.distribute(cl, "a", a, "vector", layout)
        distla.distribute(cl, "b", b, "vector", layout)
        cl.remote_apply("add", ["a", "b"], "c")
        got = distla.collect(cl, distla.DistVector("c", layout))
        np.testing.assert_array_equal(got, a + b)

    def test_missing_input_names_rank(self, cluster_factory):
        cl = cluster_factory(3)
        cl.push("a", 1.0)
        with pytest.raises(NoSuchObject) as info:
            cl.remote_apply("add", ["a", "nope"], "c")
        assert info.value.rank == 1  # lowest failing rank reported

    def test_unknown_function(self, cluster_factory):
        cl = cluster_factory(3)
        cl.push("a", 1.0)
        with pytest.raises(UnknownFunction):
            cl.remote_apply("no.such.fn", "a", "b")


@registry.register("test.fail_on_rank_two")
def _fail_on_rank_two(ctx):
    if ctx.rank == 2:
        raise ValueError("deliberate failure")
    return ctx.rank


@registry.register("test.echo_rank")
def _echo_rank(ctx):
    return ctx.rank


class TestErrorPropagation:
    def test_worker_failure_carries_rank(self, cluster_factory):
        cl = cluster_factory(3)
        with pytest.raises(WorkerFailure) as info:
            cl.run("test.fail_on_rank_two")
        assert info.value.rank == 2

    def test_cluster_survives_failed_collective(self, cluster_factory):
        cl = cluster_factory(3)
        with pytest.raises(WorkerFailure):
            cl.run("test.fail_on_rank_two")
        assert cl.run("test.echo_rank") == [1, 2, 3]

    def test_failed_collective_does_not_poison_messaging(self, cluster_factory):
        cl = cluster_factory(3)
        A = spd_matrix(12, seed=1)
        layout = distla.make_layout(12, cl.grid, h=1)
        with pytest.raises(WorkerFailure):
            cl.run("test.fail_on_rank_two")
        C = distla.distribute(cl, "C", A, "triangular", layout)
        L, _ = distla.distributed_cholesky(cl, C, "L")
        got = distla.collect(cl, L)
        np.testing.assert_allclose(got, np.linalg.cholesky(A), atol=1e-12)

    def test_operations_after_shutdown(self):
        cl = spawn(3)
        cl.shutdown()
        with pytest.raises(ClusterDown):
            cl.push("x", 1.0)
        with pytest.raises(ClusterDown):
            cl.run("test.echo_rank")
        cl.shutdown()  # idempotent


class TestDeterminism:
    def test_repeated_program_is_bit_identical(self, cluster_factory):
        out = []
        for _ in range(2):
            cl = cluster_factory(6, seed=9)
            A = spd_matrix(33, seed=4)
            layout = distla.make_layout(33, cl.grid, h=2)
            C = distla.distribute(cl, "C", A, "triangular", layout)
            L, _ = distla.distributed_cholesky(cl, C, "L")
            out.append(distla.collect(cl, L).tobytes())
        assert out[0] == out[1]


class TestWireFormat:
    def test_data_frame_round_trip(self):
        payload = np.arange(6.0).reshape(2, 3)
        frame = wire.encode_data(2, 5, 7, ("obj", "col", 3, 1), payload)
        (length,) = struct.unpack("<I", frame[:4])
        body = frame[4:]
        assert len(body) == length
        assert body[0] == wire.WIRE_VERSION  # version byte leads the body
        kind, src, dst, epoch, tag, got = wire.decode_body(body)
        assert (kind, src, dst, epoch) == ("data", 2, 5, 7)
        assert tag == ("obj", "col", 3, 1)
        np.testing.assert_array_equal(got, payload.ravel())

    def test_payload_is_little_endian_f64(self):
        frame = wire.encode_data(1, 2, 0, ("x", "diag", 1, 1), np.array([1.0]))
        assert frame[-8:] == struct.pack("<d", 1.0)

    def test_control_frame_round_trip(self):
        obj = ("result", 3, {"k": np.arange(3)})
        kind, got = wire.decode_body(wire.encode_control(obj)[4:])
        assert kind == "control" and got[:2] == obj[:2]
        np.testing.assert_array_equal(got[2]["k"], obj[2]["k"])

    def test_version_mismatch_rejected(self):
        body = bytearray(wire.encode_control("x")[4:])
        body[0] = 99
        with pytest.raises(ValueError):
            wire.decode_body(bytes(body))


def _exercise(cl):
    """A fixed mixed workload whose collected results identify the backend."""
    rng = np.random.default_rng(2)
    n, m = 29, 6
    A = spd_matrix(n, seed=2)
    b = rng.standard_normal(n)
    V0 = rng.standard_normal((n, m))
    rows = distla.make_layout(n, cl.grid, h=2)
    cols = distla.make_layout(m, cl.grid, h=1)
    C = distla.distribute(cl, "C", A, "triangular", rows)
    L, _ = distla.distributed_cholesky(cl, C, "L")
    bd = distla.distribute(cl, "b", b, "vector", rows)
    u = distla.triangular_solve(cl, L, bd, "u", side="forward")
    x = distla.triangular_solve(cl, L, u, "x", side="back")
    Vd = distla.distribute(cl, "V0", V0, "rectangular", rows, cols)
    W = distla.triangular_solve(cl, L, Vd, "W", side="forward")
    S = distla.crossprod_self(cl, W, "S")
    w = distla.crossprod_mat_vec(cl, W, u, "w")
    z = distla.construct_rnorm_distributed(cl, "z", "vector", rows)
    lz = distla.mult_chol(cl, L, z, "lz")
    return {
        "L": distla.collect(cl, L),
        "x": distla.collect(cl, x),
        "S": distla.collect(cl, S),
        "w": distla.collect(cl, w),
        "lz": distla.collect(cl, lz),
        "logdet": distla.log_det_from_chol(cl, L),
        "ssq": distla.sum_squares(cl, u),
    }


@pytest.mark.slow
@pytest.mark.parametrize("P", [3, 6])
def test_socket_backend_bit_identical_to_in_process(cluster_factory, P):
    ref = _exercise(cluster_factory(P, backend="in-process", seed=13))
    got = _exercise(cluster_factory(P, backend="multi-process-socket",
                                    seed=13, blas_threads=1))
    for key, want in ref.items():
        if isinstance(want, float):
            assert got[key] == want, key
        else:
            np.testing.assert_array_equal(got[key], want, err_msg=key)


@pytest.mark.slow
def test_socket_backend_error_propagation(cluster_factory):
    from blockgp.errors import NotPositiveDefinite

    cl = cluster_factory(3, backend="multi-process-socket", blas_threads=1)
    with pytest.raises(NoSuchObject):
        cl.pull("missing", 2)
    layout = distla.make_layout(8, cl.grid, h=1)
    bad = distla.distribute(cl, "bad", -np.eye(8), "triangular", layout)
    with pytest.raises(NotPositiveDefinite):
        distla.distributed_cholesky(cl, bad, "Lbad")
    # the aborted collective must not poison the next one
    A = spd_matrix(8, seed=3)
    C = distla.distribute(cl, "C", A, "triangular", layout)
    L, _ = distla.distributed_cholesky(cl, C, "L")
    np.testing.assert_allclose(distla.collect(cl, L), np.linalg.cholesky(A),
                               atol=1e-12)
