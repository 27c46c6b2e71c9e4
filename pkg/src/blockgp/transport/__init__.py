"""Worker runtime: cluster spawning, messaging, and remote object stores."""

from ..errors import BackendUnavailable
from ..grid import grid_from_process_count
from .base import Cluster, Message, WorkerContext

BACKENDS = ("in-process", "multi-process-socket")


def spawn(P, backend="in-process", seed=0, blas_threads=None):
    """Start P workers plus the master and return the Cluster handle.

    P must be a triangular number D(D+1)/2.  The in-process backend runs each
    worker on its own thread with deep-copied message payloads; the socket
    backend spawns subprocesses connected over loopback TCP.
    """
    grid = grid_from_process_count(P)
    if backend == "in-process":
        from .inprocess import InProcessCluster
        return InProcessCluster(grid, seed)
    if backend == "multi-process-socket":
        from .socketbackend import SocketCluster
        return SocketCluster(grid, seed, blas_threads=blas_threads)
    raise BackendUnavailable(f"unknown backend {backend!r}; "
                             f"expected one of {BACKENDS}")


__all__ = ["spawn", "Cluster", "Message", "WorkerContext", "BACKENDS"]
