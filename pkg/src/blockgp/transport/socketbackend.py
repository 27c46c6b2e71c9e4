"""Multi-process backend: workers are subprocesses, messages go over TCP.

The master listens on a loopback socket and relays worker-to-worker data
frames (star topology); per-channel ordering is preserved because each
(src, dst) pair's traffic flows through a single TCP connection on each hop
and the relay forwards frames in arrival order.
"""

import queue
import socket
import subprocess
import sys
import threading

from ..errors import BackendUnavailable
from .base import Cluster
from .wire import decode_body, encode_control, encode_data, read_frame

_SPAWN_TIMEOUT = 60.0


class SocketCluster(Cluster):

    def __init__(self, grid, seed, blas_threads=None):
        super().__init__(grid, seed)
        self._socks = {}
        self._locks = {}
        self._res_q = {r: queue.SimpleQueue() for r in self._all()}
        self._procs = []
        try:
            self._listener = socket.create_server(("127.0.0.1", 0))
        except OSError as exc:
            raise BackendUnavailable(f"cannot open loopback socket: {exc}")
        port = self._listener.getsockname()[1]
        env = None
        if blas_threads is not None:
            import os
            env = dict(os.environ)
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                env[var] = str(blas_threads)
        for rank in self._all():
            self._procs.append(subprocess.Popen(
                [sys.executable, "-m", "blockgp.transport.socket_worker",
                 str(port), str(rank), str(grid.D), str(seed)], env=env))
        self._listener.settimeout(_SPAWN_TIMEOUT)
        try:
            pending = set(self._all())
            while pending:
                conn, _ = self._listener.accept()
                body = read_frame(conn)
                kind, hello = decode_body(body)
                assert kind == "control" and hello["kind"] == "hello"
                rank = hello["rank"]
                self._socks[rank] = conn
                self._locks[rank] = threading.Lock()
                pending.discard(rank)
        except (socket.timeout, AssertionError) as exc:
            self._kill()
            raise BackendUnavailable(f"worker handshake failed: {exc}")
        for rank in self._all():
            t = threading.Thread(target=self._reader, args=(rank,),
                                 daemon=True, name=f"blockgp-relay-{rank}")
            t.start()

    def _write(self, rank, frame):
        with self._locks[rank]:
            self._socks[rank].sendall(frame)

    def _reader(self, rank):
        sock = self._socks[rank]
        try:
            while True:
                body = read_frame(sock)
                if body is None:
                    return
                decoded = decode_body(body)
                if decoded[0] == "data":
                    _, src, dst, epoch, tag, payload = decoded
                    self._write(dst, encode_data(src, dst, epoch, tag, payload))
                    continue
                obj = decoded[1]
                if obj["kind"] == "result":
                    self._res_q[obj["rank"]].put(obj["value"])
                elif obj["kind"] == "abort":
                    frame = encode_control(obj)
                    for other in self._all():
                        if other != obj["src"]:
                            self._write(other, frame)
        except (ConnectionError, OSError):
            if self.state == "running":
                for q in self._res_q.values():
                    q.put(("err", rank, ConnectionError(
                        f"worker {rank} connection lost")))

    def _dispatch(self, targets, cmd):
        for t in targets:
            self._write(t, encode_control({"kind": "command", "cmd": cmd}))
        return [self._res_q[t].get() for t in targets]

    def _stop(self):
        for rank in list(self._socks):
            try:
                self._write(rank, encode_control(
                    {"kind": "command", "cmd": ("shutdown",)}))
            except OSError:
                pass
        for proc in self._procs:
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()
        for sock in self._socks.values():
            sock.close()
        self._listener.close()

    def _kill(self):
        for proc in self._procs:
            proc.kill()
        self._listener.close()
