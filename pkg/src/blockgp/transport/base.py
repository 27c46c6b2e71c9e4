"""Backend-independent pieces of the worker runtime.

A cluster is P workers plus the master.  The master issues one collective at
a time; each collective runs a registered SPMD function on every worker.
Workers talk to each other only through tagged messages.  Every message
carries the collective's epoch so that leftovers from an aborted or finished
collective can never leak into the next one.
"""

import copy
import queue
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .. import registry
from ..errors import (BlockGPError, ClusterDown, NoSuchObject, WorkerFailure,
                      _CollectiveAborted)
from ..grid import ProcessGrid
from ..rng import StreamFamily

RUNTIME_OBJECT = ".runtime"

# phase labels used in message tags, in wire-encoding order
PHASES = ("diag", "col", "ps", "x", "gen")


@dataclass
class Message:
    """One tagged point-to-point payload.

    tag = (object name, phase label, block row I, block col J).  Messages
    between a fixed (src, dst, tag) triple are delivered in send order.
    """

    src: int
    dst: int
    tag: tuple
    payload: object = None
    epoch: int = 0
    kind: str = "data"  # "data" | "abort"


def copy_payload(x):
    if isinstance(x, np.ndarray):
        return np.array(x, copy=True)
    return copy.deepcopy(x)


class Mailbox:
    """Tag-matched blocking receive with epoch filtering."""

    def __init__(self):
        self._incoming = queue.SimpleQueue()
        self._stash = {}
        self._epoch = 0

    def put(self, msg):
        self._incoming.put(msg)

    def begin_epoch(self, epoch):
        self._stash.clear()
        self._epoch = epoch

    def get(self, src, tag):
        key = (src, tag)
        while True:
            buf = self._stash.get(key)
            if buf:
                return buf.popleft()
            msg = self._incoming.get()
            if msg.epoch < self._epoch:
                continue  # stale leftover from a previous collective
            if msg.kind == "abort":
                raise _CollectiveAborted("peer aborted the collective")
            self._stash.setdefault((msg.src, msg.tag), deque()).append(msg.payload)


@dataclass
class WorkerContext:
    """What an SPMD function sees on one worker."""

    rank: int
    coord: tuple
    grid: ProcessGrid
    store: dict
    streams: StreamFamily
    _send: object = None          # callable(dst_rank, tag, payload)
    _mailbox: Mailbox = None
    events: list = field(default_factory=list)
    events_enabled: bool = False

    def rank_of(self, coord):
        return self.grid.coord_to_rank(*coord)

    def send(self, dst, tag, payload):
        """Send to a rank or coordinate; the payload is copied, never shared."""
        if isinstance(dst, tuple):
            dst = self.rank_of(dst)
        self._send(dst, tag, payload)

    def recv(self, src, tag, shape=None):
        if isinstance(src, tuple):
            src = self.rank_of(src)
        payload = self._mailbox.get(src, tag)
        if shape is not None:
            payload = np.asarray(payload).reshape(shape)
        return payload

    def fetch(self, name):
        try:
            return self.store[name]
        except KeyError:
            raise NoSuchObject(name, self.rank) from None

    def normals(self, count):
        return self.streams.standard_normals(self.rank, count)

    def log_event(self, op, I, J):
        if self.events_enabled:
            self.events.append((time.monotonic_ns(), self.rank, op, I, J))


class WorkerCore:
    """Command execution shared by all backends; transport supplies delivery."""

    def __init__(self, rank, grid, seed, send_fn):
        self.rank = rank
        self.mailbox = Mailbox()
        self.epoch = 0
        coord = grid.rank_to_coord(rank)
        self.ctx = WorkerContext(
            rank=rank, coord=coord, grid=grid,
            store={RUNTIME_OBJECT: {"rank": rank, "coord": coord,
                                    "D": grid.D, "P": grid.P, "seed": seed}},
            streams=StreamFamily(seed),
            _send=send_fn, _mailbox=self.mailbox)
        self.abort_fn = None  # callable(), set by backend

    def handle(self, cmd):
        """Execute one master command; returns (status, value)."""
        op = cmd[0]
        try:
            if op == "collective":
                _, epoch, fn_id, kwargs = cmd
                return self._collective(epoch, fn_id, kwargs)
            if op == "push":
                self.ctx.store[cmd[1]] = cmd[2]
                return ("ok", None)
            if op == "pull":
                return ("ok", copy_payload(self.ctx.fetch(cmd[1])))
            if op == "ls":
                return ("ok", sorted(self.ctx.store))
            if op == "rm":
                self.ctx.store.pop(cmd[1], None)  # idempotent
                return ("ok", None)
            if op == "events":
                out, self.ctx.events = self.ctx.events, []
                return ("ok", out)
            if op == "set_events":
                self.ctx.events_enabled = cmd[1]
                return ("ok", None)
            raise BlockGPError(f"unknown command {op!r}")
        except Exception as exc:  # command errors never kill the worker loop
            return ("err", self.rank, exc)

    def _collective(self, epoch, fn_id, kwargs):
        self.epoch = epoch
        self.mailbox.begin_epoch(epoch)
        try:
            fn = registry.lookup(fn_id)
            return ("ok", fn(self.ctx, **kwargs))
        except _CollectiveAborted:
            return ("aborted", None)
        except Exception as exc:
            if self.abort_fn is not None:
                self.abort_fn()
            return ("err", self.rank, exc)


class Cluster:
    """Master-side handle; concrete backends implement _dispatch."""

    def __init__(self, grid, seed):
        self.grid = grid
        self.seed = seed
        self.state = "running"
        self.epoch = 0
        self.stats = {"collectives": 0}

    # -- backend hooks -------------------------------------------------
    def _dispatch(self, targets, cmd):
        """Send `cmd` to each target rank, return results in rank order."""
        raise NotImplementedError

    def _stop(self):
        raise NotImplementedError

    # -- public API ----------------------------------------------------
    @property
    def P(self):
        return self.grid.P

    def _check_up(self):
        if self.state != "running":
            raise ClusterDown("cluster has been shut down")

    def _all(self):
        return list(range(1, self.P + 1))

    def _gather(self, targets, cmd):
        self._check_up()
        results = self._dispatch(targets, cmd)
        err = None
        for status, *rest in results:
            if status == "err":
                rank, exc = rest
                if err is None or rank < err[0]:
                    err = (rank, exc)
        if err is not None:
            rank, exc = err
            if isinstance(exc, BlockGPError):
                raise exc
            raise WorkerFailure(rank, exc)
        return [rest[0] for status, *rest in results]

    def run(self, fn_id, **kwargs):
        """Run a registered SPMD function on every worker; returns per-rank results."""
        self._check_up()
        self.epoch += 1
        self.stats["collectives"] += 1
        return self._gather(self._all(), ("collective", self.epoch, fn_id, kwargs))

    def push(self, name, value, targets=None):
        targets = targets or self._all()
        for t in targets:
            self._gather([t], ("push", name, copy_payload(value)))

    def scatter(self, name, per_rank_values):
        """Store a different value under the same name on each rank."""
        for rank, value in per_rank_values.items():
            self._gather([rank], ("push", name, copy_payload(value)))

    def pull(self, name, source):
        return self._gather([source], ("pull", name))[0]

    def remote_ls(self, rank):
        return self._gather([rank], ("ls",))[0]

    def remote_rm(self, name, targets=None):
        self._gather(targets or self._all(), ("rm", name))

    def remote_apply(self, fn_id, input_names, output_name):
        """output = fn(inputs...) on each worker's local pieces."""
        if isinstance(input_names, str):
            input_names = [input_names]
        self.run("core.apply", op_id=fn_id, input_names=list(input_names),
                 output_name=output_name)

    def set_events(self, enabled):
        self._gather(self._all(), ("set_events", bool(enabled)))

    def drain_events(self):
        """Collect and clear all worker event logs, merged in time order."""
        per_rank = self._gather(self._all(), ("events",))
        merged = [e for evs in per_rank for e in evs]
        merged.sort()
        return merged

    def shutdown(self):
        if self.state == "running":
            self.state = "shutting-down"
            self._stop()
            self.state = "shutdown"


@registry.register("core.apply")
def _apply(ctx, op_id, input_names, output_name):
    fn = registry.lookup(op_id)
    inputs = [ctx.fetch(n) for n in input_names]
    ctx.store[output_name] = fn(*inputs)
