"""Reproducible per-rank random streams.

Each rank gets a counter-based Philox stream keyed by (master seed, rank), so
stream creation is O(1), ranks are independent by construction, and the same
(seed, P) yields bit-identical draws on every run and backend.  Normal
deviates come from the inverse normal CDF applied to the uniform stream,
which is bit-stable across platforms.
"""

import numpy as np
from scipy.special import ndtri

from .errors import StreamsUninitialized

_TINY = 2.0 ** -54  # replaces an exact 0.0 uniform so ndtri stays finite


class RankStream:
    """Sequential N(0,1) stream for one rank."""

    def __init__(self, master_seed, rank):
        key = (int(master_seed) << 64) + int(rank)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normals(self, count):
        u = self._gen.random(int(count))
        u[u == 0.0] = _TINY
        return ndtri(u)


class StreamFamily:
    """Lazily-created per-rank streams under one master seed."""

    def __init__(self, master_seed=None):
        self.master_seed = master_seed
        self._streams = {}

    def stream(self, rank):
        if self.master_seed is None:
            raise StreamsUninitialized("no master seed installed")
        if rank not in self._streams:
            self._streams[rank] = RankStream(self.master_seed, rank)
        return self._streams[rank]

    def standard_normals(self, rank, count):
        return self.stream(rank).standard_normals(count)
