"""Frame encoding for the socket backend.

Every frame is length-prefixed (u32 little-endian byte count) and its body
leads with a version byte.  Data frames carry one tagged block message with a
little-endian float64 payload:

    version u8 | type u8 (0=data) | src u32 | dst u32 | epoch u32 |
    name_len u32 | name bytes | phase u32 | I u32 | J u32 | payload f64[]

Control frames (type 1) carry a pickled command/result/abort object and are a
backend-internal extension; block data never travels through them.
"""

import pickle
import struct

import numpy as np

from .base import PHASES

WIRE_VERSION = 1
TYPE_DATA = 0
TYPE_CONTROL = 1

_HEAD = struct.Struct("<BBIII")   # version, type, src, dst, epoch
_U32 = struct.Struct("<I")
_TAG_TAIL = struct.Struct("<III")  # phase, I, J


def encode_data(src, dst, epoch, tag, payload):
    name, phase, I, J = tag
    name_b = name.encode("utf-8")
    buf = np.ascontiguousarray(np.asarray(payload, dtype="<f8").ravel())
    body = b"".join([
        _HEAD.pack(WIRE_VERSION, TYPE_DATA, src, dst, epoch),
        _U32.pack(len(name_b)), name_b,
        _TAG_TAIL.pack(PHASES.index(phase), I, J),
        buf.tobytes(),
    ])
    return _U32.pack(len(body)) + body


def encode_control(obj):
    body = _HEAD.pack(WIRE_VERSION, TYPE_CONTROL, 0, 0, 0) + pickle.dumps(obj)
    return _U32.pack(len(body)) + body


def decode_body(body):
    """Returns ("data", src, dst, epoch, tag, payload) or ("control", obj)."""
    version, ftype, src, dst, epoch = _HEAD.unpack_from(body, 0)
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported wire version {version}")
    off = _HEAD.size
    if ftype == TYPE_CONTROL:
        return ("control", pickle.loads(body[off:]))
    (name_len,) = _U32.unpack_from(body, off)
    off += _U32.size
    name = body[off:off + name_len].decode("utf-8")
    off += name_len
    phase_idx, I, J = _TAG_TAIL.unpack_from(body, off)
    off += _TAG_TAIL.size
    payload = np.frombuffer(body[off:], dtype="<f8").copy()
    return ("data", src, dst, epoch, (name, PHASES[phase_idx], I, J), payload)


def read_frame(sock):
    """Read one frame body from a socket; None on orderly EOF."""
    head = _read_exact(sock, 4)
    if head is None:
        return None
    (length,) = _U32.unpack(head)
    body = _read_exact(sock, length)
    if body is None:
        raise ConnectionError("truncated frame")
    return body


def _read_exact(sock, count):
    chunks = []
    got = 0
    while got < count:
        chunk = sock.recv(count - got)
        if not chunk:
            if got == 0:
                return None
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)
