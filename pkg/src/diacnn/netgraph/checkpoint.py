"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic        4 bytes  b"DCNN"
    version      u32      FORMAT_VERSION
    desc_len     u32      length of the architecture descriptor
    descriptor   bytes    UTF-8 JSON of ModelSpec.to_dict()
    n_arrays     u32
    n_arrays x:
        name_len u16, name (UTF-8)
        role     u8       0 = parameter, 1 = batch-norm buffer
        trainable u8      0 / 1 (always 0 for buffers)
        rank     u8
        dims     rank x u32
        count    u64      number of float32 elements that follow
        payload  count x float32

The whole file is parsed before anything is returned, so a failed load
never yields a partially populated store.
"""

from __future__ import annotations

import os
import struct
import tempfile
from typing import NamedTuple

import numpy as np

from diacnn.netgraph.graph import ModelSpec
from diacnn.netgraph.params import Param, ParamStore, validate_params
from diacnn.tensor import Tensor

MAGIC = b"DCNN"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class PayloadMismatchError(CheckpointError):
    """Declared dims disagree with the payload element count."""


class Checkpoint(NamedTuple):
    model: ModelSpec
    params: ParamStore


def to_bytes(model: ModelSpec, params: ParamStore) -> bytes:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    desc = model.to_json().encode("utf-8")
    chunks += [struct.pack("<I", len(desc)), desc]
    entries = [(k, 0, p.trainable, p.data) for k, p in params.params.items()]
    entries += [(k, 1, False, v) for k, v in params.buffers.items()]
    chunks.append(struct.pack("<I", len(entries)))
    for name, role, trainable, arr in entries:
        nb = name.encode("utf-8")
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BBB", role, int(bool(trainable)), arr32.ndim))
        chunks.append(struct.pack(f"<{arr32.ndim}I", *arr32.shape))
        chunks.append(struct.pack("<Q", arr32.size))
        chunks.append(arr32.tobytes())
    return b"".join(chunks)


def save_checkpoint(model: ModelSpec, params: ParamStore, path) -> None:
    """Write atomically (temp file + rename). Arrays are stored as float32."""
    data = to_bytes(model, params)
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(f"truncated checkpoint: need {n} bytes at offset {self.pos}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def from_bytes(buf: bytes) -> Checkpoint:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("bad magic: not a DCNN checkpoint")
    r = _Reader(buf)
    r.take(4)
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {FORMAT_VERSION}")
    (dlen,) = r.unpack("<I")
    model = ModelSpec.from_json(r.take(dlen).decode("utf-8"))
    (n,) = r.unpack("<I")
    params: dict[str, Param] = {}
    buffers: dict[str, np.ndarray] = {}
    for _ in range(n):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        role, trainable, rank = r.unpack("<BBB")
        dims = r.unpack(f"<{rank}I") if rank else ()
        (count,) = r.unpack("<Q")
        if int(np.prod(dims, dtype=np.int64)) != count:
            raise PayloadMismatchError(f"{name}: dims {dims} disagree with payload length {count}")
        arr = np.frombuffer(r.take(4 * count), dtype="<f4").astype(np.float32).reshape(dims)
        if role == 0:
            params[name] = Param(Tensor(arr, requires_grad=True), bool(trainable))
        else:
            buffers[name] = arr
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after last array")
    store = ParamStore(params, buffers)
    validate_params(model, store)
    return Checkpoint(model, store)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
