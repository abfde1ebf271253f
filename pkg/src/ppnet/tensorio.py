"""PPNT binary tensor container for feature files and checkpoints.

Single tensor::

    b"PPNT" | u32 version | u32 rank | u32 extent * rank | f32 value * prod(extents)

Checkpoint (named tensors)::

    b"PPNT" | u32 version | u32 count | count * (u32 name_len | utf-8 name | u32 rank | extents | values)

All integers and floats are little-endian; values are row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ppnet.errors import TensorFormatError

MAGIC = b"PPNT"
VERSION = 1


def _encode(arr) -> bytes:
    arr = np.asarray(arr)
    if any(d < 1 for d in arr.shape):
        raise TensorFormatError(f"extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TensorFormatError("tensor holds non-finite values")
    head = struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return head + np.ascontiguousarray(arr, dtype="<f4").tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TensorFormatError("truncated tensor file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def header(self) -> None:
        if self.take(4) != MAGIC:
            raise TensorFormatError("bad magic; not a PPNT file")
        version = self.u32()
        if version != VERSION:
            raise TensorFormatError(f"unsupported PPNT version {version}")

    def tensor(self) -> np.ndarray:
        rank = self.u32()
        if rank > 32:
            raise TensorFormatError(f"implausible rank {rank}")
        dims = tuple(self.u32() for _ in range(rank))
        if any(d < 1 for d in dims):
            raise TensorFormatError(f"non-positive extent in {dims}")
        count = int(np.prod(dims, dtype=np.int64))
        return np.frombuffer(self.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise TensorFormatError(f"{len(self.data) - self.pos} trailing bytes")


def tensor_bytes(arr) -> bytes:
    return MAGIC + struct.pack("<I", VERSION) + _encode(arr)


def write_tensor(path, arr) -> None:
    Path(path).write_bytes(tensor_bytes(arr))


def read_tensor(path) -> np.ndarray:
    r = _Reader(Path(path).read_bytes())
    r.header()
    arr = r.tensor()
    r.done()
    return arr


def write_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(_encode(arr))
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path) -> dict[str, np.ndarray]:
    r = _Reader(Path(path).read_bytes())
    r.header()
    out: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        try:
            name = r.take(r.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TensorFormatError("tensor name is not UTF-8") from exc
        if name in out:
            raise TensorFormatError(f"duplicate tensor name {name!r}")
        out[name] = r.tensor()
    r.done()
    return out
