"""Binary tensor-table checkpoint format.

Layout (all integers unsigned 64-bit little-endian, reals float64
little-endian, C order):

    magic "DMF1"
    tensor count
    per tensor: name length, UTF-8 name, rank, dims, data

Tensors are written in sorted name order so identical tables produce
byte-identical files.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"DMF1"


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write a name->array table atomically (write then rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.astype("<f8").tobytes())
    os.replace(tmp, path)


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {blob[:4]!r}")
    offset = 4

    def read_u64():
        nonlocal offset
        if offset + 8 > len(blob):
            raise CheckpointError(f"{path}: truncated file")
        (value,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        return value

    count = read_u64()
    out = {}
    for _ in range(count):
        name_len = read_u64()
        if offset + name_len > len(blob):
            raise CheckpointError(f"{path}: truncated name")
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        rank = read_u64()
        shape = tuple(read_u64() for _ in range(rank))
        n_elem = int(np.prod(shape, dtype=np.int64))
        if offset + 8 * n_elem > len(blob):
            raise CheckpointError(f"{path}: truncated data for {name!r}")
        arr = np.frombuffer(blob, dtype="<f8", count=n_elem, offset=offset)
        offset += 8 * n_elem
        out[name] = arr.reshape(shape).astype(np.float64)
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return out
