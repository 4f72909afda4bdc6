"""Binary parameter checkpoints.

Layout (all integers little-endian, documented in the README):

    bytes 0-7   magic b"SFCKPT01" (format + version in one token)
    bytes 8-11  uint32 tensor count
    per tensor:
        uint16  name length, then that many UTF-8 bytes
        uint8   rank
        rank *  uint32 dimension sizes
        prod(dims) * float64 little-endian values, C order

Entries are written in the order given, so checkpoints of the same model
are byte-identical across runs.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SFCKPT01"


def save_checkpoint(named_arrays, path):
    """Write (name, array-or-Tensor) pairs; accepts a dict or an iterable."""
    if isinstance(named_arrays, dict):
        items = list(named_arrays.items())
    else:
        items = list(named_arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(items)))
        for name, value in items:
            # np.ascontiguousarray would promote rank-0 arrays to rank 1;
            # order="C" enforces contiguity without touching the rank.
            arr = np.asarray(getattr(value, "data", value), dtype="<f8", order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into an ordered dict of float64 arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    offset = 8
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        out[name] = values.reshape(dims).astype(np.float64)
    return out
