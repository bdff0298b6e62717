"""Binary checkpoint container: name -> (shape, flat float64 payload).

Layout (little-endian, no padding, entries in insertion order):

    magic   8 bytes  b"CTXCKPT1"
    count   uint32
    entry*  { name_len uint16, name utf-8, ndim uint8,
              shape int64[ndim], data float64[prod(shape)] }

The format contains no timestamps or platform metadata, so writing the same
arrays twice produces byte-identical files.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"CTXCKPT1"


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays):
    """Write a dict of name -> ndarray (cast to float64) to path."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_arrays(path):
    """Read a checkpoint file back into a dict of name -> float64 ndarray."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}q", blob, off)
        off += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        out[name] = arr.copy()
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return out
