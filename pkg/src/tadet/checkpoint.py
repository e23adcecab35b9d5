"""Binary checkpoint container for named tensors.

Layout (all integers little-endian u32, scalars little-endian float32):

    magic "TADW" | format version | entry count
    per entry: name length | UTF-8 name | rank | extents... | row-major data
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TADW"
VERSION = 1

_MAX_EXTENT = 2**31


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, entries: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(entries))]
    for name, arr in entries.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 12:
        raise CheckpointError("truncated header")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    pos = 12
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        if pos + 4 > len(blob):
            raise CheckpointError("truncated entry header")
        (name_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + name_len > len(blob):
            raise CheckpointError("truncated entry name")
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        if pos + 4 > len(blob):
            raise CheckpointError("truncated entry rank")
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + 4 * rank > len(blob):
            raise CheckpointError("truncated entry extents")
        extents = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        n = 1
        for e in extents:
            if e > _MAX_EXTENT:
                raise CheckpointError(f"extent overflow in entry {name!r}: {e}")
            n *= e
            if n > _MAX_EXTENT:
                raise CheckpointError(f"extent overflow in entry {name!r}")
        nbytes = 4 * n
        if pos + nbytes > len(blob):
            raise CheckpointError(f"truncated payload for entry {name!r}")
        data = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(extents)
        pos += nbytes
        entries[name] = data.copy()
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last entry")
    return entries
