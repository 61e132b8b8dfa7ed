"""Versioned binary array container.

Layout: the 5-byte magic b"DSAA1", then one record per array:

    uint32 LE   name length in bytes
    bytes       name, utf-8
    uint8       dtype tag: 0 = float64, 1 = float32
    uint32 LE   rank
    uint32 LE   per dimension
    bytes       raw array data, C order, little endian

Records run to end of file. Writing is deterministic (insertion order of
the dict), so equal state produces byte-identical files.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"DSAA1"
_TAGS = {np.dtype("<f8"): 0, np.dtype("<f4"): 1}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            if arr.dtype.newbyteorder("<") not in _TAGS:
                raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", _TAGS[le.dtype.newbyteorder('<')]))
            f.write(struct.pack("<I", le.ndim))
            for d in le.shape:
                f.write(struct.pack("<I", d))
            f.write(le.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if f.read(5) != MAGIC:
            raise ValueError(f"{path}: bad magic, not a DSAA1 container")
        while True:
            head = f.read(4)
            if not head:
                break
            (nlen,) = struct.unpack("<I", head)
            name = f.read(nlen).decode("utf-8")
            (tag,) = struct.unpack("<B", f.read(1))
            if tag not in _DTYPES:
                raise ValueError(f"{path}: unknown dtype tag {tag} for {name!r}")
            (rank,) = struct.unpack("<I", f.read(4))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(rank))
            dt = _DTYPES[tag]
            n = int(np.prod(shape)) if shape else 1
            raw = f.read(n * dt.itemsize)
            if len(raw) != n * dt.itemsize:
                raise ValueError(f"{path}: truncated record for {name!r}")
            out[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    return out
