"""Named, splittable random streams.

Every stochastic choice in the project draws from a stream derived from
(seed, *path) where path is a tuple of strings/ints naming the consumer,
e.g. stream(7, "init", "enc/c0/w") or stream(7, "eps", 1234).  Streams are
counter-based (Philox) and independent of call order, which is what makes
whole runs bit-reproducible and lets a resumed run re-derive the exact
noise of iteration k without replaying iterations 0..k-1.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *path) -> int:
    """128-bit key for (seed, *path), via SHA-256 of a canonical encoding."""
    h = hashlib.sha256()
    h.update(b"dsaa-rng-v1")
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for part in path:
        if isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(8, "little", signed=True))
        elif isinstance(part, str):
            b = part.encode("utf-8")
            h.update(b"s" + len(b).to_bytes(4, "little") + b)
        else:
            raise TypeError(f"stream path parts must be str or int, got {type(part)!r}")
    return int.from_bytes(h.digest()[:16], "little")


def stream(seed: int, *path) -> np.random.Generator:
    """Independent Generator for (seed, *path)."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))
