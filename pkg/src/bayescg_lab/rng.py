"""Reproducible random streams.

Every random quantity in the lab flows from a single 64-bit seed through a
named stream.  A stream is a Philox counter-based generator keyed by
``(seed, fnv1a64(label))``, so any experiment can be replayed from its
``(seed, label)`` pair alone, and independent replications get provably
disjoint streams by labeling them ``"<stream>/<index>"``.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def label_hash(label: str) -> int:
    """FNV-1a hash of a stream label, reduced to 64 bits."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def stream(seed: int, label: str) -> np.random.Generator:
    """Generator for the named stream under the given top-level seed."""
    key = np.array([np.uint64(seed & _MASK64), np.uint64(label_hash(label))], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substream(seed: int, label: str, index: int) -> np.random.Generator:
    """Stream for one replication: equivalent to ``stream(seed, f"{label}/{index}")``."""
    return stream(seed, f"{label}/{index}")
