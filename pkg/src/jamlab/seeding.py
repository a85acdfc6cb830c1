"""Deterministic seed derivation.

All randomness in the package flows from a single master seed through
`derive_seed`, so that every window, client, and round gets its own
independent, schedule-independent stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts) -> int:
    """Derive a 64-bit child seed from a master seed and a structured key.

    Stable across platforms and processes (pure bytes hashing, no PYTHONHASHSEED
    dependence). Parts may be ints or strings.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little")


def rng_from(master: int, *parts) -> np.random.Generator:
    """A fresh PCG64 generator keyed by (master, *parts)."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *parts)))
