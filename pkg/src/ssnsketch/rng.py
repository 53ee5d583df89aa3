"""Seeded random streams.

Every consumer of randomness asks for a child stream keyed by ``(seed, *labels)``.
Streams are Philox (counter-based) generators whose 128-bit key is a hash of the
seed and the labels, so independent replications never share state and a run can
be reproduced from its seed alone.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_key(seed: int, *labels) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed) & _MASK64).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def derive_seed(seed: int, *labels) -> int:
    """A 64-bit child seed, for handing to components that take a plain seed."""
    return derive_key(seed, *labels) & _MASK64


def stream(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *labels)))
