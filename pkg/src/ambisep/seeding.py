"""Stable seed derivation. All randomness in a run flows from one master seed."""
import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Hash ``parts`` (ints/strings) into a 64-bit seed, stable across processes."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def rng_for(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
