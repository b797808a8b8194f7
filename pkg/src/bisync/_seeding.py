"""Order-independent seed derivation shared by every stochastic component."""

import hashlib

import numpy as np


def derive_seed(*keys) -> int:
    """Stable 64-bit seed from any tuple of ints/strings."""
    digest = hashlib.blake2b(repr(keys).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def item_rng(*keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
