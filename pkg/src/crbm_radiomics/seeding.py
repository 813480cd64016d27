"""Deterministic RNG derivation.

Every stochastic operation in the package draws from a generator obtained
through :func:`derive_rng`.  A top-level integer seed plus a sequence of
string/int tokens (component name, epoch, sample index, ...) maps to an
independent, reproducible stream.  Nothing reads global RNG state.
"""

import hashlib

import numpy as np


def _token_key(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(str(token).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, *tokens) -> np.random.Generator:
    """Generator for stream (seed, *tokens); identical inputs give identical streams."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_token_key(t) for t in tokens]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *tokens) -> int:
    """Integer sub-seed for components that take a seed rather than a stream."""
    return int(derive_rng(seed, *tokens).integers(0, 1 << 63))
