"""Named random-stream derivation.

Every stochastic routine in the package derives its generator from a root
seed plus a tuple of string/int/float tags naming the component, purpose and
index of the stream.  Derivation is hash-based and platform independent, so
results never depend on call order, thread count or scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_word(tag) -> int:
    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed_sequence(root_seed: int, *tags) -> np.random.SeedSequence:
    """Build a SeedSequence from a root seed and a path of tags."""
    words = [int(root_seed) & 0xFFFFFFFF, (int(root_seed) >> 32) & 0xFFFFFFFF]
    words.extend(_tag_word(t) for t in tags)
    return np.random.SeedSequence(words)


def derive_rng(root_seed: int, *tags) -> np.random.Generator:
    """Generator on the stream named by ``tags`` under ``root_seed``."""
    return np.random.default_rng(derive_seed_sequence(root_seed, *tags))
