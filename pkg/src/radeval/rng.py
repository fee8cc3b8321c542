"""Seedable random streams with hash-derived substreams.

Every stochastic routine takes an explicit seed and derives one substream
per independent task from (seed, task tags). Results are therefore
bit-reproducible for a fixed seed and independent of execution order or
worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, int):
        return tag & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *tags: int | str) -> np.random.Generator:
    """Generator for the substream identified by (seed, *tags)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
