"""Deterministic RNG substreams.

Every random decision in the engine flows from one user-facing seed through a
named substream (split, kmeans, sampling, random-strategy, ...), so changing
how one stage consumes randomness cannot perturb any other stage.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 63) - 1


def _label_words(labels: tuple) -> list[int]:
    tag = "/".join(str(x) for x in labels)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream named by ``labels`` under ``seed``."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & _MASK, *_label_words(labels)])
    )


def derive_seed(seed: int, *labels) -> int:
    """Stable integer seed for the substream named by ``labels``."""
    entropy = np.random.SeedSequence([int(seed) & _MASK, *_label_words(labels)])
    return int(entropy.generate_state(1, np.uint64)[0] & _MASK)
