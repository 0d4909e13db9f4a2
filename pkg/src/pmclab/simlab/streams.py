"""Seed substreams derived from a master seed and string labels.

Derivation uses a cryptographic hash of the labels rather than Python's
``hash`` so seeds are stable across processes and interpreter runs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels) -> int:
    """64-bit seed for ``labels`` under ``master_seed``."""
    text = "\x1f".join([str(int(master_seed))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def rng_for(master_seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *labels))
