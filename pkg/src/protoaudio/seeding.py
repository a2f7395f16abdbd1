"""Stable seed derivation.

Sub-seeds come from SHA-256 over the textual parts, so adding a new
experiment or episode never perturbs the streams of existing ones and the
same inputs give the same streams on any platform or run.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]


def derive_seed(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
