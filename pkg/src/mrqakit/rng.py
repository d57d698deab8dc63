"""Keyed, counter-based randomness.

Every random decision in the toolkit is derived from (seed, purpose, uid)
so that per-item decisions do not depend on iteration order or worker
count, and repeated runs with the same seed are reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def _digest(seed: int, purpose: str, uid: str, size: int) -> bytes:
    h = hashlib.blake2b(digest_size=size)
    h.update(str(seed).encode("utf-8"))
    h.update(_SEP)
    h.update(purpose.encode("utf-8"))
    h.update(_SEP)
    h.update(uid.encode("utf-8"))
    return h.digest()


def keyed_unit(seed: int, purpose: str, uid: str) -> float:
    """Uniform float in [0, 1) as a pure function of (seed, purpose, uid)."""
    raw = int.from_bytes(_digest(seed, purpose, uid, 8), "little")
    return (raw >> 11) / float(1 << 53)


def keyed_generator(seed: int, purpose: str, uid: str = "") -> np.random.Generator:
    """Philox generator keyed by (seed, purpose, uid).

    Philox is counter-based: streams for distinct keys are independent, so
    generators for different purposes or items never collide.
    """
    key = int.from_bytes(_digest(seed, purpose, uid, 16), "little")
    return np.random.Generator(np.random.Philox(key=key))
