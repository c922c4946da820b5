"""Deterministic sub-seed derivation from one master seed."""
from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str) -> int:
    """Stable 64-bit sub-seed for a named pipeline stage.

    Hash-based so it never depends on RNG library internals; the same
    (master, label) pair yields the same seed on any platform.
    """
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
