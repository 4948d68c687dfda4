"""Deterministic seed derivation shared by experiments and samplers."""

import hashlib


def hash64(*parts) -> int:
    """Stable 64-bit hash of a tuple of ints/strings (blake2b of their repr)."""
    digest = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
