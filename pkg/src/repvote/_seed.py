"""Splittable seeding: master seed XOR a stable hash of the cell key.

Any subset of a sweep reproduces independently because every cell's generator
seed depends only on (master seed, cell key parts), never on evaluation order.
Built on sha256, not Python's salted hash().
"""

from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, *parts: object) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return (master_seed ^ int.from_bytes(digest[:8], "big")) & (2**63 - 1)
