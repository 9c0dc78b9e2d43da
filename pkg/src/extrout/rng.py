"""Named deterministic randomness streams.

One experiment owns one root seed; every consumer (placement, links,
protocol choices, attacker guesses, repetition k) derives its own stream
from the root seed plus a label, so adding a consumer never shifts the
draws of another.
"""

from __future__ import annotations

import hashlib
import random


def child_seed(seed: int, label: str) -> int:
    """Stable 64-bit seed for the sub-stream `label` of root `seed`."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, label: str) -> random.Random:
    return random.Random(child_seed(seed, label))
