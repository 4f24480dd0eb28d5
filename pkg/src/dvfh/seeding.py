"""Deterministic seed splitting.

All randomness in experiments flows from one master seed through counted
tags, so a trial's generator depends only on (seed, tags) and never on how
trials are scheduled across workers.  String seeding of ``random.Random``
hashes via SHA-512, which is stable across runs, platforms and processes.
"""

from __future__ import annotations

import random


def spawn_rng(seed: int, *tags: object) -> random.Random:
    """Child generator for the given master seed and tag path."""
    return random.Random("/".join([str(seed), *map(str, tags)]))
