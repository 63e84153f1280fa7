"""Deterministic seed fan-out: independent child streams from (master seed, task path).

Child streams are derived with numpy's ``SeedSequence`` using a spawn key built
from the SHA-256 digest of each task-path component.  Adding new tasks (extra
strategies, more chains) therefore never perturbs the randomness of existing
ones, and any child can be reproduced standalone from its integer seed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_sequence(master: int, *path) -> np.random.SeedSequence:
    """SeedSequence for a task path; distinct paths give independent streams."""
    words: list[int] = []
    for part in path:
        digest = hashlib.sha256(repr(part).encode("utf-8")).digest()
        words.extend(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(words))


def spawn_rng(master: int, *path) -> np.random.Generator:
    """Generator seeded from (master, task path)."""
    return np.random.default_rng(seed_sequence(master, *path))


def child_seed(master: int, *path) -> int:
    """63-bit integer seed for the task path, usable to rerun a child standalone."""
    return int(seed_sequence(master, *path).generate_state(1, np.uint64)[0] >> np.uint64(1))
