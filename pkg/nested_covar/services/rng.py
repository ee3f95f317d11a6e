# nested_covar/services/rng.py
"""
Counter-based random streams.

Every draw is addressed by (root seed, stream tag, counter...) and produced
by a Philox generator keyed through numpy's SeedSequence, so a scenario or
an inner path is a pure function of its address and never of the order in
which work is scheduled.
"""
import enum
import hashlib
from typing import Union

import numpy as np


class Stream(enum.IntEnum):
    STAGE1_OUTER = 1
    STAGE1_INNER = 2
    STAGE2_OUTER = 3
    TUNING = 4
    TRAINING = 5
    REFERENCE = 6
    PROBE = 7
    REPLICATION = 8

    # Draw kinds within one address
    @staticmethod
    def normal_lane() -> int:
        return 0

    @staticmethod
    def uniform_lane() -> int:
        return 1


def _key(part: Union[int, str]) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    return int(part)


def seed_sequence(root: int, *keys: Union[int, str]) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(_key(k) for k in keys))


def generator(root: int, *keys: Union[int, str]) -> np.random.Generator:
    """Philox generator for the address (root, *keys)"""
    return np.random.Generator(np.random.Philox(seed_sequence(root, *keys)))


def derive_seed(root: int, *keys: Union[int, str]) -> int:
    """A 63-bit child root seed; used for (root, row key, replication) lineages"""
    state = seed_sequence(root, *keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def uniform_open(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms on (0, 1]"""
    return 1.0 - gen.random(size)
