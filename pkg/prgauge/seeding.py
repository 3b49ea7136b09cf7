import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _entropy(base: int, keys: tuple) -> list:
    words = [int(base) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            words.append(zlib.crc32(key.encode("utf-8")))
        else:
            words.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    return words


def substream(base: int, *keys: Key) -> np.random.Generator:
    """Independent generator for (base seed, keys); the same keys always give the same stream."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(base, keys)))


def derive_seed(base: int, *keys: Key) -> int:
    return int(np.random.SeedSequence(_entropy(base, keys)).generate_state(1, dtype=np.uint32)[0])
