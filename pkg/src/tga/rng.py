"""Named random substreams derived from a single top-level seed."""

import hashlib

import numpy as np


def _key_words(key) -> list[int]:
    if isinstance(key, (int, np.integer)) and key >= 0:
        return [int(key) & 0xFFFFFFFF, int(key) >> 32 & 0xFFFFFFFF]
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return [int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little")]


def substream(seed: int, *keys) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *keys)``.

    Keys may be non-negative ints or anything with a stable ``str``. The same
    arguments always give the same stream, independent of call order.
    """
    entropy = [int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF]
    for key in keys:
        entropy.extend(_key_words(key))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
