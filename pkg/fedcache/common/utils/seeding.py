import zlib

import numpy as np


def derive_seed(seed: int, *keys: int | str) -> int:
    """
    Derive a child seed from a base seed and a path of keys.

    String keys are hashed with CRC32 so that named streams (policies, stages) map to stable integers on every
    platform.

    Args:
        seed (int): The base seed.
        *keys (int | str): The path identifying the child stream, e.g. `(round, client_id)`.

    Returns:
        int: A 64-bit seed unique to `(seed, *keys)`.
    """
    entropy = [seed] + [zlib.crc32(key.encode()) if isinstance(key, str) else int(key) for key in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """
    Create an independent random generator for `(seed, *keys)`.

    Args:
        seed (int): The base seed.
        *keys (int | str): The path identifying the child stream.

    Returns:
        np.random.Generator: A PCG64 generator seeded from the derived seed sequence.
    """
    return np.random.default_rng(derive_seed(seed, *keys))
