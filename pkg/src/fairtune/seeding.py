"""Named random substreams derived from one integer seed."""
import zlib

import numpy as np


def rng_for(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for stream ``name`` under ``seed``; stable across processes."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode()), *map(int, extra)])
