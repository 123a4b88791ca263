"""Counter-based random streams keyed by (seed, purpose, index).

Every randomized step draws from its own Philox stream so results do not
depend on the order in which independent pieces of work are executed.
"""
import zlib

import numpy as np


def purpose_id(purpose):
    return zlib.crc32(purpose.encode("utf-8"))


def keyed_rng(seed, purpose, index=0):
    """Return a ``numpy.random.Generator`` for one (seed, purpose, index) key."""
    seq = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(purpose_id(purpose), int(index)),
    )
    return np.random.Generator(np.random.Philox(seq))
