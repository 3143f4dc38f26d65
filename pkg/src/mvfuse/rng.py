"""Named random streams fanned out from a single experiment seed.

Every component derives its generator as ``stream(seed, "name", ...)``, so
data synthesis, parameter init, augmentation draws, and evaluation masks are
independently reproducible from one config seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, *names) -> np.random.Generator:
    """Deterministic child generator for a named path under a root seed."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for name in names:
        entropy.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.default_rng(entropy)
