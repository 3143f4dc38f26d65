"""Missing-data augmentation generators.

Three families: enumerating every non-empty view combination (the core
augmentation of this engine), dropping whole views at random, and dropping
random time steps of a series. All generators are pure functions of their
inputs and the supplied generator, so training stays reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

AUG_KINDS = ("none", "com", "sensd", "tempd")
AUG_LEVELS = ("input", "feature")


@dataclass(frozen=True)
class AugPolicy:
    kind: str = "none"
    level: str = "feature"
    tempd_ratio: float = 0.3

    def __post_init__(self):
        if self.kind not in AUG_KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if self.level not in AUG_LEVELS:
            raise ValueError(f"unknown augmentation level {self.level!r}")
        if not 0.0 <= self.tempd_ratio < 1.0:
            raise ValueError("tempd_ratio must be in [0, 1)")


def enumerate_combinations(views) -> list[tuple]:
    """All non-empty view subsets, largest first, then lexicographic.

    ``views`` is a view count or a sequence of view identifiers. The order is
    deterministic so training runs are reproducible; the combination loss is
    order invariant, so the choice costs nothing.
    """
    items: Sequence = range(views) if isinstance(views, int) else list(views)
    m = len(items)
    if m < 1:
        raise ValueError("need at least one view")
    out: list[tuple] = []
    for size in range(m, 0, -1):
        out.extend(combinations(items, size))
    return out


def sensd_mask(m: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Drop each view independently with probability 1/2, rejecting the empty set."""
    if m < 1:
        raise ValueError("need at least one view")
    while True:
        keep = rng.random(m) < 0.5
        if keep.any():
            return tuple(int(i) for i in np.flatnonzero(keep))


def tempd_mask(series: np.ndarray, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Zero out floor(ratio*T) uniformly chosen time steps of a (T, c) series."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must be in [0, 1)")
    arr = np.array(series, dtype=np.float64)
    T = arr.shape[0]
    n_drop = int(ratio * T)
    if n_drop == 0:
        return arr
    drop = rng.choice(T, size=n_drop, replace=False)
    arr[drop] = 0.0
    return arr
