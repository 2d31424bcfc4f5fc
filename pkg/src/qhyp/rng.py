"""Counter-based random streams keyed by (seed, trajectory, channel).

Every trajectory owns its own Philox stream, so a record depends only on its
stream id and never on how trajectories are scheduled across workers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

COUNTING_CHANNEL = 0
HOMODYNE_CHANNEL = 1

_TWO_M53 = 2.0**-53


def stream(seed: int, *ids: int) -> np.random.Philox:
    if seed < 0 or any(i < 0 for i in ids):
        raise ValueError("stream ids must be non-negative integers")
    return np.random.Philox(np.random.SeedSequence([int(seed), *map(int, ids)]))


def uniforms(bitgen: np.random.Philox, n: int) -> np.ndarray:
    """n uniforms in the open interval (0, 1) built from the top 53 bits of each raw draw."""
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def normals(bitgen: np.random.Philox, n: int) -> np.ndarray:
    """Standard normals by inverse CDF, one raw 64-bit draw per variate."""
    return ndtri(uniforms(bitgen, n))


class TrajectoryNoise:
    """Noise for a batch of trajectories, served in time blocks."""

    def __init__(self, seed: int, ids: list[tuple[int, ...]], counting: bool, homodyne: bool):
        self._count = [stream(seed, *i, COUNTING_CHANNEL) for i in ids] if counting else None
        self._hom = [stream(seed, *i, HOMODYNE_CHANNEL) for i in ids] if homodyne else None

    def block(self, n: int) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Arrays of shape (n, batch): uniforms for counting, normals for homodyne."""
        u = np.stack([uniforms(g, n) for g in self._count], axis=1) if self._count else None
        z = np.stack([normals(g, n) for g in self._hom], axis=1) if self._hom else None
        return u, z
