"""Normalized multi-hash item embedding.

An item is mapped to d1 positions of a shared value table by d1 seeded hash
functions; the gathered values are L1-normalized into a positive vector that
sums to one. Because the lookups are hash-driven, the embedding distribution
is identical across item domains (verified numerically in the theory module).
"""

from __future__ import annotations

import numpy as np

from . import hashing


class EmbeddingTable:
    """Value table plus the hash seeds that index it.

    Every table entry lies in [clamp_epsilon, 1]; values outside the band are
    clamped at construction (load time), never at read time. The table is
    read-only after construction as far as this class is concerned; trained
    values arrive through the weight bundle.

    With ``normalize=False`` the raw gathered values are returned instead of
    the L1-normalized vector (ablation switch; default on).
    """

    def __init__(
        self,
        values: np.ndarray,
        embed_seeds: list[int],
        clamp_epsilon: float = 0.001,
        normalize: bool = True,
    ):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("embedding table values must be a non-empty 1-d array")
        if not 0.0 < clamp_epsilon < 1.0:
            raise ValueError("clamp_epsilon must be in (0, 1)")
        self.values = np.clip(values, clamp_epsilon, 1.0)
        self.v_dim = int(values.size)
        self.embed_seeds = [int(s) for s in embed_seeds]
        self.d1 = len(self.embed_seeds)
        if self.d1 < 1:
            raise ValueError("need at least one embedding hash seed")
        self.clamp_epsilon = float(clamp_epsilon)
        self.normalize = bool(normalize)

    @classmethod
    def default(
        cls,
        v_dim: int = 80,
        d1: int = 5,
        seed: int = 42,
        clamp_epsilon: float = 0.001,
        normalize: bool = True,
    ) -> "EmbeddingTable":
        """Untrained table: a deterministic linear spread over (epsilon, 1).

        values[i] = epsilon + (1 - epsilon) * (i + 0.5) / v_dim. The rule
        estimator only needs positive values, and the fixed spread keeps
        tests reproducible without a trained bundle.
        """
        idx = np.arange(v_dim, dtype=np.float64)
        values = clamp_epsilon + (1.0 - clamp_epsilon) * (idx + 0.5) / v_dim
        seeds = hashing.seed_sequence(seed, d1)
        return cls(values, seeds, clamp_epsilon, normalize)

    def embed_digest(self, digest: int) -> np.ndarray:
        """Embedding vector for a precomputed item digest."""
        raw = np.empty(self.d1, dtype=np.float64)
        for k, seed in enumerate(self.embed_seeds):
            raw[k] = self.values[hashing.index_from_digest(seed, digest, self.v_dim)]
        if not self.normalize:
            return raw
        return raw / raw.sum()

    def embed(self, item: bytes | str | int) -> np.ndarray:
        """Embedding vector for an item; pure function of (table, item)."""
        return self.embed_digest(hashing.base_hash(hashing.item_bytes(item)))

    def embed_digests(self, digests: np.ndarray) -> np.ndarray:
        """Vectorized embedding: (N,) digests -> (N, d1) float64 matrix."""
        n = digests.shape[0]
        raw = np.empty((n, self.d1), dtype=np.float64)
        for k, seed in enumerate(self.embed_seeds):
            idx = hashing.indices_from_digests(seed, digests, self.v_dim)
            raw[:, k] = self.values[idx]
        if not self.normalize:
            return raw
        return raw / raw.sum(axis=1, keepdims=True)
