"""Synthetic Zipf meta-task sampling.

One task is a stream drawn from Zipf(alpha) over n ranked items plus the
exact frequency of every item that occurred. Since memory writes are
additive, storing the stream item by item equals one weighted store per
distinct item with its multiplicity; tasks therefore carry counts, not the
expanded stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hashing


@dataclass
class Task:
    """Distinct items with exact counts, plus the generating parameters."""

    items: list[bytes]
    counts: np.ndarray
    n: int
    alpha: float
    length: int

    @property
    def distinct(self) -> int:
        return len(self.items)


def zipf_probs(n: int, alpha: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** (-alpha)
    return weights / weights.sum()


def min_stream_length(n: int, alpha: float) -> int:
    inv_c = float((np.arange(1, n + 1, dtype=np.float64) ** (-alpha)).sum())
    return math.ceil(n**alpha * inv_c - 1e-9)


def sample_task(
    rng: np.random.Generator,
    n_range: tuple[int, int],
    alpha_range: tuple[float, float],
    length_multiplier_range: tuple[float, float] = (1.0, 10.0),
) -> Task:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    alpha = float(rng.uniform(*alpha_range))
    mult = float(rng.uniform(*length_multiplier_range))
    length = max(1, int(round(min_stream_length(n, alpha) * mult)))
    counts = rng.multinomial(length, zipf_probs(n, alpha))
    present = np.nonzero(counts)[0]
    items = [b"item_%d" % (r + 1) for r in present.tolist()]
    return Task(
        items=items,
        counts=counts[present].astype(np.float64),
        n=n,
        alpha=alpha,
        length=length,
    )


@dataclass
class TaskIndices:
    """Hash-derived index arrays for a task under fixed seeds."""

    embed: np.ndarray  # (distinct, d1) indices into V
    address: np.ndarray  # (distinct, d1) column indices


def task_indices(
    task: Task, embed_seeds: list[int], address_seeds: list[int], v_dim: int, d2: int
) -> TaskIndices:
    digests = hashing.base_hash_many(task.items)
    d1 = len(embed_seeds)
    n = len(task.items)
    embed = np.empty((n, d1), dtype=np.int64)
    address = np.empty((n, d1), dtype=np.int64)
    for k in range(d1):
        embed[:, k] = hashing.indices_from_digests(embed_seeds[k], digests, v_dim)
        address[:, k] = hashing.indices_from_digests(address_seeds[k], digests, d2)
    return TaskIndices(embed=embed, address=address)
