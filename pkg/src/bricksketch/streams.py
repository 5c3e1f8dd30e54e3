"""Synthetic Zipf streams, meta-task episodes, dataset ingestion, and the
exact counting oracle.

Rank r of n gets probability C / r^alpha with C = 1 / sum(r^-alpha); items
are named "item_<rank>" so tests can recover ranks. Generation is i.i.d.
categorical sampling by default (an exact-quota mode exists for
low-variance tests). Everything is deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ZipfSpec:
    """One synthetic stream: n distinct items, skewness alpha, N draws."""

    n: int
    alpha: float
    length: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.length < 1:
            raise ValueError("length must be >= 1")


@dataclass
class FrequencyTable:
    """Exact item -> count map with the stream total."""

    counts: dict[bytes, int] = field(default_factory=dict)
    total: int = 0

    def items(self) -> list[bytes]:
        return list(self.counts.keys())


@dataclass
class MetaTask:
    """One training episode: the shuffled stream plus its exact answer key.

    Query frequencies sum to the support length and every support item
    appears in the query set.
    """

    support: list[bytes]
    query: list[tuple[bytes, int]]
    spec: ZipfSpec


def zipf_probs(n: int, alpha: float) -> np.ndarray:
    """Probability of each rank 1..n; non-increasing, sums to 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** (-alpha)
    return weights / weights.sum()


def rank_item(rank: int) -> bytes:
    """Canonical byte name for a 1-based rank."""
    return b"item_%d" % rank


def gen_rank_stream(spec: ZipfSpec, exact_quota: bool = False) -> np.ndarray:
    """Stream as an array of 1-based ranks.

    Default mode draws ranks i.i.d. from the Zipf probabilities. Exact-quota
    mode instead emits round(N * p_r) copies per rank (largest remainders
    absorb the rounding) and shuffles, for tests that need zero sampling
    variance in the counts.
    """
    rng = np.random.default_rng(spec.seed)
    probs = zipf_probs(spec.n, spec.alpha)
    if not exact_quota:
        return rng.choice(spec.n, size=spec.length, p=probs).astype(np.int64) + 1
    quotas = np.floor(spec.length * probs).astype(np.int64)
    remainder = spec.length - int(quotas.sum())
    if remainder > 0:
        frac = spec.length * probs - np.floor(spec.length * probs)
        top = np.argsort(-frac, kind="stable")[:remainder]
        quotas[top] += 1
    ranks = np.repeat(np.arange(1, spec.n + 1, dtype=np.int64), quotas)
    rng.shuffle(ranks)
    return ranks


def gen_stream(spec: ZipfSpec, exact_quota: bool = False) -> list[bytes]:
    """Stream as a list of item byte strings."""
    return [b"item_%d" % r for r in gen_rank_stream(spec, exact_quota).tolist()]


def min_stream_length(n: int, alpha: float) -> int:
    """Smallest N at which the rarest rank's expected count reaches 1:
    ceil(n^alpha / C). The expected count at this N lies in [1, 2)."""
    inv_c = float((np.arange(1, n + 1, dtype=np.float64) ** (-alpha)).sum())
    return math.ceil(n**alpha * inv_c - 1e-9)


def gen_meta_task(
    seed: int,
    n_range: tuple[int, int] = (1000, 50000),
    alpha_range: tuple[float, float] = (0.5, 1.0),
    length_multiplier_range: tuple[float, float] = (1.0, 10.0),
) -> MetaTask:
    """Sample one episode: n and alpha uniform over their ranges, stream
    length a uniform multiple of the minimum length for that (n, alpha)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    alpha = float(rng.uniform(alpha_range[0], alpha_range[1]))
    mult = float(rng.uniform(length_multiplier_range[0], length_multiplier_range[1]))
    length = max(1, int(round(min_stream_length(n, alpha) * mult)))
    spec = ZipfSpec(n=n, alpha=alpha, length=length, seed=int(rng.integers(0, 2**63 - 1)))
    support = gen_stream(spec)
    table = exact_count(support)
    query = sorted(table.counts.items())
    return MetaTask(support=support, query=query, spec=spec)


def exact_count(items) -> FrequencyTable:
    """Exact multiset count; the ground truth for every error metric."""
    counts = Counter(items)
    return FrequencyTable(counts=dict(counts), total=sum(counts.values()))


def ingest(path: str) -> list[bytes]:
    """Newline-delimited UTF-8 tokens, one item per line, blanks skipped."""
    items = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip(b"\r\n")
            if not line:
                continue
            try:
                line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ValueError(f"{path}: invalid UTF-8 on line {lineno}") from exc
            items.append(line)
    return items


def write_stream(items, path: str) -> None:
    with open(path, "wb") as fh:
        for item in items:
            fh.write(item if isinstance(item, bytes) else str(item).encode("utf-8"))
            fh.write(b"\n")


def write_frequency_csv(table: FrequencyTable, path: str) -> None:
    """CSV "item,count" with header; items must be valid UTF-8."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("item,count\n")
        for item, count in sorted(table.counts.items()):
            fh.write(f"{item.decode('utf-8')},{count}\n")


def read_frequency_csv(path: str) -> FrequencyTable:
    counts: dict[bytes, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("item,"):
            raise ValueError(f"{path}: expected 'item,count' header")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            item, _, count = line.rpartition(",")
            counts[item.encode("utf-8")] = int(count)
    return FrequencyTable(counts=counts, total=sum(counts.values()))
