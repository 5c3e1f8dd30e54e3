"""Handcrafted comparator sketches and the elastic heavy/light derivative.

CountMinSketch and CountSketch are the classic counter-matrix structures
(three hash rows each): CM takes min over rows and only ever overestimates;
CS uses per-row random signs and a median, trading one-sidedness for
unbiasedness. The elastic derivative puts an array of exact voting buckets
in front of any linear core sketch, keeping high-frequency items out of it.

All stores are exclusive-access per structure; concurrent reads are safe
when no store is in flight.
"""

from __future__ import annotations

import numpy as np

from . import hashing
from .nn import WeightBundle, rule_only_bundle
from .sketch import RULE_ONLY, BrickSketch

CM_DEPTH = 3
HEAVY_BUCKET_BYTES = 17  # u64 key + u32 votes x2 + flag byte


class CountMinSketch:
    """depth x width int32 counters; estimate = min over rows.

    Counter overflow is unchecked by design; desk-scale streams stay far
    below the int32 range.
    """

    def __init__(self, budget_bytes: int, seed: int = 42, depth: int = CM_DEPTH):
        width = max(1, int(budget_bytes) // (4 * depth))
        self.depth = depth
        self.width = width
        self.counters = np.zeros((depth, width), dtype=np.int32)
        self.row_seeds = hashing.seed_sequence(seed, depth)

    def store(self, item, weight: int = 1) -> None:
        digest = hashing.base_hash(hashing.item_bytes(item))
        for r, seed in enumerate(self.row_seeds):
            self.counters[r, hashing.index_from_digest(seed, digest, self.width)] += weight

    def store_many(self, items, weights=None) -> None:
        digests = hashing.digests_of(items)
        if digests.size == 0:
            return
        for r, seed in enumerate(self.row_seeds):
            idx = hashing.indices_from_digests(seed, digests, self.width)
            if weights is None:
                self.counters[r] += np.bincount(idx, minlength=self.width).astype(np.int32)
            else:
                add = np.bincount(idx, weights=np.asarray(weights, dtype=np.float64), minlength=self.width)
                self.counters[r] += add.astype(np.int32)

    def query(self, item) -> float:
        digest = hashing.base_hash(hashing.item_bytes(item))
        return float(
            min(
                self.counters[r, hashing.index_from_digest(seed, digest, self.width)]
                for r, seed in enumerate(self.row_seeds)
            )
        )

    def query_many(self, items) -> np.ndarray:
        digests = hashing.digests_of(items)
        est = np.full(digests.shape[0], np.iinfo(np.int64).max, dtype=np.int64)
        for r, seed in enumerate(self.row_seeds):
            idx = hashing.indices_from_digests(seed, digests, self.width)
            est = np.minimum(est, self.counters[r, idx].astype(np.int64))
        return est.astype(np.float64)

    @property
    def nbytes(self) -> int:
        return self.depth * self.width * 4

    @property
    def total_weight(self) -> float:
        return float(self.counters[0].sum())


class CountSketch:
    """Like CM but each row adds sign(item) * w and the estimate is the
    median over rows of sign * cell (exact middle value for depth 3)."""

    def __init__(self, budget_bytes: int, seed: int = 42, depth: int = CM_DEPTH):
        width = max(1, int(budget_bytes) // (4 * depth))
        self.depth = depth
        self.width = width
        self.counters = np.zeros((depth, width), dtype=np.int32)
        seeds = hashing.seed_sequence(seed, 2 * depth)
        self.row_seeds = seeds[:depth]
        self.sign_seeds = seeds[depth:]

    def store(self, item, weight: int = 1) -> None:
        digest = hashing.base_hash(hashing.item_bytes(item))
        for r in range(self.depth):
            idx = hashing.index_from_digest(self.row_seeds[r], digest, self.width)
            sign = hashing.sign_from_digest(self.sign_seeds[r], digest)
            self.counters[r, idx] += sign * weight

    def store_many(self, items, weights=None) -> None:
        digests = hashing.digests_of(items)
        if digests.size == 0:
            return
        w = np.ones(digests.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        for r in range(self.depth):
            idx = hashing.indices_from_digests(self.row_seeds[r], digests, self.width)
            signs = hashing.signs_from_digests(self.sign_seeds[r], digests)
            add = np.bincount(idx, weights=w * signs, minlength=self.width)
            self.counters[r] += add.astype(np.int32)

    def query(self, item) -> float:
        digest = hashing.base_hash(hashing.item_bytes(item))
        vals = sorted(
            hashing.sign_from_digest(self.sign_seeds[r], digest)
            * int(self.counters[r, hashing.index_from_digest(self.row_seeds[r], digest, self.width)])
            for r in range(self.depth)
        )
        return float(vals[len(vals) // 2])

    def query_many(self, items) -> np.ndarray:
        digests = hashing.digests_of(items)
        vals = np.empty((self.depth, digests.shape[0]), dtype=np.float64)
        for r in range(self.depth):
            idx = hashing.indices_from_digests(self.row_seeds[r], digests, self.width)
            signs = hashing.signs_from_digests(self.sign_seeds[r], digests)
            vals[r] = signs * self.counters[r, idx]
        return np.median(vals, axis=0)

    @property
    def nbytes(self) -> int:
        return self.depth * self.width * 4


class ElasticSketch:
    """Heavy/light derivative: voting buckets in front of a linear core.

    One quarter of the budget funds the bucket array (17 logical bytes per
    bucket: u64 key digest, two u32 vote counters, a spill flag); the rest
    funds the core. An item hashes to a single bucket. Matches accumulate
    exactly there; mismatches vote against the occupant and spill to the
    core, and once negative votes reach lambda times positive ones the
    occupant's exact count is flushed into the core and the newcomer takes
    the bucket with its flag raised (its earlier copies live in the core).

    The core is keyed by 8-byte item digests so flushed occupants and direct
    spills share one key space. Insert-only: deletions are rejected.
    """

    def __init__(
        self,
        budget_bytes: int,
        seed: int = 42,
        core: str = "cm",
        lam: float = 8.0,
        bundle: WeightBundle | None = None,
        mode: str = RULE_ONLY,
    ):
        heavy_budget = int(budget_bytes) // 4
        light_budget = int(budget_bytes) - heavy_budget
        self.bucket_count = max(1, heavy_budget // HEAVY_BUCKET_BYTES)
        self.lam = float(lam)
        (self.heavy_seed,) = hashing.seed_sequence(hashing.mix64(seed ^ 0xE1A57C), 1)
        self.occupied = np.zeros(self.bucket_count, dtype=bool)
        self.keys = np.zeros(self.bucket_count, dtype=np.uint64)
        self.vote_pos = np.zeros(self.bucket_count, dtype=np.int64)
        self.vote_neg = np.zeros(self.bucket_count, dtype=np.int64)
        self.flags = np.zeros(self.bucket_count, dtype=bool)
        if core == "cm":
            self.light = CountMinSketch(light_budget, seed)
        elif core == "lego":
            self.light = BrickSketch(
                bundle if bundle is not None else rule_only_bundle(seed=seed),
                budget_bytes=light_budget,
                mode=mode,
            )
        else:
            raise ValueError(f"unknown elastic core {core!r}")
        self.core_kind = core

    @staticmethod
    def _digest_key(digest: int) -> bytes:
        return int(digest).to_bytes(8, "little")

    def _insert_digest(self, digest: int, spill: list) -> None:
        slot = hashing.index_from_digest(self.heavy_seed, digest, self.bucket_count)
        if not self.occupied[slot]:
            self.occupied[slot] = True
            self.keys[slot] = digest
            self.vote_pos[slot] = 1
            self.vote_neg[slot] = 0
            self.flags[slot] = False
        elif self.keys[slot] == digest:
            self.vote_pos[slot] += 1
        else:
            self.vote_neg[slot] += 1
            if self.vote_neg[slot] >= self.lam * self.vote_pos[slot]:
                spill.append((self._digest_key(int(self.keys[slot])), float(self.vote_pos[slot])))
                self.keys[slot] = digest
                self.vote_pos[slot] = 1
                self.vote_neg[slot] = 0
                self.flags[slot] = True
            else:
                spill.append((self._digest_key(digest), 1.0))

    def insert(self, item) -> None:
        spill: list = []
        self._insert_digest(hashing.base_hash(hashing.item_bytes(item)), spill)
        for key, weight in spill:
            self.light.store(key, weight)

    def store(self, item, weight: float = 1.0) -> None:
        if weight != 1.0:
            raise ValueError("unsupported operation: elastic derivative is insert-only")
        self.insert(item)

    def store_many(self, items, weights=None) -> None:
        if weights is not None and np.any(np.asarray(weights) != 1):
            raise ValueError("unsupported operation: elastic derivative is insert-only")
        digests = hashing.digests_of(items)
        spill: list = []
        for digest in digests.tolist():
            self._insert_digest(digest, spill)
        if spill:
            # The core is linear, so deferring its stores preserves the
            # exact per-item semantics of interleaved insertion.
            keys = [k for k, _ in spill]
            ws = np.array([w for _, w in spill])
            self.light.store_many(keys, ws)

    def query(self, item) -> float:
        digest = hashing.base_hash(hashing.item_bytes(item))
        slot = hashing.index_from_digest(self.heavy_seed, digest, self.bucket_count)
        if self.occupied[slot] and self.keys[slot] == digest:
            if not self.flags[slot]:
                return float(self.vote_pos[slot])
            return float(self.vote_pos[slot]) + self.light.query(self._digest_key(digest))
        return self.light.query(self._digest_key(digest))

    def query_many(self, items) -> np.ndarray:
        digests = hashing.digests_of(items)
        slots = hashing.indices_from_digests(self.heavy_seed, digests, self.bucket_count)
        matched = self.occupied[slots] & (self.keys[slots] == digests)
        need_light = ~matched | self.flags[slots]
        out = np.where(matched, self.vote_pos[slots].astype(np.float64), 0.0)
        if need_light.any():
            keys = [self._digest_key(d) for d in digests[need_light].tolist()]
            out[need_light] += self.light.query_many(keys)
        return out

    @property
    def heavy_weight(self) -> float:
        return float(self.vote_pos[self.occupied].sum())


def make_sketch(
    kind: str,
    budget_bytes: int,
    seed: int = 42,
    mode: str = RULE_ONLY,
    bundle: WeightBundle | None = None,
):
    """One factory for every sketch kind used by the evaluation harness and
    the command line: cm, cs, lego, d-cms, d-lego."""
    kind = kind.lower()
    if kind == "cm":
        return CountMinSketch(budget_bytes, seed)
    if kind == "cs":
        return CountSketch(budget_bytes, seed)
    if kind == "lego":
        b = bundle if bundle is not None else rule_only_bundle(seed=seed)
        return BrickSketch(b, budget_bytes=budget_bytes, mode=mode)
    if kind == "d-cms":
        return ElasticSketch(budget_bytes, seed, core="cm")
    if kind == "d-lego":
        return ElasticSketch(budget_bytes, seed, core="lego", bundle=bundle, mode=mode)
    raise ValueError(f"unknown sketch kind {kind!r}")
