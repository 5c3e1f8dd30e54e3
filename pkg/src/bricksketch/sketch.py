"""The assembled multi-brick sketch.

Storing an item: embed it, derive its address vector, route it to one of K
bricks by a dedicated hash, and add the embedding into the addressed cells.
Querying reads the addressed cells back and produces either the rule-based
estimate min(m/v) alone (rule_only mode) or an ensemble of that estimate
with a decode-network prediction, gated by stream characteristics scanned
out of the brick (ensemble mode).

Both store and rule-path query touch a bounded number of cells regardless of
stream length or distinct-item count. Scalar and batch entry points produce
the same results up to float32 accumulation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hashing
from .embedding import EmbeddingTable
from .memory import MemoryBrick
from .nn import (
    LOGIT_CEILING,
    WeightBundle,
    characteristics_from_scan,
    forward_deepsets,
    forward_mlp,
    frequency_from_logit,
    rule_only_bundle,
    validate_bundle,
)

BRICK_BYTES_DEFAULT = 5 * 5120 * 4

RULE_ONLY = "rule_only"
ENSEMBLE = "ensemble"


@dataclass
class StreamCharacteristics:
    """Scan output: the raw vector plus its two decoded leading elements,
    the distinct-count estimate and the skewness estimate."""

    s: np.ndarray
    s_n: float
    s_alpha: float


def rule_estimate(m: np.ndarray, v: np.ndarray) -> float:
    """min over rows of stored mass divided by the embedding component.

    Exact when the item's cells hold no colliding mass; an overestimate
    otherwise (collisions only add positive mass under unit-weight streams).
    """
    return float(np.min(np.asarray(m, dtype=np.float64) / v))


class BrickSketch:
    """K independent memory bricks behind one embed/address/route pipeline.

    The bundle supplies every seed and the embedding table, so two sketches
    built from the same bundle agree bit-exactly on where items land.
    """

    def __init__(
        self,
        bundle: WeightBundle,
        budget_bytes: int | None = None,
        k: int | None = None,
        mode: str = RULE_ONLY,
    ):
        validate_bundle(bundle)
        if mode not in (RULE_ONLY, ENSEMBLE):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == ENSEMBLE and bundle.dec is None:
            raise ValueError("ensemble mode needs a bundle with a decode network")
        if mode == ENSEMBLE and bundle.scan_phi is None and not bundle.no_scanner:
            raise ValueError("ensemble mode needs scan networks unless no_scanner is set")
        self.bundle = bundle
        self.mode = mode
        brick_bytes = bundle.d1 * bundle.d2 * 4
        if k is not None:
            if k < 1:
                raise ValueError("brick count must be >= 1")
            self.k = int(k)
        elif budget_bytes is not None:
            self.k = max(1, int(budget_bytes) // brick_bytes)
        else:
            self.k = 1
        self.table = EmbeddingTable(
            bundle.embedding_values,
            bundle.embed_seeds,
            bundle.clamp_epsilon,
            normalize=not bundle.no_normalization,
        )
        self.bricks = [MemoryBrick(bundle.d1, bundle.d2) for _ in range(self.k)]

    @classmethod
    def rule_only(
        cls, budget_bytes: int = BRICK_BYTES_DEFAULT, seed: int = 42, **bundle_kwargs
    ) -> "BrickSketch":
        """Sketch that needs no trained weights: default table, rule path."""
        return cls(rule_only_bundle(seed=seed, **bundle_kwargs), budget_bytes=budget_bytes)

    @property
    def nbytes(self) -> int:
        return sum(b.nbytes for b in self.bricks)

    # -- addressing ---------------------------------------------------------

    def address_digest(self, digest: int) -> np.ndarray:
        cols = np.empty(self.bundle.d1, dtype=np.int64)
        for i, seed in enumerate(self.bundle.address_seeds):
            cols[i] = hashing.index_from_digest(seed, digest, self.bundle.d2)
        return cols

    def address(self, item) -> np.ndarray:
        """Address vector: one column index per row."""
        return self.address_digest(hashing.base_hash(hashing.item_bytes(item)))

    def route_digest(self, digest: int) -> int:
        return hashing.index_from_digest(self.bundle.brick_seed, digest, self.k)

    def route(self, item) -> int:
        """Index of the brick responsible for the item's sub-stream."""
        return self.route_digest(hashing.base_hash(hashing.item_bytes(item)))

    def _columns_many(self, digests: np.ndarray) -> np.ndarray:
        cols = np.empty((digests.shape[0], self.bundle.d1), dtype=np.int64)
        for i, seed in enumerate(self.bundle.address_seeds):
            cols[:, i] = hashing.indices_from_digests(seed, digests, self.bundle.d2)
        return cols

    # -- store --------------------------------------------------------------

    def store(self, item, weight: float = 1.0) -> None:
        """Embed, address, route, and add into exactly one brick."""
        digest = hashing.base_hash(hashing.item_bytes(item))
        v = self.table.embed_digest(digest)
        cols = self.address_digest(digest)
        self.bricks[self.route_digest(digest)].store(v, cols, weight)

    def store_many(self, items, weights=None) -> None:
        """Vectorized store; equivalent to storing item by item up to
        float32 accumulation order (see MemoryBrick.store_batch)."""
        digests = hashing.digests_of(items)
        if digests.size == 0:
            return
        v = self.table.embed_digests(digests)
        cols = self._columns_many(digests)
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
        if self.k == 1:
            self.bricks[0].store_batch(v, cols, weights)
            return
        routes = hashing.indices_from_digests(self.bundle.brick_seed, digests, self.k)
        for b in range(self.k):
            mask = routes == b
            if not mask.any():
                continue
            w = None if weights is None else weights[mask]
            self.bricks[b].store_batch(v[mask], cols[mask], w)

    # -- scan ---------------------------------------------------------------

    def scan(self, brick_index: int) -> StreamCharacteristics:
        """Reconstruct stream characteristics from a fixed column subset of
        one brick. Read-only; deterministic for fixed brick contents.

        The subset is the first scan_subset_columns columns. Hash addressing
        already randomizes what lands there, and a fixed subset keeps scans
        reproducible.
        """
        bundle = self.bundle
        if bundle.scan_phi is None or bundle.scan_rho is None:
            raise RuntimeError("scanner unavailable: bundle has no scan networks")
        if self.mode != ENSEMBLE:
            raise RuntimeError("scanner unavailable in rule_only mode")
        brick = self.bricks[brick_index]
        elements = brick.matrix[:, : bundle.scan_subset_columns].T.astype(np.float64)
        extra = np.log1p(max(brick.item_count, 0.0))
        s = forward_deepsets(bundle.scan_phi, bundle.scan_rho, elements, extra, bundle.leaky_slope)
        s_n, s_alpha = characteristics_from_scan(s)
        return StreamCharacteristics(s=s, s_n=s_n, s_alpha=s_alpha)

    # -- query --------------------------------------------------------------

    def _gate_passes(self, c: StreamCharacteristics) -> bool:
        lo, hi = self.bundle.alpha_interval
        if not lo <= c.s_alpha <= hi:
            return False
        return c.s_n > self.bundle.beta

    def query_rule_raw(self, item) -> float:
        """Unclamped rule estimate, for diagnostics; may go negative after
        deletions."""
        digest = hashing.base_hash(hashing.item_bytes(item))
        v = self.table.embed_digest(digest)
        m, _ = self.bricks[self.route_digest(digest)].read(self.address_digest(digest))
        return rule_estimate(m, v)

    def query(self, item) -> float:
        """Estimated frequency; finite and non-negative in both modes."""
        digest = hashing.base_hash(hashing.item_bytes(item))
        v = self.table.embed_digest(digest)
        cols = self.address_digest(digest)
        brick_idx = self.route_digest(digest)
        m, count = self.bricks[brick_idx].read(cols)
        rule = max(0.0, rule_estimate(m, v))
        if self.mode == RULE_ONLY:
            return rule
        if self.bundle.no_scanner:
            s = np.zeros(self.bundle.s_dim)
        else:
            c = self.scan(brick_idx)
            if not self._gate_passes(c):
                return rule
            s = c.s
        x = np.concatenate([m, v, [np.log1p(max(count, 0.0))], s])
        y = forward_mlp(self.bundle.dec, x, self.bundle.leaky_slope)
        return frequency_from_logit(float(y[0]))

    def query_many(self, items) -> np.ndarray:
        """Vectorized query; one scan per brick per call in ensemble mode."""
        digests = hashing.digests_of(items)
        n = digests.shape[0]
        if n == 0:
            return np.zeros(0)
        v = self.table.embed_digests(digests)
        cols = self._columns_many(digests)
        routes = (
            hashing.indices_from_digests(self.bundle.brick_seed, digests, self.k)
            if self.k > 1
            else np.zeros(n, dtype=np.int64)
        )
        out = np.empty(n, dtype=np.float64)
        for b in range(self.k):
            mask = routes == b
            if not mask.any():
                continue
            brick = self.bricks[b]
            m = brick.read_batch(cols[mask])
            rule = np.maximum(0.0, (m / v[mask]).min(axis=1))
            if self.mode == RULE_ONLY:
                out[mask] = rule
                continue
            if self.bundle.no_scanner:
                s = np.zeros(self.bundle.s_dim)
            else:
                c = self.scan(b)
                if not self._gate_passes(c):
                    out[mask] = rule
                    continue
                s = c.s
            count_col = np.full((m.shape[0], 1), np.log1p(max(brick.item_count, 0.0)))
            x = np.concatenate(
                [m, v[mask], count_col, np.broadcast_to(s, (m.shape[0], s.size))], axis=1
            )
            y = forward_mlp(self.bundle.dec, x, self.bundle.leaky_slope)
            out[mask] = np.maximum(0.0, np.expm1(np.minimum(y[:, 0], LOGIT_CEILING)))
        return out

    # -- merge ---------------------------------------------------------------

    def merge(self, other: "BrickSketch") -> None:
        """Brickwise addition of a sketch built with the identical config."""
        if self.k != other.k:
            raise ValueError(f"cannot merge: brick count {self.k} != {other.k}")
        if self.bundle.storage_fingerprint() != other.bundle.storage_fingerprint():
            raise ValueError("cannot merge: storage configuration differs")
        for mine, theirs in zip(self.bricks, other.bricks):
            mine.merge(theirs)

    @property
    def total_weight(self) -> float:
        return sum(b.item_count for b in self.bricks)
