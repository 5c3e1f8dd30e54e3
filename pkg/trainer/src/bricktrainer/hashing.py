"""Hash functions matching the engine's wire behavior bit-exactly.

The trainer talks to the engine only through the weight bundle file, so the
index mappings are reimplemented here from their definitions: FNV-1a 64-bit
digests and a SplitMix64-finalizer bucket index. The cross-package parity
tests pin the agreement.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN = 0x9E3779B97F4A7C15


def base_hash(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def base_hash_many(items: list[bytes]) -> np.ndarray:
    n = len(items)
    out = np.full(n, FNV_OFFSET, dtype=np.uint64)
    if n == 0:
        return out
    lengths = np.fromiter((len(it) for it in items), dtype=np.int64, count=n)
    max_len = int(lengths.max(initial=0))
    if max_len == 0:
        return out
    blob = np.frombuffer(b"".join(items), dtype=np.uint8)
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    prime = np.uint64(FNV_PRIME)
    for j in range(max_len):
        mask = lengths > j
        idx = starts[mask] + j
        out[mask] = (out[mask] ^ blob[idx].astype(np.uint64)) * prime
    return out


def mix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def indices_from_digests(seed: int, digests: np.ndarray, range_: int) -> np.ndarray:
    z = (np.uint64(seed) ^ digests.astype(np.uint64)).copy()
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z % np.uint64(range_)).astype(np.int64)


def seed_sequence(master: int, count: int) -> list[int]:
    state = master & MASK64
    seeds = []
    for _ in range(count):
        state = (state + GOLDEN) & MASK64
        seeds.append(mix64(state))
    return seeds
