"""Seeded, cross-platform hash family used for every index mapping.

Primitives:
    item_bytes    - canonical byte encoding of an item (bytes / str / int)
    base_hash     - FNV-1a 64-bit digest of a byte sequence
    hash_index    - seeded bucket index: SplitMix64 finalizer over
                    (seed XOR digest), reduced mod range
    seed_sequence - deterministic stream of 64-bit seeds from one master seed

All functions are pure and bit-exact across platforms. Scalar versions work
on Python ints (masked to 64 bits); the *_many versions are vectorized over
numpy uint64 arrays and produce identical values.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

# SplitMix64 finalizer multipliers and the sequence increment.
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB
GOLDEN = 0x9E3779B97F4A7C15


def item_bytes(item: bytes | bytearray | str | int) -> bytes:
    """Canonical byte encoding: bytes pass through, str is UTF-8, int is
    8-byte little-endian (so integer and string domains share one path)."""
    if isinstance(item, (bytes, bytearray)):
        return bytes(item)
    if isinstance(item, str):
        return item.encode("utf-8")
    if isinstance(item, int):
        if not 0 <= item < 1 << 64:
            raise ValueError(f"integer item id out of u64 range: {item}")
        return item.to_bytes(8, "little")
    raise TypeError(f"unsupported item type: {type(item).__name__}")


def base_hash(data: bytes) -> int:
    """FNV-1a 64-bit digest. Empty input yields the offset basis."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def base_hash_many(items: Sequence[bytes]) -> np.ndarray:
    """FNV-1a digests for a batch of byte strings, as a uint64 array.

    Processes byte position j across all items at once, so cost scales with
    the longest item rather than the batch size times length.
    """
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
        h = out[mask]
        h = (h ^ blob[idx].astype(np.uint64)) * prime
        out[mask] = h
    return out


def mix64(x: int) -> int:
    """SplitMix64 finalizer: two xor-shift-multiply rounds plus a final
    xor-shift. Full avalanche over 64 bits."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_C2)
    return z ^ (z >> np.uint64(31))


def index_from_digest(seed: int, digest: int, range_: int) -> int:
    """Bucket index in [0, range_) from a precomputed digest."""
    if range_ < 1:
        raise ValueError("hash range must be >= 1")
    return mix64((seed ^ digest) & MASK64) % range_


def hash_index(seed: int, data: bytes, range_: int) -> int:
    """Seeded bucket index for a byte sequence. Distinct seeds give
    statistically independent index families over the same items."""
    return index_from_digest(seed, base_hash(data), range_)


def indices_from_digests(seed: int, digests: np.ndarray, range_: int) -> np.ndarray:
    """Vectorized index_from_digest; returns int64 indices in [0, range_)."""
    if range_ < 1:
        raise ValueError("hash range must be >= 1")
    mixed = _mix64_array(np.uint64(seed) ^ digests.astype(np.uint64))
    return (mixed % np.uint64(range_)).astype(np.int64)


def seed_sequence(master: int, count: int) -> list[int]:
    """Deterministic list of 64-bit seeds derived from one master seed."""
    state = master & MASK64
    seeds = []
    for _ in range(count):
        state = (state + GOLDEN) & MASK64
        seeds.append(mix64(state))
    return seeds


def sign_from_digest(seed: int, digest: int) -> int:
    """+1 or -1 from a dedicated bit of the mixed digest."""
    return 1 if mix64((seed ^ digest) & MASK64) & 1 else -1


def signs_from_digests(seed: int, digests: np.ndarray) -> np.ndarray:
    """Vectorized sign_from_digest; returns int8 array of +1/-1."""
    mixed = _mix64_array(np.uint64(seed) ^ digests.astype(np.uint64))
    return np.where(mixed & np.uint64(1), 1, -1).astype(np.int8)


def digests_of(items: Iterable[bytes | str | int]) -> np.ndarray:
    """Canonicalize and hash a batch of items in one step."""
    return base_hash_many([item_bytes(it) for it in items])
