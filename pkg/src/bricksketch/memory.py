"""Additive memory bricks.

A brick is a d1 x d2 float32 matrix plus a sub-stream length counter. Stores
add weight * v into one cell per row (selected by an address vector of d1
column indices); reads gather those cells back. Everything is linear, so
bricks built from different stream shards merge by element-wise addition.

Address vectors are plain integer arrays of shape (d1,), one column index
per row. Store and read touch exactly d1 cells; no operation scans the
stream or the full matrix.

Concurrency contract: stores need exclusive access to a brick; reads are
safe when no store is in flight; distinct bricks are independent.
"""

from __future__ import annotations

import struct

import numpy as np

BRICK_MAGIC = b"LEGOBRK1"


class MemoryBrick:
    """One additive value matrix with a summed-weight counter.

    At the default shape (d1=5, d2=5120) the matrix occupies
    5 * 5120 * 4 = 102400 bytes, the 100KB budget unit. The counter is a
    float64 accumulator of stored weights (weights are real-valued, so an
    integer counter would not close under weighted stores) and is kept
    outside the budget arithmetic.
    """

    def __init__(self, d1: int = 5, d2: int = 5120):
        if d1 < 1 or d2 < 1:
            raise ValueError("brick dimensions must be positive")
        self.d1 = d1
        self.d2 = d2
        self.matrix = np.zeros((d1, d2), dtype=np.float32)
        self.item_count = 0.0

    @property
    def nbytes(self) -> int:
        """Matrix footprint in bytes (excludes the counter)."""
        return self.d1 * self.d2 * 4

    def store(self, v: np.ndarray, columns: np.ndarray, weight: float = 1.0) -> None:
        """Add weight * v[k] into cell (k, columns[k]) for each row k.

        weight -1 deletes a previous unit store with the same (v, columns).
        """
        rows = np.arange(self.d1)
        self.matrix[rows, columns] += np.float32(weight) * v.astype(np.float32)
        self.item_count += weight

    def store_batch(
        self,
        v: np.ndarray,
        columns: np.ndarray,
        weights: np.ndarray | None = None,
    ) -> None:
        """Vectorized store of N items: v is (N, d1), columns is (N, d1).

        Contributions are summed per cell in float64 in input order, then
        added to the float32 matrix once, so batch results match the exact
        dense sum to within one final rounding per cell.
        """
        n = v.shape[0]
        if n == 0:
            return
        if weights is None:
            weights = np.ones(n, dtype=np.float64)
        else:
            weights = np.asarray(weights, dtype=np.float64)
        size = self.d1 * self.d2
        delta = np.zeros(size, dtype=np.float64)
        for k in range(self.d1):
            flat = k * self.d2 + columns[:, k]
            delta += np.bincount(flat, weights=weights * v[:, k], minlength=size)
        self.matrix += delta.reshape(self.d1, self.d2).astype(np.float32)
        self.item_count += float(weights.sum())

    def read(self, columns: np.ndarray) -> tuple[np.ndarray, float]:
        """Gather the d1 addressed cells and the counter. Read-only."""
        rows = np.arange(self.d1)
        return self.matrix[rows, columns].astype(np.float64), self.item_count

    def read_batch(self, columns: np.ndarray) -> np.ndarray:
        """Gather cells for N address vectors: (N, d1) columns -> (N, d1)."""
        out = np.empty(columns.shape, dtype=np.float64)
        for k in range(self.d1):
            out[:, k] = self.matrix[k, columns[:, k]]
        return out

    def merge(self, other: "MemoryBrick") -> None:
        """Element-wise addition of another brick built with the same shape."""
        if (self.d1, self.d2) != (other.d1, other.d2):
            raise ValueError(
                f"invalid merge: shape ({self.d1},{self.d2}) != ({other.d1},{other.d2})"
            )
        self.matrix += other.matrix
        self.item_count += other.item_count

    def copy(self) -> "MemoryBrick":
        dup = MemoryBrick(self.d1, self.d2)
        dup.matrix = self.matrix.copy()
        dup.item_count = self.item_count
        return dup


def save_brick(brick: MemoryBrick, path: str) -> None:
    """Binary snapshot: magic, d1, d2 (u32 LE), item_count (f64 LE), cells
    row-major as f32 LE."""
    with open(path, "wb") as fh:
        fh.write(BRICK_MAGIC)
        fh.write(struct.pack("<II", brick.d1, brick.d2))
        fh.write(struct.pack("<d", brick.item_count))
        fh.write(brick.matrix.astype("<f4").tobytes(order="C"))


def load_brick(path: str) -> MemoryBrick:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BRICK_MAGIC:
            raise ValueError(f"not a brick snapshot: bad magic {magic!r}")
        d1, d2 = struct.unpack("<II", fh.read(8))
        (count,) = struct.unpack("<d", fh.read(8))
        body = fh.read(d1 * d2 * 4)
        if len(body) != d1 * d2 * 4:
            raise ValueError("truncated brick snapshot")
        brick = MemoryBrick(d1, d2)
        brick.matrix = np.frombuffer(body, dtype="<f4").reshape(d1, d2).astype(np.float32)
        brick.item_count = count
        return brick
