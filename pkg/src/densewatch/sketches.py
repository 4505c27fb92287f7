"""Fixed-space stream summaries.

Two structures live here:

* :class:`CountMinSketch` -- a ``depth x width`` grid of counters giving
  one-sided (never under-) estimates of key frequencies.
* :class:`FrequentItemsSketch` -- a space-saving heavy-hitters summary that
  tracks at most ``capacity`` keys, each with an error offset.

Keys are unsigned 64-bit integers. Both structures are deterministic given
their seed and the order of updates.
"""

from __future__ import annotations

import heapq
import math
import struct
from typing import Iterable

import numpy as np

MASK64 = (1 << 64) - 1
UINT64_MAX = MASK64

_FMIX_C1 = 0xFF51AFD7ED558CCD
_FMIX_C2 = 0xC4CEB9FE1A85EC53
_GOLDEN = 0x9E3779B97F4A7C15

CMS_MAGIC = b"DWSK1"


class SketchError(ValueError):
    """Invalid sketch parameters or a malformed serialized sketch."""


# -- 64-bit mixing ---------------------------------------------------------


def fmix64(x: int) -> int:
    """MurmurHash3 64-bit finalizer (a bijection on 64-bit integers)."""
    x &= MASK64
    x ^= x >> 33
    x = (x * _FMIX_C1) & MASK64
    x ^= x >> 33
    x = (x * _FMIX_C2) & MASK64
    x ^= x >> 33
    return x


def fmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fmix64`; uint64 multiplication wraps modulo 2**64."""
    x = np.asarray(x, dtype=np.uint64).copy()
    x ^= x >> np.uint64(33)
    x *= np.uint64(_FMIX_C1)
    x ^= x >> np.uint64(33)
    x *= np.uint64(_FMIX_C2)
    x ^= x >> np.uint64(33)
    return x


def splitmix64(state: int) -> tuple[int, int]:
    """One step of splitmix64: returns ``(next_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def row_coefficients(seed: int, depth: int) -> list[tuple[int, int]]:
    """Per-row ``(a, b)`` hash coefficients derived from ``(seed, row)``.

    ``a`` is forced odd so ``x -> a*x + b`` is a bijection mod 2**64.
    """
    coeffs = []
    for row in range(depth):
        state = (seed ^ fmix64(row + 1)) & MASK64
        state, a = splitmix64(state)
        state, b = splitmix64(state)
        coeffs.append((a | 1, b))
    return coeffs


# -- count-min -------------------------------------------------------------


def cms_params_from_bounds(epsilon: float, failure_prob: float) -> tuple[int, int]:
    """Sketch dimensions for relative error ``epsilon`` w.p. ``1 - failure_prob``.

    Returns ``(width, depth) = (ceil(e / epsilon), ceil(ln(1 / failure_prob)))``.
    """
    if not 0.0 < epsilon < 1.0:
        raise SketchError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < failure_prob < 1.0:
        raise SketchError(f"failure_prob must lie in (0, 1), got {failure_prob!r}")
    width = math.ceil(math.e / epsilon)
    depth = math.ceil(math.log(1.0 / failure_prob))
    return width, max(depth, 1)


class CountMinSketch:
    """Count-min sketch over 64-bit keys with saturating uint64 counters.

    ``query(k)`` never underestimates the inserted mass of ``k``; with
    probability at least ``1 - exp(-depth)`` it overestimates by at most
    ``e / width * total_mass``.
    """

    def __init__(self, width: int, depth: int, seed: int = 0):
        if width < 1:
            raise SketchError("width must be at least 1")
        if depth < 1:
            raise SketchError("depth must be at least 1")
        self._width = int(width)
        self._depth = int(depth)
        self._seed = int(seed) & MASK64
        self._coeffs = row_coefficients(self._seed, self._depth)
        self._a = np.array([a for a, _ in self._coeffs], dtype=np.uint64)
        self._b = np.array([b for _, b in self._coeffs], dtype=np.uint64)
        self.counters = np.zeros((self._depth, self._width), dtype=np.uint64)
        self.total_mass = 0
        # number of counter increments clipped at UINT64_MAX
        self.overflow_count = 0

    @classmethod
    def from_bounds(cls, epsilon: float, failure_prob: float, seed: int = 0) -> "CountMinSketch":
        width, depth = cms_params_from_bounds(epsilon, failure_prob)
        return cls(width, depth, seed)

    @property
    def width(self) -> int:
        return self._width

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def epsilon(self) -> float:
        """Relative error ``e / width`` implied by the width."""
        return math.e / self._width

    def buckets(self, key: int) -> list[int]:
        key &= MASK64
        return [fmix64((a * key + b) & MASK64) % self._width for a, b in self._coeffs]

    def buckets_array(self, keys: np.ndarray) -> np.ndarray:
        """Bucket indices, shape ``(depth, len(keys))``."""
        keys = np.asarray(keys, dtype=np.uint64)
        mixed = fmix64_array(keys[None, :] * self._a[:, None] + self._b[:, None])
        return (mixed % np.uint64(self._width)).astype(np.intp)

    def update(self, key: int, delta: int = 1) -> None:
        if delta < 1:
            raise SketchError("delta must be a positive integer")
        self.total_mass += delta
        for row, col in enumerate(self.buckets(key)):
            current = int(self.counters[row, col])
            if current > UINT64_MAX - delta:
                self.overflow_count += 1
                self.counters[row, col] = UINT64_MAX
            else:
                self.counters[row, col] = current + delta

    def update_many(self, keys, deltas=None) -> None:
        """Batch update; equivalent to calling :meth:`update` for each key."""
        keys = np.asarray(keys, dtype=np.uint64).ravel()
        if keys.size == 0:
            return
        if deltas is None:
            deltas = np.ones(keys.size, dtype=np.uint64)
        else:
            deltas = np.asarray(deltas, dtype=np.uint64).ravel()
            if deltas.shape != keys.shape:
                raise SketchError("keys and deltas must have the same length")
            if np.any(deltas == 0):
                raise SketchError("deltas must be positive integers")
        batch = int(deltas.sum(dtype=object)) if deltas.size else 0
        if self.total_mass + batch > UINT64_MAX:
            # no counter can exceed total_mass, so only this path can saturate
            for k, d in zip(keys.tolist(), deltas.tolist()):
                self.update(k, d)
            return
        cols = self.buckets_array(keys)
        unit = bool(np.all(deltas == 1))
        for row in range(self._depth):
            if unit:
                self.counters[row] += np.bincount(cols[row], minlength=self._width).astype(np.uint64)
            else:
                np.add.at(self.counters[row], cols[row], deltas)
        self.total_mass += batch

    def query(self, key: int) -> int:
        return min(int(self.counters[row, col]) for row, col in enumerate(self.buckets(key)))

    def query_many(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.uint64).ravel()
        if keys.size == 0:
            return np.zeros(0, dtype=np.uint64)
        cols = self.buckets_array(keys)
        rows = np.arange(self._depth)[:, None]
        return self.counters[rows, cols].min(axis=0)

    def copy(self) -> "CountMinSketch":
        other = CountMinSketch(self._width, self._depth, self._seed)
        other.counters = self.counters.copy()
        other.total_mass = self.total_mass
        other.overflow_count = self.overflow_count
        return other

    def fill_ratio(self) -> float:
        """Fraction of non-zero counters."""
        return float(np.count_nonzero(self.counters)) / self.counters.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountMinSketch):
            return NotImplemented
        return (
            self._width == other._width
            and self._depth == other._depth
            and self._seed == other._seed
            and self.total_mass == other.total_mass
            and np.array_equal(self.counters, other.counters)
        )

    def __repr__(self) -> str:
        return f"CountMinSketch(width={self._width}, depth={self._depth}, total_mass={self.total_mass})"

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        """``DWSK1`` magic, then width, depth, seed as little-endian u64, then
        the counters row-major as little-endian u64."""
        header = CMS_MAGIC + struct.pack("<QQQ", self._width, self._depth, self._seed)
        return header + self.counters.astype("<u8", copy=False).tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "CountMinSketch":
        sketch, _ = cls._read(data, 0)
        return sketch

    @classmethod
    def _read(cls, data: bytes, offset: int) -> tuple["CountMinSketch", int]:
        magic = bytes(data[offset : offset + len(CMS_MAGIC)])
        if magic != CMS_MAGIC:
            raise SketchError("bad magic; not a serialized count-min sketch")
        offset += len(CMS_MAGIC)
        if len(data) < offset + 24:
            raise SketchError("truncated sketch header")
        width, depth, seed = struct.unpack_from("<QQQ", data, offset)
        offset += 24
        n = width * depth * 8
        if len(data) < offset + n:
            raise SketchError("truncated sketch counters")
        sketch = cls(width, depth, seed)
        sketch.counters = (
            np.frombuffer(data, dtype="<u8", count=width * depth, offset=offset)
            .astype(np.uint64)
            .reshape(depth, width)
        )
        # every row sums to the total inserted mass
        sketch.total_mass = int(sketch.counters[0].sum(dtype=object))
        return sketch, offset + n


# -- frequent items ----------------------------------------------------------


class FrequentItemsSketch:
    """Space-saving heavy-hitters summary with at most ``capacity`` entries.

    Every tracked key carries ``(estimate, error)`` with
    ``estimate - error <= true count <= estimate``. When the summary is full,
    an untracked key replaces the entry with the smallest estimate (ties:
    largest key) and inherits that estimate as its error offset.
    """

    FRACTION_OF_MEAN = "mean"
    FRACTION_OF_TOTAL = "total"

    def __init__(self, capacity: int, threshold_mode: str = "mean"):
        if capacity < 1:
            raise SketchError("capacity must be at least 1")
        if threshold_mode not in (self.FRACTION_OF_MEAN, self.FRACTION_OF_TOTAL):
            raise SketchError(f"unknown threshold mode {threshold_mode!r}")
        self.capacity = int(capacity)
        self.threshold_mode = threshold_mode
        self.total_weight = 0
        self.evictions = 0
        self._entries: dict[int, list[int]] = {}
        # lazy min-heap of (estimate, -key); only maintained once full
        self._heap: list[tuple[int, int]] | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: int) -> bool:
        return key in self._entries

    def estimate(self, key: int) -> int:
        entry = self._entries.get(key)
        return entry[0] if entry else 0

    def lower_bound(self, key: int) -> int:
        entry = self._entries.get(key)
        return entry[0] - entry[1] if entry else 0

    def entries(self) -> dict[int, tuple[int, int]]:
        return {k: (c, e) for k, (c, e) in self._entries.items()}

    def update(self, key: int, weight: int = 1) -> int | None:
        """Add ``weight`` to ``key``; returns the evicted key, if any."""
        if weight < 1:
            raise SketchError("weight must be a positive integer")
        self.total_weight += weight
        entry = self._entries.get(key)
        if entry is not None:
            entry[0] += weight
            if self._heap is not None:
                self._push(entry[0], key)
            return None
        if len(self._entries) < self.capacity:
            self._entries[key] = [weight, 0]
            if len(self._entries) == self.capacity:
                self._heap = [(c, -k) for k, (c, _) in self._entries.items()]
                heapq.heapify(self._heap)
            return None
        victim, floor = self._pop_min()
        del self._entries[victim]
        self.evictions += 1
        self._entries[key] = [floor + weight, floor]
        self._push(floor + weight, key)
        return victim

    def update_many(self, keys: Iterable[int]) -> None:
        for key in keys:
            self.update(key, 1)

    def _push(self, estimate: int, key: int) -> None:
        heap = self._heap
        heapq.heappush(heap, (estimate, -key))
        if len(heap) > 4 * self.capacity:
            self._heap = [(c, -k) for k, (c, _) in self._entries.items()]
            heapq.heapify(self._heap)

    def _pop_min(self) -> tuple[int, int]:
        heap = self._heap
        while heap:
            estimate, neg_key = heapq.heappop(heap)
            entry = self._entries.get(-neg_key)
            if entry is not None and entry[0] == estimate:
                return -neg_key, estimate
        raise AssertionError("frequent-items heap lost track of its entries")

    def frequent_items(self, threshold: float = 0.0) -> list[tuple[int, int]]:
        """Tracked keys whose lower-bound count clears the threshold.

        In ``"mean"`` mode the cut-off is ``threshold * total_weight / len(self)``;
        in ``"total"`` mode it is ``threshold * total_weight``. Sorted by
        descending estimate, ties by ascending key.
        """
        if not self._entries:
            return []
        if self.threshold_mode == self.FRACTION_OF_MEAN:
            cutoff = threshold * self.total_weight / len(self._entries)
        else:
            cutoff = threshold * self.total_weight
        items = [(k, c) for k, (c, e) in self._entries.items() if c - e >= cutoff]
        items.sort(key=lambda kc: (-kc[1], kc[0]))
        return items

    def copy(self) -> "FrequentItemsSketch":
        other = FrequentItemsSketch(self.capacity, self.threshold_mode)
        other.total_weight = self.total_weight
        other.evictions = self.evictions
        other._entries = {k: list(v) for k, v in self._entries.items()}
        if self._heap is not None:
            other._heap = list(self._heap)
        return other

    def to_bytes(self) -> bytes:
        """Fixed-size encoding: ``capacity`` slots of (key, estimate, error)
        regardless of how many are occupied."""
        slots = np.zeros((self.capacity, 3), dtype="<u8")
        for i, key in enumerate(sorted(self._entries)):
            count, err = self._entries[key]
            slots[i] = (key, count, err)
        head = struct.pack("<QQQ", self.capacity, len(self._entries), self.total_weight)
        return head + slots.tobytes()
