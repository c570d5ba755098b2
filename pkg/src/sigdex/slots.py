"""Sorted key storage with NULL placeholder slots.

Occupied slots, read left to right, are strictly ascending in key. Mutation
is single-writer; readers see a consistent array because claims only flip a
NULL slot to occupied and local shifts move a bounded run.
"""

from __future__ import annotations

import numpy as np

from sigdex import _kernels


class SlotError(ValueError):
    pass


class SlottedArray:
    __slots__ = ("keys", "values", "occ", "occupied_count", "_occ_slots")

    def __init__(self, keys: np.ndarray, values: np.ndarray, occ: np.ndarray):
        self.keys = np.ascontiguousarray(keys, dtype=np.uint64)
        self.values = np.ascontiguousarray(values, dtype=np.uint64)
        self.occ = np.ascontiguousarray(occ, dtype=np.uint8)
        self.occupied_count = int(self.occ.sum())
        self._occ_slots = None

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dense(cls, keys, values=None) -> "SlottedArray":
        keys = np.asarray(keys, dtype=np.uint64)
        if values is None:
            values = np.zeros_like(keys)
        return cls(keys, np.asarray(values, dtype=np.uint64),
                   np.ones(keys.size, dtype=np.uint8))

    @classmethod
    def from_gaps(cls, keys, gaps_before, values=None) -> "SlottedArray":
        """Interleave keys with NULL runs; gaps_before[i] NULLs precede key i."""
        keys = np.asarray(keys, dtype=np.uint64)
        gaps = np.asarray(gaps_before, dtype=np.int64)
        if gaps.size != keys.size:
            raise SlotError("gaps_before must align with keys")
        if values is None:
            values = np.zeros_like(keys)
        values = np.asarray(values, dtype=np.uint64)
        capacity = int(keys.size + gaps.sum())
        out_keys = np.zeros(capacity, dtype=np.uint64)
        out_vals = np.zeros(capacity, dtype=np.uint64)
        occ = np.zeros(capacity, dtype=np.uint8)
        slots = np.cumsum(gaps + 1) - 1  # slot of each key
        out_keys[slots] = keys
        out_vals[slots] = values
        occ[slots] = 1
        return cls(out_keys, out_vals, occ)

    # -- views ---------------------------------------------------------------

    @property
    def capacity(self) -> int:
        return int(self.keys.size)

    def occupied_slots(self) -> np.ndarray:
        if self._occ_slots is None:
            self._occ_slots = np.flatnonzero(self.occ).astype(np.int64)
        return self._occ_slots

    def occupied_keys(self) -> np.ndarray:
        return self.keys[self.occupied_slots()]

    def null_count(self) -> int:
        return self.capacity - self.occupied_count

    def check_sorted(self) -> bool:
        ok = self.occupied_keys()
        return bool(ok.size < 2 or np.all(ok[1:] > ok[:-1]))

    # -- search --------------------------------------------------------------

    def locate(self, k: int, lo: int = 0, hi: int | None = None):
        """(pred, exact, succ) occupied slots for key k within [lo, hi]."""
        if self.capacity == 0:
            return (-1, -1, -1)
        if hi is None:
            hi = self.capacity - 1
        return _kernels.locate_window(self.keys, self.occ, lo, hi, int(k))

    def find_exact(self, k: int) -> int:
        return self.locate(k)[1]

    # -- mutation ------------------------------------------------------------

    def claim(self, slot: int, k: int, v: int) -> None:
        if self.occ[slot]:
            raise SlotError(f"slot {slot} already occupied")
        self.keys[slot] = k
        self.values[slot] = v
        self.occ[slot] = 1
        self.occupied_count += 1
        self._occ_slots = None

    def set_value(self, slot: int, v: int) -> None:
        self.values[slot] = v

    def shift_insert(self, pos: int, k: int, v: int, limit: int) -> int:
        """Insert k at slot `pos`, shifting [pos, q) right into the first NULL q.

        Returns the absorbing NULL slot, or -1 when no NULL exists within
        `limit` slots (caller falls back to buffering or retraining).
        """
        q = _kernels.next_free_right(self.occ, pos, self.capacity, limit)
        if q < 0:
            return -1
        if q > pos:
            self.keys[pos + 1:q + 1] = self.keys[pos:q]
            self.values[pos + 1:q + 1] = self.values[pos:q]
            self.occ[pos + 1:q + 1] = self.occ[pos:q]
        self.keys[pos] = k
        self.values[pos] = v
        self.occ[pos] = 1
        self.occupied_count += 1
        self._occ_slots = None
        return q

    # -- iteration -----------------------------------------------------------

    def walk_from(self, slot: int, count: int):
        """Yield up to `count` occupied (key, value) pairs starting at `slot`."""
        out = []
        i = slot
        cap = self.capacity
        while i < cap and len(out) < count:
            i = _kernels.next_occupied(self.occ, i, cap)
            if i < 0:
                break
            out.append((int(self.keys[i]), int(self.values[i])))
            i += 1
        return out

    def items(self):
        slots = self.occupied_slots()
        return list(zip(self.keys[slots].tolist(), self.values[slots].tolist()))
