"""Error-bounded monotone piecewise-linear position model.

The fit is a greedy shrinking-corridor pass: a segment starts at a data
point (zero error there) and extends while some slope keeps every covered
point within +/-E of its slot; the emitted slope is the corridor midpoint.
Per-segment clamps make the full curve monotone non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sigdex import _kernels


class SplineError(ValueError):
    pass


@dataclass(frozen=True)
class BaseModel:
    starts: np.ndarray  # segment start keys (f64, ascending)
    bases: np.ndarray  # slot index at the start key
    slopes: np.ndarray  # >= 0
    clamps: np.ndarray  # per-segment upper clamp (next segment's base)
    capacity: int
    error_bound: float
    generation: int = 0

    @property
    def segment_count(self) -> int:
        return int(self.starts.size)

    def predict(self, k) -> float:
        return _kernels.spline_eval(
            self.starts, self.bases, self.slopes, self.clamps,
            float(self.capacity), float(k),
        )

    def predict_batch(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.starts, keys, side="right") - 1, 0, None)
        y = self.bases[idx] + self.slopes[idx] * (keys - self.starts[idx])
        y = np.maximum(y, self.bases[idx])
        y = np.minimum(y, self.clamps[idx])
        return np.clip(y, 0.0, self.capacity - 1.0)

    def nbytes(self) -> int:
        return int(self.starts.nbytes + self.bases.nbytes
                   + self.slopes.nbytes + self.clamps.nbytes)


def fit_spline_points(keys: np.ndarray, slots: np.ndarray, capacity: int,
                      error_bound: float, generation: int = 0) -> BaseModel:
    """Fit key -> slot with every point within +/-error_bound of its slot."""
    keys = np.asarray(keys, dtype=np.float64)
    slots = np.asarray(slots, dtype=np.float64)
    n = keys.size
    if n < 2:
        raise SplineError("need at least 2 occupied slots to fit")
    if error_bound <= 0:
        raise SplineError("error bound must be positive")

    starts, bases, slopes = [], [], []
    i = 0
    while i < n:
        x0, y0 = keys[i], slots[i]
        lo, hi = -np.inf, np.inf
        j = i + 1
        while j < n:
            dx = keys[j] - x0
            new_lo = max(lo, (slots[j] - error_bound - y0) / dx)
            new_hi = min(hi, (slots[j] + error_bound - y0) / dx)
            if new_lo > new_hi:
                break
            lo, hi = new_lo, new_hi
            j += 1
        if j == i + 1:
            slope = 0.0
        else:
            slope = 0.5 * (lo + hi)
            # slot order already forces hi > 0; keep the curve non-decreasing
            slope = min(max(slope, max(lo, 0.0)), hi)
        starts.append(x0)
        bases.append(y0)
        slopes.append(slope)
        i = j

    bases_arr = np.asarray(bases, dtype=np.float64)
    clamps = np.empty_like(bases_arr)
    clamps[:-1] = bases_arr[1:]
    clamps[-1] = capacity - 1.0
    return BaseModel(
        starts=np.asarray(starts, dtype=np.float64),
        bases=bases_arr,
        slopes=np.asarray(slopes, dtype=np.float64),
        clamps=clamps,
        capacity=int(capacity),
        error_bound=float(error_bound),
        generation=generation,
    )


def fit_spline(layout, error_bound: float, generation: int = 0) -> BaseModel:
    """Fit over a SlottedArray's occupied (key, slot) pairs."""
    slots = layout.occupied_slots()
    if slots.size < 2:
        raise SplineError("need at least 2 occupied slots to fit")
    keys = layout.keys[slots].astype(np.float64)
    return fit_spline_points(keys, slots.astype(np.float64), layout.capacity,
                             error_bound, generation)
