"""Update-workload density model and gap-placeholder layout.

A 1-D Gaussian mixture estimates where future inserts will land; interval
masses translate into NULL placeholder counts via a ceiling rule bounded by
the max gap, and the slotted layout interleaves those placeholders before
each key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from sigdex.slots import SlottedArray

_CEIL_EPS = 1e-12  # guards float noise right at integer boundaries


class GmmError(ValueError):
    pass


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: float
    stddev: float

    def __post_init__(self):
        if self.weight <= 0:
            raise GmmError("component weight must be positive")
        if self.stddev <= 0:
            raise GmmError("component stddev must be positive")


class GmmParams:
    """Normalized mixture: weights sum to 1 within 1e-9."""

    __slots__ = ("weights", "means", "stddevs")

    def __init__(self, weights, means, stddevs):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.means = np.ascontiguousarray(means, dtype=np.float64)
        self.stddevs = np.ascontiguousarray(stddevs, dtype=np.float64)
        if not (self.weights.size == self.means.size == self.stddevs.size):
            raise GmmError("parameter arrays must align")
        if self.weights.size == 0:
            raise GmmError("mixture needs at least one component")
        if np.any(self.weights <= 0) or np.any(self.stddevs <= 0):
            raise GmmError("weights and stddevs must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise GmmError("weights must sum to 1 within 1e-9")

    @classmethod
    def from_components(cls, comps) -> "GmmParams":
        return cls([c.weight for c in comps], [c.mean for c in comps],
                   [c.stddev for c in comps])

    @property
    def kernel_count(self) -> int:
        return int(self.weights.size)

    def components(self):
        return [GmmComponent(float(w), float(m), float(s))
                for w, m, s in zip(self.weights, self.means, self.stddevs)]

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        z = (x[:, None] - self.means) / self.stddevs
        dens = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.stddevs)
        return dens @ self.weights

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        z = (x[:, None] - self.means) / self.stddevs
        return ndtr(z) @ self.weights

    def mass(self, a, b) -> np.ndarray:
        """Mixture mass on [a, b] (vectorized over aligned endpoints)."""
        return self.cdf(b) - self.cdf(a)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(self.kernel_count, size=size, p=self.weights / self.weights.sum())
        return rng.normal(self.means[comp], self.stddevs[comp])


def gmm_pdf(x, psi: GmmParams):
    out = psi.pdf(x)
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


@dataclass(frozen=True)
class LayoutConfig:
    max_gap: int = 4  # placeholder budget per key interval
    min_distance: float = 1.0  # smallest key separation, floors seed stddevs
    confidence: float = 0.95

    def __post_init__(self):
        if self.max_gap < 1:
            raise GmmError("max_gap must be >= 1")
        if not (0 < self.confidence < 1):
            raise GmmError("confidence must be in (0, 1)")


# ---------------------------------------------------------------------------
# Greedy initialization
# ---------------------------------------------------------------------------


def greedy_init(keys, confidence: float = 0.95, min_distance: float | None = None,
                max_kernels: int = 32) -> GmmParams:
    """Cluster sorted keys greedily into Gaussian seeds.

    A cluster starts from the two smallest unassigned keys and absorbs
    ascending keys while each lies within the two-sided confidence band of
    the running Gaussian; the first rejection closes the cluster. A single
    leftover key is merged into the last cluster. Weights are cluster sizes
    over the total count.
    """
    keys = np.asarray(keys, dtype=np.float64)
    total = keys.size
    if total < 2:
        raise GmmError("need at least 2 keys")
    if min_distance is None:
        d = np.diff(keys)
        d = d[d > 0]
        min_distance = float(d.min()) if d.size else 1.0
    floor = min_distance / 2.0
    z = float(ndtri((1.0 + confidence) / 2.0))

    clusters: list[list[float]] = []
    i = 0
    while total - i >= 2:
        members = [keys[i], keys[i + 1]]
        i += 2
        mean = float(np.mean(members))
        std = max(float(np.std(members, ddof=1)), floor)
        while i < total:
            k = keys[i]
            if abs(k - mean) <= z * std:
                members.append(k)
                i += 1
                mean = float(np.mean(members))
                std = max(float(np.std(members, ddof=1)), floor)
            else:
                break
        clusters.append(members)
    if i < total:  # single leftover merges into the last cluster
        clusters[-1].extend(keys[i:])

    if len(clusters) > max_kernels:
        head, tail = clusters[: max_kernels - 1], clusters[max_kernels - 1:]
        merged = [k for c in tail for k in c]
        clusters = head + [merged]

    weights, means, stds = [], [], []
    for c in clusters:
        arr = np.asarray(c)
        weights.append(arr.size / total)
        means.append(float(arr.mean()))
        stds.append(max(float(arr.std(ddof=1)) if arr.size > 1 else floor, floor))
    return GmmParams(weights, means, stds)


# ---------------------------------------------------------------------------
# Gap sizing and layout
# ---------------------------------------------------------------------------


def _ceil_eps(x: float) -> int:
    return int(math.ceil(x - _CEIL_EPS))


def gap_size(k_lo: float, k_hi: float, psi: GmmParams, key_range, max_gap: int,
             total_keys: int | None = None) -> int:
    """Placeholder count for the interval (k_lo, k_hi).

    ceil(max_gap * interval mass / total range mass), with a mass floor of
    1/(2*max_gap*s) below which the gap is 0 so micro-intervals do not each
    cost a slot through the ceiling.
    """
    lo, hi = float(key_range[0]), float(key_range[1])
    if not (k_lo < k_hi):
        raise GmmError("need k_lo < k_hi")
    total = float(psi.mass(lo, hi)[0])
    if total <= 0:
        raise GmmError("mixture has no mass on the key range")
    ratio = float(psi.mass(k_lo, k_hi)[0]) / total
    if total_keys:
        if ratio < 1.0 / (2.0 * max_gap * total_keys):
            return 0
    gs = _ceil_eps(max_gap * ratio)
    return int(min(max(gs, 0), max_gap))


def gap_sizes_batch(keys: np.ndarray, psi: GmmParams, max_gap: int) -> np.ndarray:
    """gaps_before for every key: no gap before the first key."""
    keys = np.asarray(keys, dtype=np.float64)
    n = keys.size
    gaps = np.zeros(n, dtype=np.int64)
    if n < 2:
        return gaps
    cdf = psi.cdf(keys)
    total = cdf[-1] - cdf[0]
    if total <= 0:
        return gaps
    ratios = np.diff(cdf) / total
    floor = 1.0 / (2.0 * max_gap * n)
    gs = np.ceil(max_gap * ratios - _CEIL_EPS).astype(np.int64)
    gs[ratios < floor] = 0
    gaps[1:] = np.clip(gs, 0, max_gap)
    return gaps


def build_layout(keyset_keys, psi: GmmParams, cfg: LayoutConfig,
                 values=None) -> SlottedArray:
    """Slotted layout with mixture-sized NULL runs before each key."""
    keys = np.asarray(keyset_keys, dtype=np.uint64)
    if keys.size == 0:
        raise GmmError("cannot lay out an empty keyset")
    gaps = gap_sizes_batch(keys.astype(np.float64), psi, cfg.max_gap)
    return SlottedArray.from_gaps(keys, gaps, values)


def build_layout_random(keyset_keys, psi: GmmParams, cfg: LayoutConfig,
                        seed: int, values=None) -> SlottedArray:
    """Same total gap budget as build_layout, placed uniformly at random."""
    keys = np.asarray(keyset_keys, dtype=np.uint64)
    budget = int(gap_sizes_batch(keys.astype(np.float64), psi, cfg.max_gap).sum())
    gaps = np.zeros(keys.size, dtype=np.int64)
    if keys.size > 1 and budget > 0:
        rng = np.random.default_rng(seed)
        spots = rng.integers(1, keys.size, size=budget)
        np.add.at(gaps, spots, 1)
    return SlottedArray.from_gaps(keys, gaps, values)


def claim_placeholder(layout: SlottedArray, u: int, value: int = 0,
                      hint: float | None = None):
    """Claim a NULL slot strictly between u's occupied neighbors.

    Returns the slot index, or None when the neighbors are adjacent, the key
    is already present, or u falls outside the occupied span. The claimed
    slot is the free slot nearest the hint position (leftmost by default).
    """
    pred, exact, succ = layout.locate(int(u))
    if exact >= 0 or pred < 0 or succ < 0 or succ - pred <= 1:
        return None
    if hint is None:
        slot = pred + 1
    else:
        slot = int(min(max(round(hint), pred + 1), succ - 1))
    layout.claim(slot, int(u), int(value))
    return slot
