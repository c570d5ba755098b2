"""Key datasets, embeddings, and workload generation.

Everything here is deterministic under a fixed seed and immutable after
construction, so instances can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SOSD_HEADER_BYTES = 8
KEY_QUANT_SCALE = 1e9  # fixed factor quantizing continuous samples to u64 keys
EMBED_DIM = 8
_EMBED_FREQS = (1.0, 2.0, 4.0)


class KeySetError(ValueError):
    pass


@dataclass(frozen=True)
class KeySet:
    """Strictly ascending u64 keys plus ingestion bookkeeping."""

    keys: np.ndarray
    dropped_duplicates: int = 0
    resorted: bool = False

    def __post_init__(self):
        keys = np.ascontiguousarray(self.keys, dtype=np.uint64)
        object.__setattr__(self, "keys", keys)
        if keys.size > 1 and not np.all(keys[1:] > keys[:-1]):
            raise KeySetError("keys must be strictly ascending")

    @property
    def count(self) -> int:
        return int(self.keys.size)

    @property
    def min_key(self) -> int:
        return int(self.keys[0])

    @property
    def max_key(self) -> int:
        return int(self.keys[-1])


def make_keyset(raw: np.ndarray) -> KeySet:
    """Sort + deduplicate arbitrary u64 key material into a KeySet."""
    raw = np.asarray(raw, dtype=np.uint64)
    resorted = bool(raw.size > 1 and not np.all(raw[1:] > raw[:-1]))
    uniq = np.unique(raw)
    return KeySet(uniq, dropped_duplicates=int(raw.size - uniq.size), resorted=resorted)


def load_sosd(path) -> KeySet:
    """Load an 8-byte-count-header, little-endian u64 key file."""
    data = Path(path).read_bytes()
    if len(data) < SOSD_HEADER_BYTES:
        raise KeySetError(f"{path}: truncated header ({len(data)} bytes)")
    count = int(np.frombuffer(data[:SOSD_HEADER_BYTES], dtype="<u8")[0])
    expected = SOSD_HEADER_BYTES + 8 * count
    if len(data) != expected:
        raise KeySetError(
            f"{path}: malformed file, header says {count} keys "
            f"({expected} bytes) but file has {len(data)} bytes"
        )
    raw = np.frombuffer(data[SOSD_HEADER_BYTES:], dtype="<u8")
    return make_keyset(raw)


def write_sosd(path, keys: np.ndarray) -> None:
    keys = np.asarray(keys, dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(np.asarray([keys.size], dtype="<u8").tobytes())
        fh.write(keys.tobytes())


def synth_lognormal(count: int, mu: float, sigma: float, seed: int) -> KeySet:
    """Quantized lognormal keys; deterministic under a fixed seed."""
    if count < 1:
        raise KeySetError("count must be >= 1")
    if sigma <= 0:
        raise KeySetError("sigma must be positive")
    rng = np.random.default_rng(seed)
    samples = np.exp(rng.normal(mu, sigma, count)) * KEY_QUANT_SCALE
    return make_keyset(np.round(samples).astype(np.uint64))


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyStats:
    """Summary of a KeySet used to embed keys drawn from its context."""

    kmin: float
    kmax: float
    quantiles: np.ndarray  # ascending grid incl. both endpoints

    @classmethod
    def from_keyset(cls, ks: KeySet, grid: int = 129) -> "KeyStats":
        keys = ks.keys.astype(np.float64)
        if keys.size == 1:
            q = np.repeat(keys, 2)
        else:
            q = np.quantile(keys, np.linspace(0.0, 1.0, min(grid, keys.size)))
        return cls(kmin=float(keys[0]), kmax=float(keys[-1]), quantiles=q)

    @property
    def key_range(self) -> float:
        return self.kmax - self.kmin

    def normalize(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.float64)
        rng = self.key_range
        if rng <= 0:
            return np.full_like(keys, 0.5)
        return np.clip((keys - self.kmin) / rng, 0.0, 1.0)

    def denormalize(self, t) -> np.ndarray:
        return self.kmin + np.asarray(t, dtype=np.float64) * self.key_range


def embed_keys(keys, stats: KeyStats) -> np.ndarray:
    """Map keys to EMBED_DIM-vectors with entries in [-1, 1].

    Coordinate 0 is the min-max-normalized key (monotone in the key, clamped
    at the range ends); 1..6 are sin/cos positional features at three
    frequencies; 7 encodes the local quantile gap relative to the mean gap.
    """
    keys = np.atleast_1d(np.asarray(keys, dtype=np.float64))
    t = stats.normalize(keys)
    out = np.empty((keys.size, EMBED_DIM), dtype=np.float64)
    out[:, 0] = 2.0 * t - 1.0
    for j, f in enumerate(_EMBED_FREQS):
        out[:, 1 + 2 * j] = np.sin(2.0 * math.pi * f * t)
        out[:, 2 + 2 * j] = np.cos(2.0 * math.pi * f * t)
    q = stats.quantiles
    mean_gap = (q[-1] - q[0]) / max(len(q) - 1, 1)
    idx = np.clip(np.searchsorted(q, keys, side="right"), 1, len(q) - 1)
    width = q[idx] - q[idx - 1]
    if mean_gap <= 0:
        out[:, 7] = 0.0
    else:
        out[:, 7] = np.tanh(np.log(np.maximum(width, 1e-300) / mean_gap))
    return out


def embed_key(k, stats: KeyStats) -> np.ndarray:
    return embed_keys([k], stats)[0]


# ---------------------------------------------------------------------------
# Zipfian sampling (bounded ranks, rejection-inversion)
# ---------------------------------------------------------------------------


class ZipfSampler:
    """Ranks in [1, n] with P(r) proportional to r**-exponent.

    Rejection-inversion keeps sampling O(1) per draw for any exponent >= 0;
    exponent 0 degrades to uniform ranks.
    """

    def __init__(self, n: int, exponent: float):
        if n < 1:
            raise ValueError("n must be >= 1")
        if exponent < 0:
            raise ValueError("exponent must be >= 0")
        self.n = n
        self.exponent = exponent
        if exponent > 0:
            self._h_x1 = self._h_integral(1.5) - 1.0
            self._h_n = self._h_integral(n + 0.5)
            self._s = 2.0 - self._h_integral_inv(self._h_integral(2.5) - self._h(2.0))

    def _h(self, x: float) -> float:
        return math.exp(-self.exponent * math.log(x))

    def _h_integral(self, x: float) -> float:
        logx = math.log(x)
        return _helper2((1.0 - self.exponent) * logx) * logx

    def _h_integral_inv(self, x: float) -> float:
        t = x * (1.0 - self.exponent)
        if t < -1.0:
            t = -1.0
        return math.exp(_helper1(t) * x)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.exponent == 0:
            return rng.integers(1, self.n + 1, size=size, dtype=np.int64)
        out = np.empty(size, dtype=np.int64)
        pending = np.arange(size)
        while pending.size:
            u = self._h_n + rng.random(pending.size) * (self._h_x1 - self._h_n)
            xs = np.array([self._h_integral_inv(v) for v in u])
            ks = np.clip(np.floor(xs + 0.5), 1, self.n).astype(np.int64)
            acc = np.empty(pending.size, dtype=bool)
            for i, (uu, x, kk) in enumerate(zip(u, xs, ks)):
                acc[i] = (kk - x <= self._s) or (
                    uu >= self._h_integral(kk + 0.5) - self._h(float(kk))
                )
            out[pending[acc]] = ks[acc]
            pending = pending[~acc]
        return out


def _helper1(x: float) -> float:
    if abs(x) > 1e-8:
        return math.log1p(x) / x
    return 1.0 - x / 2.0 + x * x / 3.0


def _helper2(x: float) -> float:
    if abs(x) > 1e-8:
        return math.expm1(x) / x
    return 1.0 + x / 2.0 + x * x / 6.0


# ---------------------------------------------------------------------------
# Workloads
# ---------------------------------------------------------------------------

OP_READ = 0
OP_INSERT = 1
OP_SCAN = 2
OP_RMW = 3
OP_UPDATE = 4

# R=point read (zipfian over base), W=insert from the update distribution,
# U=value update of an existing key, I=insert, RL=latest-biased read,
# S=range scan, M=read-modify-write. One tuple is one interleaving block;
# read/write counts per block match the mix definition exactly.
_MIX_BLOCKS = {
    "read-only": ("R",),
    "read-heavy": ("R",) * 19 + ("W",),
    "write-heavy": ("R", "W"),
    "write-only": ("W",),
    "ycsb-a": ("R", "U"),
    "ycsb-b": ("R",) * 19 + ("U",),
    "ycsb-c": ("R",),
    "ycsb-d": ("I",) + ("RL",) * 19,
    "ycsb-e": ("I",) + ("S",) * 19,
    "ycsb-f": ("R", "M"),
}

UPDATE_DISTRIBUTIONS = (
    "lognormal",
    "uniform",
    "zipfian",
    "exponential",
    "mixture-of-gaussians",
)


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    mix: str = "write-heavy"
    access_skew: float = 0.99
    update_distribution: str = "lognormal"
    op_count: int = 100_000
    seed: int = 0
    update_mu: float = 0.0
    update_sigma: float = 1.0
    mog_kernels: int = 8
    mog_spread: float = 0.005

    def __post_init__(self):
        if self.mix not in _MIX_BLOCKS:
            raise WorkloadError(f"unknown mix {self.mix!r}")
        if self.update_distribution not in UPDATE_DISTRIBUTIONS:
            raise WorkloadError(f"unknown update distribution {self.update_distribution!r}")
        if self.access_skew < 0:
            raise WorkloadError("access-skew must be >= 0")
        if self.op_count <= 0:
            raise WorkloadError("op-count must be positive")


@dataclass(frozen=True)
class OpStream:
    kinds: np.ndarray  # u8 op codes
    keys: np.ndarray  # u64
    aux: np.ndarray  # u32 scan lengths, 0 otherwise
    values: np.ndarray  # u64 payloads for writes

    def __len__(self) -> int:
        return int(self.kinds.size)

    def kind_counts(self) -> dict:
        names = {OP_READ: "read", OP_INSERT: "insert", OP_SCAN: "scan",
                 OP_RMW: "rmw", OP_UPDATE: "update"}
        vals, counts = np.unique(self.kinds, return_counts=True)
        return {names[int(v)]: int(c) for v, c in zip(vals, counts)}


def draw_update_keys(spec: WorkloadSpec, base: KeySet, rng: np.random.Generator,
                     count: int) -> np.ndarray:
    """Keys for insert ops, drawn from the spec's update distribution."""
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    kmin, kmax = float(base.min_key), float(base.max_key)
    span = max(kmax - kmin, 1.0)
    dist = spec.update_distribution
    if dist == "lognormal":
        vals = np.exp(rng.normal(spec.update_mu, spec.update_sigma, count)) * KEY_QUANT_SCALE
    elif dist == "uniform":
        vals = rng.uniform(kmin, kmax, count)
    elif dist == "exponential":
        vals = kmin + rng.exponential(span / 8.0, count)
    elif dist == "zipfian":
        ranks = ZipfSampler(base.count, max(spec.access_skew, 0.5)).sample(rng, count)
        anchors = base.keys.astype(np.float64)[ranks - 1]
        vals = anchors + rng.uniform(0.0, 1.0, count) * (span / base.count)
    else:  # mixture-of-gaussians
        centers = rng.uniform(kmin, kmax, spec.mog_kernels)
        comp = rng.integers(0, spec.mog_kernels, count)
        vals = rng.normal(centers[comp], span * spec.mog_spread)
    vals = np.clip(vals, 0.0, float(2**63))
    return np.round(vals).astype(np.uint64)


def gen_workload(spec: WorkloadSpec, base: KeySet) -> OpStream:
    """Deterministic op stream honoring the mix ratio exactly per block."""
    block = _MIX_BLOCKS[spec.mix]
    needs_reads = any(sym != "W" for sym in block) or spec.mix != "write-only"
    if base.count == 0 and any(sym in ("R", "U", "RL", "S", "M") for sym in block):
        raise WorkloadError("base keyset must be non-empty for read-bearing mixes")

    n = spec.op_count
    reps = -(-n // len(block))
    symbols = (block * reps)[:n]
    counts = {sym: symbols.count(sym) for sym in set(symbols)}

    rng = np.random.default_rng(spec.seed)
    zipf = ZipfSampler(base.count, spec.access_skew) if base.count else None

    # draw every pool in a fixed order so streams replay identically
    pools = {}
    for sym in ("R", "U", "S", "M", "RL"):
        m = counts.get(sym, 0)
        pools[sym] = zipf.sample(rng, m) if m else np.empty(0, dtype=np.int64)
    n_inserts = counts.get("W", 0) + counts.get("I", 0)
    insert_keys = draw_update_keys(spec, base, rng, n_inserts)
    scan_lens = rng.integers(1, 101, counts.get("S", 0), dtype=np.int64)
    values = rng.integers(0, 2**63, n, dtype=np.uint64)

    kinds = np.empty(n, dtype=np.uint8)
    keys = np.empty(n, dtype=np.uint64)
    aux = np.zeros(n, dtype=np.uint32)
    base_keys = base.keys
    cursors = {sym: 0 for sym in pools}
    ins_cursor = 0
    scan_cursor = 0
    inserted: list = []

    for i, sym in enumerate(symbols):
        if sym in ("W", "I"):
            kinds[i] = OP_INSERT
            keys[i] = insert_keys[ins_cursor]
            inserted.append(insert_keys[ins_cursor])
            ins_cursor += 1
        elif sym == "R":
            kinds[i] = OP_READ
            keys[i] = base_keys[pools["R"][cursors["R"]] - 1]
            cursors["R"] += 1
        elif sym == "U":
            kinds[i] = OP_UPDATE
            keys[i] = base_keys[pools["U"][cursors["U"]] - 1]
            cursors["U"] += 1
        elif sym == "M":
            kinds[i] = OP_RMW
            keys[i] = base_keys[pools["M"][cursors["M"]] - 1]
            cursors["M"] += 1
        elif sym == "S":
            kinds[i] = OP_SCAN
            keys[i] = base_keys[pools["S"][cursors["S"]] - 1]
            aux[i] = scan_lens[scan_cursor]
            cursors["S"] += 1
            scan_cursor += 1
        else:  # RL: latest-biased read over the inserts emitted so far
            kinds[i] = OP_READ
            rank = int(pools["RL"][cursors["RL"]])
            cursors["RL"] += 1
            if inserted:
                keys[i] = inserted[max(len(inserted) - rank, 0) % len(inserted)]
            else:
                keys[i] = base_keys[-1]
    return OpStream(kinds=kinds, keys=keys, aux=aux, values=values)
