"""Sigmoid ensemble adjustment layer over the base position model.

An adjusted prediction is base(k) plus the sum of amplitude-scaled logistic
steps. The ensemble snapshot is immutable; evaluation may fan out across a
worker pool but always reduces with the same fixed-topology pairwise tree,
so parallel and serial results are bit-comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sigdex import _kernels

# evaluation is split into this many fixed chunks regardless of worker count
_EVAL_CHUNKS = 8

ACTIVE_AMPLITUDE_CUTOFF = 1e-3


class SigmoidError(ValueError):
    pass


class CapacityExhausted(RuntimeError):
    """More pending updates than ensemble slots; a retrain is required."""


@dataclass(frozen=True)
class SigmoidParams:
    amplitude: float
    steepness: float
    center: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise SigmoidError("amplitude must be >= 0")
        if self.steepness <= 0:
            raise SigmoidError("steepness must be > 0")


def sigmoid_eval(k: float, p: SigmoidParams) -> float:
    """Amplitude-scaled logistic, saturating exactly beyond +/-700 exponent."""
    buf = np.empty(1, dtype=np.float64)
    _kernels.sigmoid_fill(
        float(k),
        np.asarray([p.amplitude], dtype=np.float64),
        np.asarray([p.steepness], dtype=np.float64),
        np.asarray([p.center], dtype=np.float64),
        buf, 0, 1,
    )
    return float(buf[0])


class PiEnsemble:
    """Fixed-capacity sigmoid set; entries with amplitude 0 are inactive."""

    __slots__ = ("amps", "omegas", "phis")

    def __init__(self, amps, omegas, phis):
        self.amps = np.ascontiguousarray(amps, dtype=np.float64)
        self.omegas = np.ascontiguousarray(omegas, dtype=np.float64)
        self.phis = np.ascontiguousarray(phis, dtype=np.float64)
        if not (self.amps.size == self.omegas.size == self.phis.size):
            raise SigmoidError("parameter arrays must align")
        if np.any(self.amps < 0):
            raise SigmoidError("amplitudes must be >= 0")
        if np.any(self.omegas <= 0):
            raise SigmoidError("steepness must be > 0")

    @classmethod
    def empty(cls, capacity: int) -> "PiEnsemble":
        return cls(np.zeros(capacity), np.ones(capacity), np.zeros(capacity))

    @property
    def capacity(self) -> int:
        return int(self.amps.size)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.amps > 0))

    def triples(self) -> np.ndarray:
        return np.column_stack([self.amps, self.omegas, self.phis])

    def shift_at(self, k: float, pool=None) -> float:
        """Sum of all sigmoid contributions at key k."""
        n = self.capacity
        if n == 0:
            return 0.0
        buf = np.empty(n, dtype=np.float64)
        if pool is None or n < _EVAL_CHUNKS:
            _kernels.sigmoid_fill(float(k), self.amps, self.omegas, self.phis, buf, 0, n)
        else:
            bounds = [(n * c) // _EVAL_CHUNKS for c in range(_EVAL_CHUNKS + 1)]
            futures = [
                pool.submit(_kernels.sigmoid_fill, float(k), self.amps,
                            self.omegas, self.phis, buf, bounds[c], bounds[c + 1])
                for c in range(_EVAL_CHUNKS)
            ]
            for f in futures:
                f.result()
        return _kernels.pairwise_sum(buf, 0, n)

    def shift_batch(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.float64)
        active = self.amps > 0
        if not active.any():
            return np.zeros(keys.shape, dtype=np.float64)
        a = self.amps[active]
        z = self.omegas[active] * (keys[:, None] - self.phis[active])
        np.clip(z, -700.0, 700.0, out=z)
        return (a / (1.0 + np.exp(-z))).sum(axis=1)


def adjusted_predict(model, ensemble: PiEnsemble, k, pool=None) -> float:
    """Base model prediction plus the ensemble shift."""
    return model.predict(k) + ensemble.shift_at(float(k), pool=pool)


def adjusted_predict_batch(model, ensemble: PiEnsemble, keys) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.float64)
    return model.predict_batch(keys) + ensemble.shift_batch(keys)


def default_steepness(local_gap: float, amplitude: float = 1.0,
                      transition_error: float = 1e-3) -> float:
    """Steepness making the step decay to <= transition_error at both
    neighbors, taking half the local key gap as the decay distance."""
    half = max(local_gap / 2.0, 1e-300)
    eps = min(transition_error, amplitude * 0.49)
    return math.log((amplitude - eps) / eps) / half


def trivial_assign(updates, capacity: int, local_gaps=None,
                   transition_error: float = 1e-3) -> PiEnsemble:
    """One unit step per update: center at the update, amplitude 1.

    Raises CapacityExhausted when updates outnumber ensemble slots, which is
    the upstream retrain signal.
    """
    updates = np.asarray(updates, dtype=np.float64)
    if updates.size > capacity:
        raise CapacityExhausted(
            f"{updates.size} updates exceed ensemble capacity {capacity}")
    amps = np.zeros(capacity)
    omegas = np.ones(capacity)
    phis = np.zeros(capacity)
    if updates.size:
        if local_gaps is None:
            gaps = np.full(updates.size, _default_gap(updates))
        else:
            gaps = np.asarray(local_gaps, dtype=np.float64)
        amps[: updates.size] = 1.0
        phis[: updates.size] = updates
        for i in range(updates.size):
            omegas[i] = default_steepness(gaps[i], 1.0, transition_error)
    return PiEnsemble(amps, omegas, phis)


def _default_gap(updates: np.ndarray) -> float:
    if updates.size > 1:
        d = np.diff(np.sort(updates))
        d = d[d > 0]
        if d.size:
            return float(d.min())
    return 1.0


@dataclass(frozen=True)
class StepConditionReport:
    """Per-pair check that adjusted predictions advance by one slot-ish step."""

    gaps: np.ndarray
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def step_condition_check(model, ensemble: PiEnsemble, layout) -> StepConditionReport:
    keys = layout.occupied_keys().astype(np.float64)
    if keys.size < 2:
        raise SigmoidError("need at least 2 occupied slots")
    preds = adjusted_predict_batch(model, ensemble, keys)
    gaps = np.abs(np.diff(preds))
    violations = [
        (int(i), float(g)) for i, g in enumerate(gaps) if not (1.0 <= g <= 2.0)
    ]
    return StepConditionReport(gaps=gaps, violations=violations)


@dataclass(frozen=True)
class ConstraintEstimate:
    bias: float  # empirical mean |adjusted - oracle| over sampled updates
    bias_stderr: float
    interference: float  # fraction of (u, k) pairs closer than the confusion radius
    interference_stderr: float
    trials: int


def check_constraints(adjusted_fn, oracle_fn, update_sampler, keys,
                      confusion_radius: float, trials: int = 1000,
                      pair_subsample: int | None = None,
                      rng: np.random.Generator | None = None) -> ConstraintEstimate:
    """Monte-Carlo estimates of the bias and interference levels.

    adjusted_fn/oracle_fn map a key array to predictions; update_sampler(rng, m)
    draws m update keys. Interference counts pairs with
    |adjusted(k) - adjusted(u)| < confusion_radius.
    """
    if trials < 100:
        raise SigmoidError("trials must be >= 100")
    rng = rng or np.random.default_rng(0)
    us = np.asarray(update_sampler(rng, trials), dtype=np.float64)
    diffs = np.abs(adjusted_fn(us) - oracle_fn(us))
    bias = float(diffs.mean())
    bias_se = float(diffs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0

    keys = np.asarray(keys, dtype=np.float64)
    if pair_subsample is not None and keys.size > pair_subsample:
        keys = keys[rng.choice(keys.size, pair_subsample, replace=False)]
    pk = adjusted_fn(keys)
    pu = adjusted_fn(us)
    hits = np.abs(pk[None, :] - pu[:, None]) < confusion_radius
    frac = float(hits.mean()) if hits.size else 0.0
    npairs = hits.size
    se = math.sqrt(max(frac * (1 - frac), 0.0) / npairs) if npairs else 0.0
    return ConstraintEstimate(bias, bias_se, frac, se, trials)


# ---------------------------------------------------------------------------
# Closed-form theory evaluators
# ---------------------------------------------------------------------------


def omega_bound(dataset_size: int, key_range: float, amplitude: float,
                transition_error: float) -> float:
    """Expected-steepness bound 2(|D|-1)/range * ln((A-eps)/eps)."""
    if dataset_size < 2:
        raise SigmoidError("dataset size must be >= 2")
    if key_range <= 0:
        raise SigmoidError("key range must be positive")
    if not (0 < transition_error < amplitude):
        raise SigmoidError("need 0 < transition error < amplitude")
    return (2.0 * (dataset_size - 1) / key_range) * math.log(
        (amplitude - transition_error) / transition_error)


def capacity_bound(steepness: float, min_distance: float, amplitude: float,
                   transition_error: float, simplified: bool = False) -> float:
    """Update-count bound (2/(w d)) ln((A e^{w d eps/A} - A)/eps).

    With simplified=True evaluates the amplitude==transition_error special
    case (2/(w d)) ln(e^{w d} - 1) directly.
    """
    if steepness <= 0 or min_distance <= 0:
        raise SigmoidError("steepness and min distance must be positive")
    if amplitude <= 0 or transition_error <= 0:
        raise SigmoidError("amplitude and transition error must be positive")
    wd = steepness * min_distance
    if simplified:
        arg = math.expm1(wd)
    else:
        arg = (amplitude * math.exp(wd * transition_error / amplitude)
               - amplitude) / transition_error
    if arg <= 0:
        raise SigmoidError("log argument must be positive")
    return (2.0 / wd) * math.log(arg)
