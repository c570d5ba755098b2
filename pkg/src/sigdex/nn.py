"""Joint network: shared trunk with a sigmoid-ensemble head and a mixture head.

All parameters live in one flat float64 vector with named views, which keeps
finite-difference checking, the quadratic anchor penalty, and snapshotting
trivial. Gradients are closed-form (manual backprop); nothing here depends
on an autograd framework.

Trainer math runs in normalized key space ([0, 1] over the current key
range); publication to the engine de-normalizes the decoded parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from sigdex.gmm import GmmParams
from sigdex.sigmoids import ACTIVE_AMPLITUDE_CUTOFF, PiEnsemble

# softplus offset: zeroed head rows decode to amplitudes far below the
# publication gate, and the idle-ensemble regularizer mass stays well under
# the convergence threshold.
AMP_RAW_OFFSET = -18.0


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    # exact inverse for y > 0; guards the log for tiny inputs
    y = np.maximum(y, 1e-300)
    return y + np.log(-np.expm1(-y))


@dataclass(frozen=True)
class NetConfig:
    input_dim: int = 8
    hidden: int = 64
    n_sigmoids: int = 20
    kernels: int = 8
    dropout: float = 0.1
    lr: float = 1e-2
    grad_clip: float = 1000.0
    amp_norm: float = 0.01  # regularizer normalization constant
    sigma_floor: float = 1e-6
    gamma: float = 1.0
    reg_c: float = 1.0
    reg_nu: float = 0.5
    buffer_capacity: int = 1000  # rho factor inside the amplitude regularizer
    ewc_lambda: float = 0.1


class JointNet:
    """Flat-parameter network with manual forward/backward."""

    def __init__(self, cfg: NetConfig, seed: int = 0):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self._spec = self._param_spec()
        total = sum(int(np.prod(sh)) for _, sh in self._spec)
        self.params = np.zeros(total, dtype=np.float64)
        self.views = {}
        off = 0
        for name, sh in self._spec:
            size = int(np.prod(sh))
            self.views[name] = self.params[off:off + size].reshape(sh)
            off += size
        self.ewc_importance = np.zeros(total, dtype=np.float64)
        self.ewc_anchor = np.zeros(total, dtype=np.float64)
        # seeded Adam moments; reset together with the stage bookkeeping
        self._adam_m = np.zeros(total, dtype=np.float64)
        self._adam_v = np.zeros(total, dtype=np.float64)
        self._adam_t = 0
        self._init_weights()

    # -- layout ---------------------------------------------------------------

    def _param_spec(self):
        c = self.cfg
        n, h, ns, k = c.input_dim, c.hidden, c.n_sigmoids, c.kernels
        return [
            ("w0", (h, n)), ("b0", (h,)),
            ("th1", (h, h)), ("tb1", (h,)), ("gh1", (h, h)), ("gb1", (h,)),
            ("th2", (h, h)), ("tb2", (h,)), ("gh2", (h, h)), ("gb2", (h,)),
            ("w1", (h, h)), ("b1", (h,)),
            ("w2", (h, h)), ("b2", (h,)),
            ("pw1", (ns, h)), ("pb1", (ns,)),
            ("pw2", (3 * ns, ns)), ("pb2", (3 * ns,)),
            ("qw1", (k, h)), ("qb1", (k,)),
            ("qw2", (3 * k, k)), ("qb2", (3 * k,)),
        ]

    def _init_weights(self):
        for name, sh in self._spec:
            v = self.views[name]
            if name in ("pw2", "pb2", "qw2", "qb2"):
                v[...] = 0.0  # output layers start neutral; biases seeded later
            elif len(sh) == 2:
                v[...] = self.rng.normal(0.0, 1.0 / math.sqrt(sh[1]), sh)
            else:
                v[...] = 0.0
        # carry-biased highway gates keep early training close to identity
        self.views["gb1"][...] = -1.0
        self.views["gb2"][...] = -1.0

    def param_count(self) -> int:
        return int(self.params.size)

    # -- trunk ------------------------------------------------------------------

    def _trunk(self, X, drop_mask=None):
        v = self.views
        a0 = np.maximum(X @ v["w0"].T + v["b0"], 0.0)
        t1_pre = a0 @ v["th1"].T + v["tb1"]
        t1 = np.maximum(t1_pre, 0.0)
        g1 = expit(a0 @ v["gh1"].T + v["gb1"])
        h1 = g1 * t1 + (1.0 - g1) * a0
        t2_pre = h1 @ v["th2"].T + v["tb2"]
        t2 = np.maximum(t2_pre, 0.0)
        g2 = expit(h1 @ v["gh2"].T + v["gb2"])
        h2 = g2 * t2 + (1.0 - g2) * h1
        hd = h2 if drop_mask is None else h2 * drop_mask
        a1 = np.maximum(hd @ v["w1"].T + v["b1"], 0.0)
        a2 = np.maximum(a1 @ v["w2"].T + v["b2"], 0.0)
        zbar = a2.mean(axis=0)
        return {"X": X, "a0": a0, "t1": t1, "g1": g1, "h1": h1, "t2": t2,
                "g2": g2, "h2": h2, "hd": hd, "a1": a1, "a2": a2,
                "zbar": zbar, "drop": drop_mask}

    def _trunk_backward(self, cache, g_zbar, grads):
        v = self.views
        m = cache["X"].shape[0]
        g_a2 = np.broadcast_to(g_zbar / m, cache["a2"].shape).copy()
        g_pre2 = g_a2 * (cache["a2"] > 0)
        grads["w2"] += g_pre2.T @ cache["a1"]
        grads["b2"] += g_pre2.sum(axis=0)
        g_a1 = g_pre2 @ v["w2"]
        g_pre1 = g_a1 * (cache["a1"] > 0)
        grads["w1"] += g_pre1.T @ cache["hd"]
        grads["b1"] += g_pre1.sum(axis=0)
        g_hd = g_pre1 @ v["w1"]
        g_h2 = g_hd if cache["drop"] is None else g_hd * cache["drop"]

        g_h1 = self._highway_backward(g_h2, cache["h1"], cache["t2"],
                                      cache["g2"], "th2", "tb2", "gh2", "gb2",
                                      grads)
        g_a0 = self._highway_backward(g_h1, cache["a0"], cache["t1"],
                                      cache["g1"], "th1", "tb1", "gh1", "gb1",
                                      grads)
        g_pre0 = g_a0 * (cache["a0"] > 0)
        grads["w0"] += g_pre0.T @ cache["X"]
        grads["b0"] += g_pre0.sum(axis=0)

    def _highway_backward(self, g_out, x, t, g, tw, tb, gw, gb, grads):
        v = self.views
        g_t = g_out * g
        g_g = g_out * (t - x)
        g_x = g_out * (1.0 - g)
        g_pre_t = g_t * (t > 0)
        grads[tw] += g_pre_t.T @ x
        grads[tb] += g_pre_t.sum(axis=0)
        g_x = g_x + g_pre_t @ v[tw]
        g_pre_g = g_g * g * (1.0 - g)
        grads[gw] += g_pre_g.T @ x
        grads[gb] += g_pre_g.sum(axis=0)
        return g_x + g_pre_g @ v[gw]

    # -- heads and decode ---------------------------------------------------------

    def _heads(self, zbar):
        v = self.views
        hp_pre = v["pw1"] @ zbar + v["pb1"]
        hp = np.maximum(hp_pre, 0.0)
        raw_pi = v["pw2"] @ hp + v["pb2"]
        hq_pre = v["qw1"] @ zbar + v["qb1"]
        hq = np.maximum(hq_pre, 0.0)
        raw_psi = v["qw2"] @ hq + v["qb2"]
        return {"hp": hp, "raw_pi": raw_pi, "hq": hq, "raw_psi": raw_psi}

    def decode_pi(self, raw_pi):
        ns = self.cfg.n_sigmoids
        amps = softplus(raw_pi[:ns] + AMP_RAW_OFFSET)
        omegas = np.exp(raw_pi[ns:2 * ns])
        phis = expit(raw_pi[2 * ns:])
        return amps, omegas, phis

    def decode_psi(self, raw_psi):
        k = self.cfg.kernels
        logits = raw_psi[:k]
        shifted = logits - logits.max()
        e = np.exp(shifted)
        weights = e / e.sum()
        means = raw_psi[k:2 * k]
        stds = softplus(raw_psi[2 * k:]) + self.cfg.sigma_floor
        return weights, means, stds

    def forward(self, X, drop_mask=None):
        """Full forward pass; returns caches plus decoded parameter sets."""
        cache = self._trunk(np.atleast_2d(X), drop_mask)
        heads = self._heads(cache["zbar"])
        amps, omegas, phis = self.decode_pi(heads["raw_pi"])
        weights, means, stds = self.decode_psi(heads["raw_psi"])
        return {"trunk": cache, "heads": heads,
                "amps": amps, "omegas": omegas, "phis": phis,
                "weights": weights, "means": means, "stds": stds}

    # -- losses ---------------------------------------------------------------

    def predict_indices(self, fwd, eval_keys, base_preds):
        """Adjusted index predictions via the smooth (ungated) amplitudes."""
        t = np.asarray(eval_keys, dtype=np.float64)
        z = fwd["omegas"] * (t[:, None] - fwd["phis"])
        np.clip(z, -700.0, 700.0, out=z)
        s = expit(z)
        return np.asarray(base_preds, dtype=np.float64) + s @ fwd["amps"], s

    def amplitude_penalty(self, amps):
        c = self.cfg
        x = amps / c.amp_norm
        terms = c.buffer_capacity * x * np.exp(1.0 - x)
        return (c.gamma / c.n_sigmoids) * terms.sum()

    def loss_pi(self, fwd, eval_keys, base_preds, targets):
        ihat, _ = self.predict_indices(fwd, eval_keys, base_preds)
        err = ihat - np.asarray(targets, dtype=np.float64)
        return float(np.mean(err * err) + self.amplitude_penalty(fwd["amps"]))

    def loss_psi(self, fwd, xs):
        xs = np.asarray(xs, dtype=np.float64)
        w, mu, sd = fwd["weights"], fwd["means"], fwd["stds"]
        z = (xs[:, None] - mu) / sd
        log_norm = -0.5 * z * z - np.log(sd) - 0.5 * math.log(2.0 * math.pi)
        log_mix = logsumexp(np.log(w) + log_norm, axis=1)
        c = self.cfg
        penalty = (c.reg_c / c.kernels) * np.sum(w ** c.reg_nu)
        return float(-log_mix.sum() + penalty)

    def ewc_penalty(self) -> float:
        d = self.params - self.ewc_anchor
        return float(0.5 * self.cfg.ewc_lambda * np.sum(self.ewc_importance * d * d))

    def ewc_grad(self) -> np.ndarray:
        return self.cfg.ewc_lambda * self.ewc_importance * (self.params - self.ewc_anchor)

    # -- gradients --------------------------------------------------------------

    def _zero_grads(self):
        return {name: np.zeros(sh) for name, sh in self._spec}

    def _flatten(self, grads) -> np.ndarray:
        return np.concatenate([grads[name].ravel() for name, _ in self._spec])

    def grad_pi(self, X, eval_keys, base_preds, targets, drop_mask=None,
                with_ewc=True):
        """(objective value, flat gradient) for the ensemble loss."""
        c = self.cfg
        fwd = self.forward(X, drop_mask)
        ihat, s = self.predict_indices(fwd, eval_keys, base_preds)
        err = ihat - np.asarray(targets, dtype=np.float64)
        m = err.size
        loss = float(np.mean(err * err) + self.amplitude_penalty(fwd["amps"]))

        d_ihat = 2.0 * err / m
        amps, omegas, phis = fwd["amps"], fwd["omegas"], fwd["phis"]
        t = np.asarray(eval_keys, dtype=np.float64)
        sp = s * (1.0 - s)
        g_amp = d_ihat @ s
        core = (d_ihat[:, None] * sp) * amps
        g_omega = (core * (t[:, None] - phis)).sum(axis=0)
        g_phi = (-omegas) * core.sum(axis=0)

        x = amps / c.amp_norm
        g_amp = g_amp + (c.gamma / c.n_sigmoids) * (c.buffer_capacity / c.amp_norm) \
            * np.exp(1.0 - x) * (1.0 - x)

        ns = c.n_sigmoids
        raw_pi = fwd["heads"]["raw_pi"]
        g_raw = np.empty(3 * ns)
        g_raw[:ns] = g_amp * expit(raw_pi[:ns] + AMP_RAW_OFFSET)
        g_raw[ns:2 * ns] = g_omega * omegas
        g_raw[2 * ns:] = g_phi * phis * (1.0 - phis)

        grads = self._zero_grads()
        hp = fwd["heads"]["hp"]
        grads["pb2"] += g_raw
        grads["pw2"] += np.outer(g_raw, hp)
        g_hp = (self.views["pw2"].T @ g_raw) * (hp > 0)
        grads["pb1"] += g_hp
        grads["pw1"] += np.outer(g_hp, fwd["trunk"]["zbar"])
        g_zbar = self.views["pw1"].T @ g_hp
        self._trunk_backward(fwd["trunk"], g_zbar, grads)

        flat = self._flatten(grads)
        if with_ewc:
            loss += self.ewc_penalty()
            flat += self.ewc_grad()
        return loss, flat

    def grad_psi(self, X, xs, drop_mask=None, with_ewc=True):
        """(objective value, flat gradient) for the mixture loss."""
        c = self.cfg
        fwd = self.forward(X, drop_mask)
        xs = np.asarray(xs, dtype=np.float64)
        w, mu, sd = fwd["weights"], fwd["means"], fwd["stds"]
        z = (xs[:, None] - mu) / sd
        log_norm = -0.5 * z * z - np.log(sd) - 0.5 * math.log(2.0 * math.pi)
        log_comp = np.log(w) + log_norm
        log_mix = logsumexp(log_comp, axis=1)
        resp = np.exp(log_comp - log_mix[:, None])
        penalty = (c.reg_c / c.kernels) * np.sum(w ** c.reg_nu)
        loss = float(-log_mix.sum() + penalty)

        g_w = -resp.sum(axis=0) / w \
            + (c.reg_c / c.kernels) * c.reg_nu * w ** (c.reg_nu - 1.0)
        g_mu = -(resp * z / sd).sum(axis=0)
        g_sd = -(resp * (z * z - 1.0) / sd).sum(axis=0)

        k = c.kernels
        raw_psi = fwd["heads"]["raw_psi"]
        # softmax jacobian
        g_logit = w * (g_w - np.dot(g_w, w))
        g_raw = np.empty(3 * k)
        g_raw[:k] = g_logit
        g_raw[k:2 * k] = g_mu
        g_raw[2 * k:] = g_sd * expit(raw_psi[2 * k:])

        grads = self._zero_grads()
        hq = fwd["heads"]["hq"]
        grads["qb2"] += g_raw
        grads["qw2"] += np.outer(g_raw, hq)
        g_hq = (self.views["qw2"].T @ g_raw) * (hq > 0)
        grads["qb1"] += g_hq
        grads["qw1"] += np.outer(g_hq, fwd["trunk"]["zbar"])
        g_zbar = self.views["qw1"].T @ g_hq
        self._trunk_backward(fwd["trunk"], g_zbar, grads)

        flat = self._flatten(grads)
        if with_ewc:
            loss += self.ewc_penalty()
            flat += self.ewc_grad()
        return loss, flat

    # -- optimization ----------------------------------------------------------

    def apply_grad(self, flat_grad):
        """Seeded Adam step with global-norm clipping; in-place on params."""
        c = self.cfg
        norm = float(np.linalg.norm(flat_grad))
        if not math.isfinite(norm):
            return False
        if norm > c.grad_clip:
            flat_grad = flat_grad * (c.grad_clip / norm)
        self._adam_t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        self._adam_m = b1 * self._adam_m + (1 - b1) * flat_grad
        self._adam_v = b2 * self._adam_v + (1 - b2) * flat_grad * flat_grad
        mh = self._adam_m / (1 - b1 ** self._adam_t)
        vh = self._adam_v / (1 - b2 ** self._adam_t)
        self.params -= c.lr * mh / (np.sqrt(vh) + eps)
        return bool(np.isfinite(self.params).all())

    def consolidate(self, flat_grad_sq):
        """Accumulate diagonal importance and re-anchor (stage end)."""
        self.ewc_importance += flat_grad_sq
        self.ewc_anchor[...] = self.params

    # -- seeding / recalibration -------------------------------------------------

    def zero_amplitude_rows(self):
        ns = self.cfg.n_sigmoids
        self.views["pw2"][:ns, :] = 0.0
        self.views["pb2"][:ns] = 0.0

    def set_omega_rows_unit(self):
        ns = self.cfg.n_sigmoids
        self.views["pw2"][ns:2 * ns, :] = 0.0
        self.views["pb2"][ns:2 * ns] = 0.0  # exp(0) = 1

    def set_phi_centers(self, centers_norm):
        ns = self.cfg.n_sigmoids
        c = np.clip(np.asarray(centers_norm, dtype=np.float64), 1e-3, 1.0 - 1e-3)
        self.views["pw2"][2 * ns:, :] = 0.0
        self.views["pb2"][2 * ns:] = np.log(c / (1.0 - c))

    def seed_pi(self, amps, omegas_norm, phis_norm):
        """Write an explicit ensemble into the head biases (weights zeroed)."""
        ns = self.cfg.n_sigmoids
        amps = np.asarray(amps, dtype=np.float64)
        if amps.size != ns:
            raise ValueError("seed size must equal ensemble capacity")
        self.views["pw2"][...] = 0.0
        raw_a = np.where(amps > 0, softplus_inv(np.maximum(amps, 1e-12)) - AMP_RAW_OFFSET, 0.0)
        self.views["pb2"][:ns] = raw_a
        self.views["pb2"][ns:2 * ns] = np.log(np.maximum(omegas_norm, 1e-12))
        c = np.clip(np.asarray(phis_norm, dtype=np.float64), 1e-3, 1.0 - 1e-3)
        self.views["pb2"][2 * ns:] = np.log(c / (1.0 - c))

    def seed_psi(self, weights, means_norm, stds_norm):
        k = self.cfg.kernels
        w = np.asarray(weights, dtype=np.float64)
        if w.size != k:
            raise ValueError("seed size must equal kernel count")
        w = np.maximum(w, 1e-12)
        self.views["qw2"][...] = 0.0
        self.views["qb2"][:k] = np.log(w / w.sum())
        self.views["qb2"][k:2 * k] = means_norm
        sd = np.maximum(np.asarray(stds_norm, dtype=np.float64) - self.cfg.sigma_floor,
                        1e-9)
        self.views["qb2"][2 * k:] = softplus_inv(sd)

    def reset_optimizer(self):
        self._adam_m[...] = 0.0
        self._adam_v[...] = 0.0
        self._adam_t = 0

    # -- publication --------------------------------------------------------------

    def published_ensemble(self, fwd, kmin: float, key_range: float) -> PiEnsemble:
        """Gate trace amplitudes to zero and map back to raw key space."""
        amps = np.where(fwd["amps"] >= ACTIVE_AMPLITUDE_CUTOFF, fwd["amps"], 0.0)
        rng = max(key_range, 1e-300)
        return PiEnsemble(amps, fwd["omegas"] / rng, kmin + fwd["phis"] * rng)

    def published_gmm(self, fwd, kmin: float, key_range: float) -> GmmParams:
        rng = max(key_range, 1e-300)
        w = fwd["weights"] / fwd["weights"].sum()
        return GmmParams(w, kmin + fwd["means"] * rng, fwd["stds"] * rng)

    def dropout_mask(self, m: int, rng: np.random.Generator):
        p = self.cfg.dropout
        if p <= 0:
            return None
        keep = rng.random((m, self.cfg.hidden)) >= p
        return keep.astype(np.float64) / (1.0 - p)
