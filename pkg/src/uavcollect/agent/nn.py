"""Small numpy MLP with factorised noisy layers, branching dueling heads and Adam.

Everything is float64 and written out by hand: forward caches what the
backward pass needs, gradients live in a dict keyed like the parameters.
"""

from __future__ import annotations

import numpy as np


def _f(x):
    # factorised-noise transform
    return np.sign(x) * np.sqrt(np.abs(x))


class Layer:
    """Affine layer; with ``noisy`` the weights are ``mu + sigma * eps``."""

    def __init__(self, name, fan_in, fan_out, rng, noisy=False, sigma0=0.5):
        self.name = name
        self.noisy = noisy
        self.fan_in, self.fan_out = fan_in, fan_out
        bound = 1.0 / np.sqrt(fan_in)
        self.params = {}
        if noisy:
            self.params[f"{name}.mu_w"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.params[f"{name}.sigma_w"] = np.full((fan_in, fan_out), sigma0 * bound)
            self.params[f"{name}.mu_b"] = rng.uniform(-bound, bound, fan_out)
            self.params[f"{name}.sigma_b"] = np.full(fan_out, sigma0 * bound)
        else:
            self.params[f"{name}.w"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.params[f"{name}.b"] = rng.uniform(-bound, bound, fan_out)
        self.eps_in = np.zeros(fan_in)
        self.eps_out = np.zeros(fan_out)

    def resample(self, rng):
        if self.noisy:
            self.eps_in = _f(rng.standard_normal(self.fan_in))
            self.eps_out = _f(rng.standard_normal(self.fan_out))

    def weights(self, p, noise):
        n = self.name
        if not self.noisy:
            return p[f"{n}.w"], p[f"{n}.b"]
        if not noise:
            return p[f"{n}.mu_w"], p[f"{n}.mu_b"]
        w = p[f"{n}.mu_w"] + p[f"{n}.sigma_w"] * np.outer(self.eps_in, self.eps_out)
        b = p[f"{n}.mu_b"] + p[f"{n}.sigma_b"] * self.eps_out
        return w, b

    def forward(self, p, x, noise):
        w, b = self.weights(p, noise)
        return x @ w + b, (x, w, noise)

    def backward(self, cache, grad, grads):
        x, w, noise = cache
        gw = x.T @ grad
        gb = grad.sum(axis=0)
        n = self.name
        if self.noisy:
            grads[f"{n}.mu_w"] = grads.get(f"{n}.mu_w", 0) + gw
            grads[f"{n}.mu_b"] = grads.get(f"{n}.mu_b", 0) + gb
            eps_w = np.outer(self.eps_in, self.eps_out) if noise else 0.0
            eps_b = self.eps_out if noise else 0.0
            grads[f"{n}.sigma_w"] = grads.get(f"{n}.sigma_w", 0) + gw * eps_w
            grads[f"{n}.sigma_b"] = grads.get(f"{n}.sigma_b", 0) + gb * eps_b
        else:
            grads[f"{n}.w"] = grads.get(f"{n}.w", 0) + gw
            grads[f"{n}.b"] = grads.get(f"{n}.b", 0) + gb
        return grad @ w.T


class QNetwork:
    """Shared two-layer ReLU trunk feeding one Q head per action branch.

    With ``dueling`` a common state-value head is added to mean-centred
    per-branch advantages; otherwise the branch heads are Q-values directly.
    Noisy layers, when enabled, are used for the heads.
    """

    def __init__(self, obs_dim, branch_sizes, hidden=(128, 128), dueling=True, noisy=True,
                 sigma0=0.5, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.obs_dim = int(obs_dim)
        self.branch_sizes = [int(b) for b in branch_sizes]
        self.dueling = dueling
        self.noisy = noisy
        g1, g2 = hidden
        self.hidden = (g1, g2)
        self.l1 = Layer("trunk1", obs_dim, g1, rng)
        self.l2 = Layer("trunk2", g1, g2, rng)
        self.head = Layer("adv" if dueling else "q", g2, sum(self.branch_sizes), rng, noisy, sigma0)
        self.layers = [self.l1, self.l2, self.head]
        if dueling:
            self.value = Layer("value", g2, 1, rng, noisy, sigma0)
            self.layers.append(self.value)
        self.params = {}
        for layer in self.layers:
            self.params.update(layer.params)
        self.offsets = np.concatenate([[0], np.cumsum(self.branch_sizes)])

    def resample_noise(self, rng):
        for layer in self.layers:
            layer.resample(rng)

    def zero_noise(self):
        for layer in self.layers:
            layer.eps_in = np.zeros(layer.fan_in)
            layer.eps_out = np.zeros(layer.fan_out)

    def forward(self, x, noise=False, params=None):
        """Per-branch Q arrays of shape ``(batch, levels)``; also returns the cache."""
        p = self.params if params is None else params
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.obs_dim:
            raise ValueError(f"observation length {x.shape[1]} != network input {self.obs_dim}")
        z1, c1 = self.l1.forward(p, x, False)
        h1 = np.maximum(z1, 0.0)
        z2, c2 = self.l2.forward(p, h1, False)
        h2 = np.maximum(z2, 0.0)
        out, ch = self.head.forward(p, h2, noise)
        cache = {"c1": c1, "z1": z1, "c2": c2, "z2": z2, "ch": ch}
        if self.dueling:
            v, cv = self.value.forward(p, h2, noise)
            cache["cv"] = cv
        q = []
        for i in range(len(self.branch_sizes)):
            a = out[:, self.offsets[i]:self.offsets[i + 1]]
            q.append(v + a - a.mean(axis=1, keepdims=True) if self.dueling else a)
        return q, cache

    def q_values(self, x, noise=False):
        return self.forward(x, noise)[0]

    def backward(self, cache, grad_q):
        """Parameter gradients given ``dLoss/dQ`` per branch."""
        grads = {}
        if self.dueling:
            gv = sum(g.sum(axis=1, keepdims=True) for g in grad_q)
            gout = np.concatenate([g - g.mean(axis=1, keepdims=True) for g in grad_q], axis=1)
        else:
            gout = np.concatenate(grad_q, axis=1)
        gh2 = self.head.backward(cache["ch"], gout, grads)
        if self.dueling:
            gh2 = gh2 + self.value.backward(cache["cv"], gv, grads)
        gz2 = gh2 * (cache["z2"] > 0)
        gh1 = self.l2.backward(cache["c2"], gz2, grads)
        gz1 = gh1 * (cache["z1"] > 0)
        self.l1.backward(cache["c1"], gz1, grads)
        return grads

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params):
        for k in self.params:
            if params[k].shape != self.params[k].shape:
                raise ValueError(f"shape mismatch for {k}: {params[k].shape} vs {self.params[k].shape}")
            self.params[k][...] = params[k]

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


class Adam:
    def __init__(self, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            m = self.m.get(k, 0.0) * b1 + (1 - b1) * g
            v = self.v.get(k, 0.0) * b2 + (1 - b2) * g * g
            self.m[k], self.v[k] = m, v
            if self.lr == 0:
                continue
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            if k.endswith("sigma_w") or k.endswith("sigma_b"):
                np.maximum(params[k], 0.0, out=params[k])  # noise scales stay non-negative


def soft_update(online: dict, target: dict, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target`` in place."""
    for k in target:
        if online[k].shape != target[k].shape:
            raise ValueError(f"shape mismatch for {k}")
        target[k][...] = tau * online[k] + (1.0 - tau) * target[k]
