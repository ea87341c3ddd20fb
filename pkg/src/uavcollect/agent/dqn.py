"""Branching double DQN with optional dueling heads, noisy exploration and prioritised replay.

Branches 0 and 1 (flight distance and heading) are chosen jointly over the
kinematic feasibility mask by maximising the sum of their Q-values; every
other branch is an independent argmax. All branches share the slot reward.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..config import AgentBlock
from .nn import Adam, QNetwork, soft_update
from .replay import PrioritizedReplay, UniformReplay


class NonFiniteLoss(RuntimeError):
    pass


def branch_argmax(q: np.ndarray) -> int:
    """Argmax with ties going to the lowest index."""
    return int(np.argmax(q))


def masked_joint_argmax(q_dist: np.ndarray, q_head: np.ndarray, mask: np.ndarray):
    """Best feasible ``(distance, heading)`` pair under ``Q_d + Q_h``; row-major tie break."""
    score = q_dist[:, None] + q_head[None, :]
    score = np.where(mask, score, -np.inf)
    if not np.any(mask):
        raise ValueError("mask has no feasible pair")
    d, h = np.unravel_index(int(np.argmax(score)), score.shape)
    return int(d), int(h)


def greedy_indices(q_branches, mask) -> np.ndarray:
    """Greedy index per branch for one observation (``q_branches`` are 1-D arrays)."""
    d, h = masked_joint_argmax(q_branches[0], q_branches[1], mask)
    rest = [branch_argmax(q) for q in q_branches[2:]]
    return np.array([d, h] + rest, dtype=int)


def double_target(r, gamma, q_next_online, q_next_target, done):
    """``r + gamma * Q'(s', argmax_a Q(s', a))``; just ``r`` at episode end.

    Works on a single branch vector or on a batch ``(B, levels)``.
    """
    qo = np.atleast_2d(q_next_online)
    qt = np.atleast_2d(q_next_target)
    a = np.argmax(qo, axis=1)
    boot = qt[np.arange(len(a)), a]
    y = np.asarray(r, dtype=float) + gamma * (1.0 - np.asarray(done, dtype=float)) * boot
    return y if np.ndim(q_next_online) > 1 else float(np.squeeze(y))


def td_update(net: QNetwork, opt: Adam, obs, actions, targets, weights, noise=True,
              floor=1e-3, rng=None):
    """One IS-weighted squared-TD step over all branches.

    ``actions`` and ``targets`` are ``(B, n_branches)``. Returns
    ``(loss, td_errors, new_priorities)``; raises ``NonFiniteLoss`` without
    touching the parameters if the loss is not finite.
    """
    obs = np.atleast_2d(obs)
    b, nb = actions.shape
    if b == 0:
        raise ValueError("empty batch")
    if noise and rng is not None:
        net.resample_noise(rng)
    q, cache = net.forward(obs, noise)
    rows = np.arange(b)
    taken = np.stack([q[j][rows, actions[:, j]] for j in range(nb)], axis=1)
    td = targets - taken
    w = np.asarray(weights, dtype=float)
    loss = float(np.mean(w[:, None] * td ** 2))
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    grad_q = []
    for j in range(nb):
        g = np.zeros_like(q[j])
        g[rows, actions[:, j]] = -2.0 * w * td[:, j] / (b * nb)
        grad_q.append(g)
    grads = net.backward(cache, grad_q)
    opt.step(net.params, grads)
    prio = np.mean(np.abs(td), axis=1) + floor
    return loss, td, prio


def make_ddqn_baseline(hp: AgentBlock) -> AgentBlock:
    """Plain double DQN: no dueling, no noisy layers, uniform replay."""
    return replace(hp, dueling=False, noisy=False, per=False)


def epsilon_at(step: int, total: int, hp: AgentBlock) -> float:
    span = max(1.0, hp.eps_fraction * total)
    frac = min(1.0, step / span)
    return hp.eps_start + frac * (hp.eps_end - hp.eps_start)


class BranchingAgent:
    def __init__(self, obs_dim, branch_sizes, hp: AgentBlock, seed: int = 0, total_steps: int = 1):
        self.hp = hp
        self.branch_sizes = list(branch_sizes)
        ss = np.random.SeedSequence([int(seed), 7])
        init, noise, replay, explore = (np.random.default_rng(s) for s in ss.spawn(4))
        hidden = (hp.hidden1, hp.hidden2)
        self.online = QNetwork(obs_dim, branch_sizes, hidden, hp.dueling, hp.noisy, hp.sigma0, init)
        self.target = QNetwork(obs_dim, branch_sizes, hidden, hp.dueling, hp.noisy, hp.sigma0, init)
        self.target.load_params(self.online.params)
        self.opt = Adam(hp.learning_rate)
        self.noise_rng = noise
        self.explore_rng = explore
        if hp.per:
            self.buffer = PrioritizedReplay(hp.buffer_capacity, hp.per_alpha, hp.priority_floor, replay)
        else:
            self.buffer = UniformReplay(hp.buffer_capacity, replay)
        self.total_steps = max(1, total_steps)
        self.env_steps = 0
        self.learn_steps = 0
        self.last_loss = float("nan")

    # -- acting -------------------------------------------------------------
    def epsilon(self) -> float:
        if self.hp.noisy:
            return 0.0
        return epsilon_at(self.env_steps, self.total_steps, self.hp)

    def select(self, obs, mask, explore=True) -> np.ndarray:
        if explore and not self.hp.noisy and self.explore_rng.random() < self.epsilon():
            return self._random_indices(mask)
        noise = explore and self.hp.noisy
        if noise:
            self.online.resample_noise(self.noise_rng)
        q = [row[0] for row in self.online.q_values(obs, noise)]
        return greedy_indices(q, mask)

    def _random_indices(self, mask) -> np.ndarray:
        feas = np.flatnonzero(mask.ravel())
        d, h = np.unravel_index(int(self.explore_rng.choice(feas)), mask.shape)
        rest = [int(self.explore_rng.integers(n)) for n in self.branch_sizes[2:]]
        return np.array([d, h] + rest, dtype=int)

    # -- learning -----------------------------------------------------------
    def store(self, obs, action, reward, next_obs, done, next_mask) -> None:
        self.buffer.add((np.asarray(obs, dtype=float), np.asarray(action, dtype=int),
                         float(reward) * self.hp.reward_scale, np.asarray(next_obs, dtype=float),
                         bool(done), np.asarray(next_mask, dtype=bool)))
        self.env_steps += 1

    def beta(self) -> float:
        frac = min(1.0, self.env_steps / self.total_steps)
        return self.hp.per_beta0 + frac * (self.hp.per_beta1 - self.hp.per_beta0)

    def targets(self, rewards, next_obs, dones, next_masks) -> np.ndarray:
        hp = self.hp
        if hp.noisy:
            self.online.resample_noise(self.noise_rng)
            self.target.resample_noise(self.noise_rng)
        qo = self.online.q_values(next_obs, hp.noisy)
        qt = self.target.q_values(next_obs, hp.noisy)
        bsz = len(rewards)
        rows = np.arange(bsz)
        y = np.empty((bsz, len(self.branch_sizes)))
        cont = hp.gamma * (1.0 - dones)
        for i in range(bsz):
            d, h = masked_joint_argmax(qo[0][i], qo[1][i], next_masks[i])
            y[i, 0] = qt[0][i, d]
            y[i, 1] = qt[1][i, h]
        for j in range(2, len(self.branch_sizes)):
            y[:, j] = qt[j][rows, np.argmax(qo[j], axis=1)]
        return rewards[:, None] + cont[:, None] * y

    def learn(self):
        hp = self.hp
        if len(self.buffer) < max(hp.batch_size, hp.learn_start):
            return None
        idx, items, w = self.buffer.sample(hp.batch_size, self.beta())
        obs = np.stack([t[0] for t in items])
        act = np.stack([t[1] for t in items])
        rew = np.array([t[2] for t in items])
        nxt = np.stack([t[3] for t in items])
        done = np.array([t[4] for t in items], dtype=float)
        masks = np.stack([t[5] for t in items])
        y = self.targets(rew, nxt, done, masks)
        loss, _, prio = td_update(self.online, self.opt, obs, act, y, w, hp.noisy,
                                  hp.priority_floor, self.noise_rng)
        self.buffer.update(idx, prio)
        self.learn_steps += 1
        if self.learn_steps % hp.target_period == 0:
            soft_update(self.online.params, self.target.params, hp.soft_tau)
        self.last_loss = loss
        return loss

    # -- persistence --------------------------------------------------------
    def tensors(self) -> dict:
        out = {f"online/{k}": v for k, v in self.online.params.items()}
        out.update({f"target/{k}": v for k, v in self.target.params.items()})
        return out

    def load_tensors(self, tensors: dict) -> None:
        self.online.load_params({k[len("online/"):]: v for k, v in tensors.items()
                                 if k.startswith("online/")})
        tgt = {k[len("target/"):]: v for k, v in tensors.items() if k.startswith("target/")}
        self.target.load_params(tgt if tgt else self.online.params)
