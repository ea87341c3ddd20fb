"""Replay memories: a sum tree with proportional prioritised sampling, and a uniform buffer."""

from __future__ import annotations

import numpy as np


class SumTree:
    """Array-backed binary tree whose internal nodes hold the sum of their children.

    Leaves are padded to a power of two so that a left-first descent visits
    them in index order. Parents are recomputed from their children on every
    write instead of being patched by differences, so no drift accumulates.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        size = 1
        while size < capacity:
            size *= 2
        self.n_leaves = size
        self.tree = np.zeros(2 * size)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def __getitem__(self, i):
        return self.tree[self.n_leaves + i]

    def set(self, i: int, value: float) -> None:
        if not 0 <= i < self.capacity:
            raise IndexError(i)
        if value < 0 or not np.isfinite(value):
            raise ValueError("priorities must be finite and non-negative")
        j = self.n_leaves + i
        self.tree[j] = value
        j //= 2
        while j >= 1:
            self.tree[j] = self.tree[2 * j] + self.tree[2 * j + 1]
            j //= 2

    def find(self, value: float) -> int:
        """Leaf index whose prefix-sum interval contains ``value``."""
        j = 1
        while j < self.n_leaves:
            left = self.tree[2 * j]
            if value < left:
                j = 2 * j
            else:
                value -= left
                j = 2 * j + 1
        i = j - self.n_leaves
        # rounding can push the descent onto an empty leaf; step back to a filled one
        while self.tree[self.n_leaves + i] <= 0 and i > 0:
            i -= 1
        return i

    def check(self, rtol: float = 1e-6) -> bool:
        for j in range(1, self.n_leaves):
            s = self.tree[2 * j] + self.tree[2 * j + 1]
            if abs(self.tree[j] - s) > rtol * max(1.0, abs(s)):
                return False
        return True


class PrioritizedReplay:
    """Proportional prioritised replay with importance-sampling weights."""

    def __init__(self, capacity: int, alpha: float = 0.6, floor: float = 1e-3, rng=None):
        self.tree = SumTree(capacity)
        self.capacity = capacity
        self.alpha = alpha
        self.floor = floor
        self.data = [None] * capacity
        self.pos = 0
        self.size = 0
        self.max_priority = 1.0
        self.rng = np.random.default_rng(0) if rng is None else rng

    def __len__(self):
        return self.size

    def add(self, item) -> int:
        i = self.pos
        self.data[i] = item
        self.tree.set(i, self.max_priority ** self.alpha)
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def sample(self, batch: int, beta: float):
        """Stratified draw; returns ``(indices, items, is_weights)``."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        total = self.tree.total
        seg = total / batch
        u = (np.arange(batch) + self.rng.random(batch)) * seg
        idx = np.array([self.tree.find(min(v, total * (1 - 1e-12))) for v in u])
        probs = np.array([self.tree[i] for i in idx]) / total
        w = (self.size * probs) ** (-beta)
        w /= w.max()
        return idx, [self.data[i] for i in idx], w

    def update(self, indices, priorities) -> None:
        for i, p in zip(indices, priorities):
            p = float(p)
            if not p > 0:
                raise ValueError("priorities must be positive")
            self.tree.set(int(i), p ** self.alpha)
            self.max_priority = max(self.max_priority, p)


class UniformReplay:
    """Ring buffer with uniform sampling; weights are all one."""

    def __init__(self, capacity: int, rng=None):
        self.capacity = capacity
        self.data = [None] * capacity
        self.pos = 0
        self.size = 0
        self.rng = np.random.default_rng(0) if rng is None else rng

    def __len__(self):
        return self.size

    def add(self, item) -> int:
        i = self.pos
        self.data[i] = item
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def sample(self, batch: int, beta: float = 0.0):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        idx = self.rng.integers(0, self.size, batch)
        return idx, [self.data[i] for i in idx], np.ones(batch)

    def update(self, indices, priorities) -> None:
        pass
