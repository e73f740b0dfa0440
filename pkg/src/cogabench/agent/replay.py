"""Prioritized experience replay with a sum tree.

Observations are stored already encoded for the network (uint8, at net
input resolution) and next-step masks are bit-packed, so a filled desk
buffer stays in the tens of megabytes.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..actions import N_JOINT
from ..affordance.core import ActionMask
from ..errors import ConfigurationError

MASK_BYTES = N_JOINT // 8


class SumTree:
    """Fixed-capacity binary indexed sum tree over leaf priorities."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(f"capacity must be >= 1, got {capacity}")
        size = 1
        while size < capacity:
            size *= 2
        self.capacity = capacity
        self._leaf0 = size
        self._tree = np.zeros(2 * size, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self._tree[1])

    def get(self, leaf: int) -> float:
        return float(self._tree[self._leaf0 + leaf])

    def update(self, leaf: int, value: float) -> None:
        if not 0 <= leaf < self.capacity:
            raise IndexError(f"leaf {leaf} out of range")
        if not np.isfinite(value) or value < 0.0:
            raise ValueError(f"bad priority {value}")
        i = self._leaf0 + leaf
        self._tree[i] = value
        i //= 2
        while i >= 1:
            self._tree[i] = self._tree[2 * i] + self._tree[2 * i + 1]
            i //= 2

    def find(self, mass: float) -> int:
        """Leaf index whose cumulative-priority interval contains ``mass``."""
        i = 1
        while i < self._leaf0:
            left = self._tree[2 * i]
            if mass < left:
                i = 2 * i
            else:
                mass -= left
                i = 2 * i + 1
        return min(i - self._leaf0, self.capacity - 1)


class Transition(NamedTuple):
    """One stored step; obs fields are network-encoded uint8 arrays."""

    obs: np.ndarray
    instr: np.ndarray
    action_flat: int
    reward: float
    done: bool
    next_obs: np.ndarray
    next_mask: ActionMask


class SampleBatch(NamedTuple):
    indices: np.ndarray     # (B,) buffer slots, for priority updates
    obs: np.ndarray         # (B, C, h, w) uint8
    instr: np.ndarray       # (B, D) float64
    actions: np.ndarray     # (B,) int64 flat joint indices
    rewards: np.ndarray     # (B,) float64
    dones: np.ndarray       # (B,) bool
    next_obs: np.ndarray    # (B, C, h, w) uint8
    next_masks: np.ndarray  # (B, 4096) bool
    weights: np.ndarray     # (B,) float64, normalized importance weights


class PrioritizedBuffer:
    """Ring buffer with proportional prioritized sampling.

    Priorities are stored already exponentiated: a transition with TD
    error d gets leaf value (|d| + priority_eps) ** alpha.  New
    transitions enter at the running maximum so each is sampled at least
    once before its priority settles.
    """

    def __init__(self, capacity: int, obs_shape: tuple[int, int, int],
                 instr_dim: int, alpha: float = 0.6, beta: float = 0.4,
                 priority_eps: float = 1e-3):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigurationError(f"alpha must be in [0, 1], got {alpha}")
        if beta < 0.0:
            raise ConfigurationError(f"beta must be >= 0, got {beta}")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.priority_eps = priority_eps
        self._tree = SumTree(capacity)
        self._max_leaf = 1.0
        self._size = 0
        self._next = 0
        c, h, w = obs_shape
        self._obs = np.zeros((capacity, c, h, w), dtype=np.uint8)
        self._next_obs = np.zeros((capacity, c, h, w), dtype=np.uint8)
        self._instr = np.zeros((capacity, instr_dim), dtype=np.float64)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._dones = np.zeros(capacity, dtype=bool)
        self._next_masks = np.zeros((capacity, MASK_BYTES), dtype=np.uint8)

    def __len__(self) -> int:
        return self._size

    def push(self, tr: Transition) -> None:
        i = self._next
        self._obs[i] = tr.obs
        self._next_obs[i] = tr.next_obs
        self._instr[i] = tr.instr
        self._actions[i] = tr.action_flat
        self._rewards[i] = tr.reward
        self._dones[i] = tr.done
        self._next_masks[i] = np.frombuffer(tr.next_mask.pack(), dtype=np.uint8)
        self._tree.update(i, self._max_leaf)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> SampleBatch | None:
        """Stratified proportional sample, or None while underfilled."""
        if self._size < batch_size:
            return None
        total = self._tree.total
        seg = total / batch_size
        idx = np.empty(batch_size, dtype=np.int64)
        for k in range(batch_size):
            mass = rng.uniform(seg * k, seg * (k + 1))
            leaf = self._tree.find(mass)
            if leaf >= self._size:  # stale zero-priority region, clamp
                leaf = self._size - 1
            idx[k] = leaf
        probs = np.array([self._tree.get(int(i)) for i in idx]) / total
        weights = (self._size * probs) ** (-self.beta)
        weights /= weights.max()
        masks = np.unpackbits(self._next_masks[idx], axis=1)[:, :N_JOINT].astype(bool)
        return SampleBatch(
            indices=idx,
            obs=self._obs[idx],
            instr=self._instr[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            dones=self._dones[idx],
            next_obs=self._next_obs[idx],
            next_masks=masks,
            weights=weights,
        )

    def update_priorities(self, indices: np.ndarray, td_abs: np.ndarray) -> None:
        for i, d in zip(indices, td_abs):
            leaf = (abs(float(d)) + self.priority_eps) ** self.alpha
            self._max_leaf = max(self._max_leaf, leaf)
            self._tree.update(int(i), leaf)
