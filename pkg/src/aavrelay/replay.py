"""Ring-buffer replay storage of state-sequence transitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np


@dataclass(frozen=True)
class Transition:
    state_seq: np.ndarray       # (n, obs_dim), zero-padded windows
    action: np.ndarray          # (action_dim,)
    reward: float
    next_state_seq: np.ndarray  # (n, obs_dim)
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform without-replacement
    batch sampling.  Windows are stored as float32; training casts to the
    network dtype on the way out."""

    def __init__(self, capacity: int, seq_len: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.size = 0
        self._cursor = 0
        self._states = np.zeros((capacity, seq_len, obs_dim), dtype=np.float32)
        self._actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._next_states = np.zeros((capacity, seq_len, obs_dim), dtype=np.float32)
        self._dones = np.zeros(capacity, dtype=np.float64)

    def add(self, transition: Transition):
        i = self._cursor
        self._states[i] = transition.state_seq
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_states[i] = transition.next_state_seq
        self._dones[i] = 1.0 if transition.done else 0.0
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Dict[str, np.ndarray]:
        if batch_size > self.size:
            raise ValueError("not enough transitions to sample the batch")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "state_seq": self._states[idx],
            "action": self._actions[idx],
            "reward": self._rewards[idx][:, None],
            "next_state_seq": self._next_states[idx],
            "done": self._dones[idx][:, None],
        }

    def __len__(self) -> int:
        return self.size
