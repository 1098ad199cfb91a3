"""Point-to-goal toy task for trainer smoke tests.

A single agent lives in the unit square, starts at a fixed point, and earns
1 - dist(position, goal)/sqrt(2) every step, so returns are positive and the
optimal policy (move straight at full step toward the goal, then sit on it)
has a closed-form return: no learned component is needed to know the ceiling.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional

import numpy as np

from .config import EnvConfig
from .env import StepResult

START = (0.2, 0.2)
GOAL = (0.8, 0.8)
STEP_SIZE = 0.1
_DIAG = math.sqrt(2.0)


class PointGoalEnv:
    """Gym-style single-agent navigation task on [0, 1]^2."""

    def __init__(self, env_cfg: EnvConfig):
        env_cfg.validate()
        self.cfg = env_cfg
        self._pos: Optional[np.ndarray] = None
        self._goal = np.array(GOAL)
        self._slot = 0
        self._history: List[np.ndarray] = []
        self._trace: List[Dict] = []

    @property
    def n_aav(self) -> int:
        return 1

    @property
    def obs_dim(self) -> int:
        return 4

    @property
    def action_dim(self) -> int:
        return 2

    def reset(self, seed: int) -> np.ndarray:
        del seed  # fixed start/goal; signature matches the forwarding env
        self._pos = np.array(START)
        self._slot = 0
        self._trace = []
        obs = self._observe()
        self._history = [obs]
        return obs

    def _observe(self) -> np.ndarray:
        return np.concatenate([self._pos, self._goal])

    def step(self, action: np.ndarray) -> StepResult:
        if self._pos is None:
            raise RuntimeError("reset the environment before stepping")
        if self._slot >= self.cfg.episode_length:
            raise RuntimeError("episode is done; call reset")
        act = np.clip(np.asarray(action, dtype=float).reshape(2), -1.0, 1.0)
        move = act * STEP_SIZE
        norm = float(np.hypot(move[0], move[1]))
        if norm > STEP_SIZE:
            move = move * (STEP_SIZE / norm)
        self._pos = np.clip(self._pos + move, 0.0, 1.0)
        dist = float(np.hypot(*(self._pos - self._goal)))
        reward = 1.0 - dist / _DIAG
        self._slot += 1
        done = self._slot == self.cfg.episode_length
        self._trace.append({"slot": self._slot, "dist": dist, "reward": reward})
        obs = self._observe()
        self._history.append(obs)
        return StepResult(obs, np.array([reward]), reward, done, {})

    def observe_sequence(self, n: Optional[int] = None) -> np.ndarray:
        n = self.cfg.seq_len if n is None else n
        seq = np.zeros((n, self.obs_dim))
        tail = self._history[-n:]
        if tail:
            seq[n - len(tail) :] = np.stack(tail)
        return seq

    def episode_trace(self) -> List[Dict]:
        return list(self._trace)

    def final_metrics(self):
        return 0.0, 0.0


def optimal_return(episode_length: int) -> float:
    """Return of the provably optimal controller (straight line at full
    step, then hover on the goal).

    No policy can shrink the goal distance by more than STEP_SIZE per slot,
    and the per-step reward is decreasing in that distance, so this bounds
    every policy's return from above.
    """
    d = math.hypot(GOAL[0] - START[0], GOAL[1] - START[1])
    total = 0.0
    for _ in range(episode_length):
        d = max(0.0, d - STEP_SIZE)
        total += 1.0 - d / _DIAG
    return total
