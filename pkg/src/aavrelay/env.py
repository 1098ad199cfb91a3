"""Episodic MDP around the world/channel/slot-protocol stack.

Observations are flat vectors: AAV (x, y) pairs, then SN (x, y) pairs
(positions normalized to [0, 1] by the area bounds), then per-SN ages
normalized by the episode length.  Actions are per-AAV (ax, ay) in [-1, 1]^2,
scaled to the maximum per-slot displacement v_max * delta_move.  Movement is
applied first; the SN-to-AAV assignment is then derived deterministically
from proximity (each in-range SN talks to its nearest AAV), the slot is
scheduled, ages update, and the reward combines freshness, energy, coverage,
and constraint penalties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import ChannelParams, EnergyParams, EnvConfig, WorldConfig
from .slotproto import schedule_slot, update_aoi, with_energy
from .world import World, apply_moves, draw_data_volumes, generate_topology, with_data_volumes


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    per_aav_rewards: np.ndarray
    scalar_reward: float
    done: bool
    info: Dict


def dpam_assign(world: World, params: ChannelParams, comm_radius: float) -> np.ndarray:
    """Proximity-based assignment: each SN within comm_radius (horizontal)
    of at least one AAV is assigned to its nearest such AAV, ties going to
    the lower AAV index; SNs out of range stay unassigned.

    The returned (n_sn, n_aav) binary matrix always has row sums <= 1.
    """
    sn_xy = world.sn_positions()[:, :2]
    aav_xy = world.aav_positions()[:, :2]
    diff = sn_xy[:, None, :] - aav_xy[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    beta = np.zeros((len(world.sensors), len(world.aavs)), dtype=int)
    in_range = dist <= comm_radius
    masked = np.where(in_range, dist, np.inf)
    nearest = np.argmin(masked, axis=1)  # first index wins exact ties
    has = in_range.any(axis=1)
    beta[np.nonzero(has)[0], nearest[has]] = 1
    return beta


def coverage_counts(world: World, comm_radius: float) -> np.ndarray:
    """Number of SNs inside each AAV's communication radius (overlaps count
    for every covering AAV)."""
    sn_xy = world.sn_positions()[:, :2]
    aav_xy = world.aav_positions()[:, :2]
    diff = sn_xy[:, None, :] - aav_xy[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    return (dist <= comm_radius).sum(axis=0)


def episode_metrics(trace: Sequence[Dict], episode_length: Optional[int] = None):
    """Time-averaged AoI over SNs (f1) and total fleet energy in joules (f2)
    from a completed per-slot trace."""
    if not trace:
        raise ValueError("empty trace")
    if episode_length is not None and len(trace) != episode_length:
        raise ValueError(f"incomplete trace: {len(trace)} of {episode_length} slots")
    ages = np.array([rec["aoi"] for rec in trace])
    energy = np.array([rec["energy_j"] for rec in trace])
    return float(ages.mean()), float(energy.sum())


class ForwardingEnv:
    """Multi-AAV data-forwarding environment with AoI-driven rewards."""

    def __init__(
        self,
        env_cfg: EnvConfig,
        world_cfg: WorldConfig,
        channel: ChannelParams,
        energy: EnergyParams,
    ):
        env_cfg.validate()
        world_cfg.validate()
        channel.validate()
        energy.validate()
        self.cfg = env_cfg
        self.world_cfg = world_cfg
        self.channel = channel
        self.energy = energy
        self._base_world = None
        if env_cfg.fixed_topology:
            self._base_world = generate_topology(world_cfg, env_cfg.world_seed)
        self.world: Optional[World] = None
        self._aoi: Optional[np.ndarray] = None
        self._slot = 0
        self._history: List[np.ndarray] = []
        self._trace: List[Dict] = []

    @property
    def n_aav(self) -> int:
        return self.world_cfg.n_aav

    @property
    def obs_dim(self) -> int:
        return 2 * self.world_cfg.n_aav + 3 * self.world_cfg.n_sn

    @property
    def action_dim(self) -> int:
        return 2 * self.world_cfg.n_aav

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self._base_world is not None:
            volumes = draw_data_volumes(self.world_cfg, rng)
            self.world = with_data_volumes(self._base_world, volumes)
        else:
            self.world = generate_topology(self.world_cfg, seed)
        self._aoi = np.zeros(self.world_cfg.n_sn)
        self._slot = 0
        self._trace = []
        obs = self._observe()
        self._history = [obs]
        return obs

    def _observe(self) -> np.ndarray:
        cfg = self.world_cfg
        span_x = cfg.x_max - cfg.x_min
        span_y = cfg.y_max - cfg.y_min
        aav_xy = self.world.aav_positions()[:, :2]
        sn_xy = self.world.sn_positions()[:, :2]
        norm = np.empty(self.obs_dim)
        a = 2 * cfg.n_aav
        norm[0:a:2] = (aav_xy[:, 0] - cfg.x_min) / span_x
        norm[1:a:2] = (aav_xy[:, 1] - cfg.y_min) / span_y
        s = a + 2 * cfg.n_sn
        norm[a:s:2] = (sn_xy[:, 0] - cfg.x_min) / span_x
        norm[a + 1 : s : 2] = (sn_xy[:, 1] - cfg.y_min) / span_y
        norm[s:] = self._aoi / self.cfg.episode_length
        return norm

    def step(self, action: np.ndarray) -> StepResult:
        if self.world is None:
            raise RuntimeError("reset the environment before stepping")
        if self._slot >= self.cfg.episode_length:
            raise RuntimeError("episode is done; call reset")
        cfg = self.world_cfg
        act = np.clip(np.asarray(action, dtype=float).reshape(cfg.n_aav, 2), -1.0, 1.0)
        max_step = cfg.v_max * self.cfg.delta_move
        displacements = act * max_step

        prev_xy = self.world.aav_positions()[:, :2]
        self.world, violations = apply_moves(self.world, displacements, self.cfg.delta_move)
        new_xy = self.world.aav_positions()[:, :2]
        speeds = np.sqrt(((new_xy - prev_xy) ** 2).sum(-1)) / self.cfg.delta_move

        beta = dpam_assign(self.world, self.channel, cfg.comm_radius)
        outcome = schedule_slot(self.world, beta, self.channel, self.cfg.delta_move)
        outcome = with_energy(outcome, speeds, self.energy)

        served = beta.sum(axis=1) == 1
        self._aoi = update_aoi(self._aoi, served, outcome.q_fraction)

        covered = coverage_counts(self.world, cfg.comm_radius)
        penalty_counts = np.zeros(cfg.n_aav)
        for v in violations:
            penalty_counts[v.aav_id] += 1.0
        mean_age = float(self._aoi.mean()) / self.cfg.episode_length
        rewards = (
            -self.cfg.rho1 * mean_age
            - self.cfg.rho2 * outcome.per_aav_energy
            + self.cfg.rho3 * covered
            - self.cfg.oob_penalty * penalty_counts
        )
        scalar = float(rewards.mean())

        self._slot += 1
        done = self._slot == self.cfg.episode_length
        self._trace.append(
            {
                "slot": self._slot,
                "assigned_per_aav": beta.sum(axis=0).tolist(),
                "served": np.nonzero(served)[0].tolist(),
                "delta_g2a": outcome.delta_g2a,
                "delta_a2a": outcome.delta_a2a,
                "delta_a2g": outcome.delta_a2g,
                "delta_move": outcome.delta_move,
                "q": outcome.q_fraction,
                "feasible": outcome.feasible,
                "aoi": self._aoi.tolist(),
                "energy_j": outcome.per_aav_energy.tolist(),
                "violations": len(violations),
                "per_aav_reward": rewards.tolist(),
                "reward": scalar,
            }
        )
        obs = self._observe()
        self._history.append(obs)
        info = {"outcome": outcome, "violations": violations, "beta": beta}
        return StepResult(obs, rewards, scalar, done, info)

    def observe_sequence(self, n: Optional[int] = None) -> np.ndarray:
        """The last n observations, oldest first, zero-padded on the left
        before n steps have elapsed."""
        n = self.cfg.seq_len if n is None else n
        seq = np.zeros((n, self.obs_dim))
        tail = self._history[-n:]
        if tail:
            seq[n - len(tail) :] = np.stack(tail)
        return seq

    def episode_trace(self) -> List[Dict]:
        return list(self._trace)

    def final_metrics(self):
        return episode_metrics(self._trace, self.cfg.episode_length)

    def aoi(self) -> np.ndarray:
        return np.array(self._aoi)
