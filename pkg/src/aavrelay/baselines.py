"""Non-learning reference policies: AoI-weighted greedy pursuit and uniform
random actions."""

from __future__ import annotations

import numpy as np

from .world import World


def greedy_policy(observation: np.ndarray, world: World) -> np.ndarray:
    """Move every AAV at full step toward the AoI-weighted centroid of the
    currently-uncovered SNs.

    Ages are read from the observation tail (normalization cancels in the
    weighting); when every SN is covered the fleet hovers, and when all
    weights are zero the plain centroid is used.
    """
    cfg = world.config
    obs = np.asarray(observation, dtype=float)
    ages = obs[2 * cfg.n_aav + 2 * cfg.n_sn :]
    if ages.shape != (cfg.n_sn,):
        raise ValueError("observation does not match the world layout")

    sn_xy = world.sn_positions()[:, :2]
    aav_xy = world.aav_positions()[:, :2]
    diff = sn_xy[:, None, :] - aav_xy[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    uncovered = ~(dist <= cfg.comm_radius).any(axis=1)

    action = np.zeros((cfg.n_aav, 2))
    if uncovered.any():
        weights = ages[uncovered]
        if weights.sum() <= 0:
            weights = np.ones(uncovered.sum())
        target = (sn_xy[uncovered] * weights[:, None]).sum(axis=0) / weights.sum()
        for j in range(cfg.n_aav):
            bearing = target - aav_xy[j]
            norm = float(np.hypot(bearing[0], bearing[1]))
            if norm > 1e-12:
                action[j] = bearing / norm
    return action.reshape(-1)


def random_policy(rng: np.random.Generator, action_dim: int) -> np.ndarray:
    """Uniform action in [-1, 1]^d from the caller's seeded generator."""
    return rng.uniform(-1.0, 1.0, size=action_dim)
