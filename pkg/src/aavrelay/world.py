"""Scenario geometry: sensor placement, AAV kinematics, and flight constraints.

World values are immutable snapshots; every operation returns a new World.
The enforced rules are: AAVs stay inside the rectangular flight area, keep a
minimum pairwise separation d_min, and never move farther than
v_max * delta_move in one slot.  Each enforcement action (speed cap, boundary
clamp, separation hold) is reported as a Violation so the environment can
penalize it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .config import WorldConfig


@dataclass(frozen=True)
class SensorNode:
    id: int
    position: np.ndarray        # (3,), z = 0
    data_volume: float          # bits generated per slot
    transmit_power: float       # watts


@dataclass(frozen=True)
class AavState:
    id: int
    position: np.ndarray        # (3,), z = aav_altitude
    transmit_power: float       # watts


@dataclass(frozen=True)
class World:
    config: WorldConfig
    sensors: Tuple[SensorNode, ...]
    aavs: Tuple[AavState, ...]

    def sn_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sensors])

    def aav_positions(self) -> np.ndarray:
        return np.array([a.position for a in self.aavs])

    def data_volumes(self) -> np.ndarray:
        return np.array([s.data_volume for s in self.sensors])


@dataclass(frozen=True)
class Violation:
    kind: str                   # bounds | separation | speed
    aav_id: int
    magnitude: float


def _frozen(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float).copy()
    out.setflags(write=False)
    return out


def boundary_positions(config: WorldConfig) -> np.ndarray:
    """Initial AAV (x, y) sites: the four corners for n_aav=4, else points
    evenly spaced along the area perimeter starting at (x_min, y_min)."""
    if config.n_aav == 4:
        return np.array(
            [
                [config.x_min, config.y_min],
                [config.x_min, config.y_max],
                [config.x_max, config.y_min],
                [config.x_max, config.y_max],
            ]
        )
    w = config.x_max - config.x_min
    h = config.y_max - config.y_min
    perimeter = 2 * (w + h)
    sites = []
    for k in range(config.n_aav):
        t = perimeter * k / config.n_aav
        if t < w:
            xy = (config.x_min + t, config.y_min)
        elif t < w + h:
            xy = (config.x_max, config.y_min + (t - w))
        elif t < 2 * w + h:
            xy = (config.x_max - (t - w - h), config.y_max)
        else:
            xy = (config.x_min, config.y_max - (t - 2 * w - h))
        sites.append(xy)
    return np.array(sites)


def draw_data_volumes(config: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-SN data volume for one episode, uniform in the configured range."""
    return rng.uniform(config.data_volume_min, config.data_volume_max, size=config.n_sn)


def generate_topology(config: WorldConfig, seed: int) -> World:
    """Sample a clustered sensor field and place AAVs on the boundary.

    Cluster centers are drawn from a Gaussian around the area center
    (denser clusters central, sparser toward the edges); each SN joins a
    center-biased cluster and scatters around it by cluster_spread.
    Deterministic for a given (config, seed).
    """
    config.validate()
    rng = np.random.default_rng(seed)
    cx = 0.5 * (config.x_min + config.x_max)
    cy = 0.5 * (config.y_min + config.y_max)
    half_w = 0.5 * (config.x_max - config.x_min)
    half_h = 0.5 * (config.y_max - config.y_min)

    centers = np.column_stack(
        [
            rng.normal(cx, 0.5 * half_w, size=config.cluster_count),
            rng.normal(cy, 0.5 * half_h, size=config.cluster_count),
        ]
    )
    centers[:, 0] = np.clip(centers[:, 0], config.x_min, config.x_max)
    centers[:, 1] = np.clip(centers[:, 1], config.y_min, config.y_max)

    # Clusters nearer the center attract more SNs.
    d_center = np.hypot(centers[:, 0] - cx, centers[:, 1] - cy)
    scale = max(half_w, half_h)
    weights = np.exp(-d_center / scale)
    weights = weights / weights.sum()
    membership = rng.choice(config.cluster_count, size=config.n_sn, p=weights)

    xy = centers[membership] + rng.normal(0.0, config.cluster_spread, size=(config.n_sn, 2))
    xy[:, 0] = np.clip(xy[:, 0], config.x_min, config.x_max)
    xy[:, 1] = np.clip(xy[:, 1], config.y_min, config.y_max)

    volumes = draw_data_volumes(config, rng)
    sensors = tuple(
        SensorNode(
            id=i,
            position=_frozen([xy[i, 0], xy[i, 1], 0.0]),
            data_volume=float(volumes[i]),
            transmit_power=config.sn_transmit_power,
        )
        for i in range(config.n_sn)
    )

    sites = boundary_positions(config)
    if config.n_aav >= 2:
        sep = _pairwise_distances(sites)
        if sep.min() < config.d_min:
            raise ValueError(
                f"boundary placement for n_aav={config.n_aav} violates d_min={config.d_min}"
            )
    aavs = tuple(
        AavState(
            id=j,
            position=_frozen([sites[j, 0], sites[j, 1], config.aav_altitude]),
            transmit_power=config.aav_transmit_power,
        )
        for j in range(config.n_aav)
    )
    return World(config=config, sensors=sensors, aavs=aavs)


def with_data_volumes(world: World, volumes: Sequence[float]) -> World:
    """Same geometry, fresh per-episode data volumes."""
    if len(volumes) != len(world.sensors):
        raise ValueError("one data volume per sensor required")
    sensors = tuple(
        SensorNode(s.id, s.position, float(v), s.transmit_power)
        for s, v in zip(world.sensors, volumes)
    )
    return World(config=world.config, sensors=sensors, aavs=world.aavs)


def _pairwise_distances(xy: np.ndarray) -> np.ndarray:
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    n = len(xy)
    return d + np.eye(n) * 1e18  # mask self-distances


def apply_moves(
    world: World,
    displacements: Sequence[Sequence[float]],
    delta_move: float,
) -> Tuple[World, List[Violation]]:
    """Apply per-AAV (dx, dy) requests under the flight constraints.

    Order of enforcement per AAV: speed cap (direction preserved), boundary
    clamp, then minimum-separation hold.  An AAV's clamped position is
    accepted only if it clears d_min against every already-finalized position
    and every later AAV's previous position; otherwise it holds where it was,
    which keeps the separation invariant exact regardless of who moved.
    """
    cfg = world.config
    disp = np.asarray(displacements, dtype=float)
    if disp.shape != (cfg.n_aav, 2):
        raise ValueError(f"expected {cfg.n_aav} displacements, got shape {disp.shape}")
    if delta_move <= 0:
        raise ValueError("delta_move must be > 0")

    violations: List[Violation] = []
    max_step = cfg.v_max * delta_move
    prev = world.aav_positions()[:, :2]

    proposed = np.empty_like(prev)
    for j in range(cfg.n_aav):
        d = disp[j]
        norm = float(np.hypot(d[0], d[1]))
        if norm > max_step + 1e-12:
            d = d * (max_step / norm)
            violations.append(Violation("speed", j, norm - max_step))
        target = prev[j] + d
        clamped = np.array(
            [
                min(max(target[0], cfg.x_min), cfg.x_max),
                min(max(target[1], cfg.y_min), cfg.y_max),
            ]
        )
        if not np.array_equal(clamped, target):
            violations.append(Violation("bounds", j, float(np.hypot(*(target - clamped)))))
        proposed[j] = clamped

    final = prev.copy()
    moved = np.zeros(cfg.n_aav, dtype=bool)
    for j in range(cfg.n_aav):
        candidate = proposed[j]
        ok = True
        for k in range(cfg.n_aav):
            if k == j:
                continue
            other = final[k] if k < j else prev[k]
            if np.hypot(*(candidate - other)) < cfg.d_min:
                ok = False
                break
        if ok:
            final[j] = candidate
            moved[j] = True
        else:
            # Hold previous position; previous state satisfied d_min pairwise.
            if not np.array_equal(candidate, prev[j]):
                violations.append(Violation("separation", j, 0.0))
            final[j] = prev[j]

    aavs = tuple(
        AavState(
            id=j,
            position=_frozen([final[j, 0], final[j, 1], cfg.aav_altitude]),
            transmit_power=world.aavs[j].transmit_power,
        )
        for j in range(cfg.n_aav)
    )
    return World(config=cfg, sensors=world.sensors, aavs=aavs), violations


def world_to_json(world: World, seed: int | None = None) -> str:
    """Serialize topology (positions, config, seed) for scenario reuse."""
    cfg = world.config
    doc = {
        "config": {
            "x_min": cfg.x_min,
            "x_max": cfg.x_max,
            "y_min": cfg.y_min,
            "y_max": cfg.y_max,
            "aav_altitude": cfg.aav_altitude,
            "bs_position": list(cfg.bs_position),
            "n_sn": cfg.n_sn,
            "n_aav": cfg.n_aav,
            "d_min": cfg.d_min,
            "v_max": cfg.v_max,
            "cluster_count": cfg.cluster_count,
            "cluster_spread": cfg.cluster_spread,
            "comm_radius": cfg.comm_radius,
            "sn_transmit_power": cfg.sn_transmit_power,
            "aav_transmit_power": cfg.aav_transmit_power,
            "data_volume_min": cfg.data_volume_min,
            "data_volume_max": cfg.data_volume_max,
        },
        "seed": seed,
        "sensors": [
            {
                "id": s.id,
                "position": list(map(float, s.position)),
                "data_volume": s.data_volume,
                "transmit_power": s.transmit_power,
            }
            for s in world.sensors
        ],
        "aavs": [
            {
                "id": a.id,
                "position": list(map(float, a.position)),
                "transmit_power": a.transmit_power,
            }
            for a in world.aavs
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def world_from_json(text: str) -> World:
    doc = json.loads(text)
    raw = dict(doc["config"])
    raw["bs_position"] = tuple(raw["bs_position"])
    cfg = WorldConfig(**raw)
    cfg.validate()
    sensors = tuple(
        SensorNode(
            id=s["id"],
            position=_frozen(s["position"]),
            data_volume=s["data_volume"],
            transmit_power=s["transmit_power"],
        )
        for s in doc["sensors"]
    )
    aavs = tuple(
        AavState(id=a["id"], position=_frozen(a["position"]), transmit_power=a["transmit_power"])
        for a in doc["aavs"]
    )
    return World(config=cfg, sensors=sensors, aavs=aavs)
