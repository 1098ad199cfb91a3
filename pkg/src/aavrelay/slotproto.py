"""Time-slotted four-phase protocol: collection, aerial broadcast, coherent
forwarding, and movement, with data accounting, AoI dynamics, and per-slot
propulsion energy.

Each slot has unit length.  The transmission phases always fill whatever the
movement phase leaves (the fleet hovers through them), so the recorded phase
durations sum to exactly one slot.  When the collection and broadcast phases
would overrun the slot, the forwarding phase collapses to zero, the slot is
flagged infeasible, and the forwarded fraction Q drops to zero; the learner
feels infeasibility through the reward rather than through an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channel import a2a_broadcast_rate, g2a_rate_matrix, vaa_a2g_rate
from .config import ChannelParams, EnergyParams
from .world import World


@dataclass(frozen=True)
class SlotOutcome:
    delta_g2a: float
    delta_a2a: float
    delta_a2g: float
    delta_move: float
    collected_per_aav: np.ndarray    # S_j, bits
    s_g2a: float                     # bits collected fleet-wide
    s_a2g: float                     # bits forwarded (capped at s_g2a)
    s_c: float                       # bits generated by all SNs this slot
    q_fraction: float                # forwarded fraction, in [0, 1]
    feasible: bool
    per_aav_energy: Optional[np.ndarray] = None  # joules, filled by slot_energy


def schedule_slot(
    world: World,
    assignment: np.ndarray,
    params: ChannelParams,
    delta_move: float,
) -> SlotOutcome:
    """Run the data accounting of one slot for a binary SN-to-AAV assignment.

    assignment is (n_sn, n_aav) with column sums over AAVs <= 1 per SN.
    Collection time is the slowest AAV's sum of per-SN transfer times; the
    broadcast phase is skipped for a single AAV; forwarding gets the
    remainder of the slot.
    """
    n_sn = len(world.sensors)
    n_aav = len(world.aavs)
    beta = np.asarray(assignment)
    if beta.shape != (n_sn, n_aav):
        raise ValueError(f"assignment must have shape ({n_sn}, {n_aav})")
    if np.any((beta != 0) & (beta != 1)):
        raise ValueError("assignment must be binary")
    if np.any(beta.sum(axis=1) > 1):
        raise ValueError("each SN may be assigned to at most one AAV")
    if not 0 <= delta_move < 1:
        raise ValueError("delta_move must lie in [0, 1)")

    volumes = world.data_volumes()
    s_c = float(volumes.sum())
    assigned_any = beta.sum() > 0

    if assigned_any:
        rates = g2a_rate_matrix(world, params)
        if np.any((beta == 1) & (rates <= 0)):
            raise ValueError("assignment uses an SN with zero achievable rate")
        per_pair_time = np.where(beta == 1, volumes[:, None] / np.maximum(rates, 1e-300), 0.0)
        delta_per_aav = per_pair_time.sum(axis=0)
    else:
        delta_per_aav = np.zeros(n_aav)

    collected = (beta * volumes[:, None]).sum(axis=0)
    s_g2a = float(collected.sum())
    raw_g2a = float(delta_per_aav.max()) if n_aav else 0.0

    if n_aav >= 2 and s_g2a > 0:
        raw_a2a = max(
            collected[j] / a2a_broadcast_rate(j, world, params) for j in range(n_aav)
        )
    else:
        raw_a2a = 0.0

    # Cap recorded phases so the four durations always fill exactly one slot.
    budget = 1.0 - delta_move
    delta_g2a = min(raw_g2a, budget)
    delta_a2a = min(raw_a2a, budget - delta_g2a)
    delta_a2g = budget - delta_g2a - delta_a2a
    feasible = raw_g2a + raw_a2a + delta_move < 1.0
    if not feasible:
        delta_a2g = 0.0
        s_a2g = 0.0
    else:
        _, rate_bs = vaa_a2g_rate(world, params)
        s_a2g = min(delta_a2g * rate_bs, s_g2a)

    # summation order can push min(s_g2a, s_a2g)/s_c an ulp past 1.0
    q = min(1.0, min(s_g2a, s_a2g) / s_c) if s_c > 0 else 0.0
    return SlotOutcome(
        delta_g2a=float(delta_g2a),
        delta_a2a=float(delta_a2a),
        delta_a2g=float(delta_a2g),
        delta_move=float(delta_move),
        collected_per_aav=collected,
        s_g2a=s_g2a,
        s_a2g=float(s_a2g),
        s_c=s_c,
        q_fraction=float(q),
        feasible=bool(feasible),
    )


def update_aoi(aoi: np.ndarray, served_mask: np.ndarray, q: float) -> np.ndarray:
    """Advance all ages by one slot; served SNs keep the (1-q) fraction.

    served: A' = (1 - q)(A + 1); unserved: A' = A + 1.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    aoi = np.asarray(aoi, dtype=float)
    served = np.asarray(served_mask, dtype=bool)
    grown = aoi + 1.0
    return np.where(served, (1.0 - q) * grown, grown)


def propulsion_power(v, params: EnergyParams):
    """Rotary-wing propulsion power at horizontal speed v (m/s).

    Blade-profile term grows with v^2, the induced term dips near the hover
    induced velocity, and the parasite term grows with v^3; the curve has a
    shallow interior minimum below the hover power p0 + p1.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("speed must be >= 0")
    profile = params.p0 * (1.0 + 3.0 * v**2 / params.u_tip**2)
    induced = params.p1 * np.sqrt(
        1.0 + v**4 / (4.0 * params.v0_induced**4) - v**2 / (2.0 * params.v0_induced**2)
    )
    parasite = (
        0.5
        * params.air_density
        * params.d0_drag
        * params.rotor_solidity
        * params.rotor_disc_area
        * v**3
    )
    out = profile + induced + parasite
    return out if out.ndim else float(out)


def hover_power(params: EnergyParams) -> float:
    return params.p0 + params.p1


def slot_energy(outcome: SlotOutcome, speeds: np.ndarray, params: EnergyParams) -> np.ndarray:
    """Per-AAV slot energy: propulsion at speed over the move phase plus
    hover power over the three transmission phases."""
    speeds = np.asarray(speeds, dtype=float)
    if speeds.shape != outcome.collected_per_aav.shape:
        raise ValueError("one speed per AAV required")
    hover_time = outcome.delta_g2a + outcome.delta_a2a + outcome.delta_a2g
    return propulsion_power(speeds, params) * outcome.delta_move + hover_power(params) * hover_time


def with_energy(outcome: SlotOutcome, speeds: np.ndarray, params: EnergyParams) -> SlotOutcome:
    return replace(outcome, per_aav_energy=slot_energy(outcome, speeds, params))
