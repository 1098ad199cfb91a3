"""One time slot end to end: proximity assignment, the four phases, the
forwarded fraction Q, age updates, and per-relay energy.

Run:  python3 demos/slot_protocol.py
"""

import numpy as np

from aavrelay.config import ChannelParams, EnergyParams, WorldConfig
from aavrelay.env import dpam_assign
from aavrelay.slotproto import schedule_slot, update_aoi, with_energy
from aavrelay.world import generate_topology, apply_moves

channel = ChannelParams()
energy = EnergyParams()
cfg = WorldConfig(n_sn=12, n_aav=2, x_max=100.0, y_max=100.0, comm_radius=25.0,
                  cluster_count=3, cluster_spread=10.0)
world = generate_topology(cfg, seed=0)

# fly both relays toward the middle of the field for a few slots
for _ in range(6):
    targets = np.array([[35.0, 45.0], [75.0, 55.0]])
    pos = world.aav_positions()[:, :2]
    world, _ = apply_moves(world, np.clip(targets - pos, -6, 6), delta_move=0.3)

beta = dpam_assign(world, channel, cfg.comm_radius)
print("sensors assigned per relay:", beta.sum(axis=0))

outcome = schedule_slot(world, beta, channel, delta_move=0.3)
print(f"phase durations: collect={outcome.delta_g2a:.3f}s broadcast={outcome.delta_a2a:.3f}s "
      f"forward={outcome.delta_a2g:.3f}s move=0.300s")
print(f"collected {outcome.s_g2a / 1e6:.2f} Mbit, forwarded {outcome.s_a2g / 1e6:.2f} Mbit "
      f"of {outcome.s_c / 1e6:.2f} Mbit generated -> Q = {outcome.q_fraction:.3f}")

ages = np.full(cfg.n_sn, 5.0)
served = beta.sum(axis=1) == 1
new_ages = update_aoi(ages, served, outcome.q_fraction)
print("ages (served entries shrink, unserved grow):")
print("  before:", ages)
print("  after: ", np.round(new_ages, 2))

outcome = with_energy(outcome, speeds=np.array([10.0, 0.0]), params=energy)
print(f"slot energy: moving relay {outcome.per_aav_energy[0]:.1f} J, "
      f"hovering relay {outcome.per_aav_energy[1]:.1f} J")
