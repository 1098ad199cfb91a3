"""Walk through the three radio links: probabilistic-LoS ground-to-air,
LoS air-to-air, and the coherent multi-relay air-to-ground link.

Run:  python3 demos/link_budget.py
"""

import numpy as np

from aavrelay.channel import a2a_broadcast_rate, g2a_rate, p_los, vaa_a2g_rate
from aavrelay.config import ChannelParams, WorldConfig
from aavrelay.world import AavState, SensorNode, World

params = ChannelParams()

print("LoS probability rises with elevation angle:")
for theta in (0, 15, 30, 45, 60, 75, 90):
    print(f"  {theta:3d} deg -> P_LoS = {p_los(float(theta), params):.4f}")

print("\nGround-to-air uplink rate falls with horizontal range (15 m altitude):")
aav = AavState(0, np.array([0.0, 0.0, 15.0]), 0.5)
for dist in (5, 25, 50, 100, 200):
    sn = SensorNode(0, np.array([float(dist), 0.0, 0.0]), 2e5, 0.1)
    rate = g2a_rate(sn, aav, params)
    print(f"  {dist:4d} m  -> {rate / 1e6:7.2f} Mbit/s")

print("\nAerial broadcast is pinned to the slowest receiver:")
cfg3 = WorldConfig(n_sn=1, n_aav=3)
sensors = (SensorNode(0, np.array([1.0, 1.0, 0.0]), 2e5, 0.1),)


def swarm(*xy):
    aavs = tuple(
        AavState(j, np.array([x, y, 15.0]), 0.5) for j, (x, y) in enumerate(xy)
    )
    return World(config=WorldConfig(n_sn=1, n_aav=len(aavs)), sensors=sensors, aavs=aavs)


tight = swarm((0, 0), (40, 0), (0, 40))
spread = swarm((0, 0), (40, 0), (0, 300))
print(f"  receivers at 40/40 m   -> {a2a_broadcast_rate(0, tight, params) / 1e6:6.2f} Mbit/s")
print(f"  one receiver at 300 m  -> {a2a_broadcast_rate(0, spread, params) / 1e6:6.2f} Mbit/s")

print("\nCoherent combining toward the base station (amplitudes add):")
for n in (1, 2, 4):
    spots = [(2000 + 100 * np.cos(2 * np.pi * k / n), 2000 + 100 * np.sin(2 * np.pi * k / n))
             for k in range(n)]
    world = swarm(*spots)
    snr, rate = vaa_a2g_rate(world, params)
    print(f"  {n} relays equidistant from BS -> SNR {snr:10.1f}  rate {rate / 1e6:6.2f} Mbit/s")
print("  (4 relays give exactly 16x the single-relay SNR)")
