"""The rotary-wing power curve: hovering is not the cheapest way to fly.

Run:  python3 demos/propulsion_curve.py
"""

import numpy as np

from aavrelay.config import EnergyParams
from aavrelay.slotproto import propulsion_power

params = EnergyParams()
v = np.linspace(0.0, 30.0, 301)
p = propulsion_power(v, params)

print(f"hover power P(0)         = {p[0]:8.2f} W")
k = int(p.argmin())
print(f"most economical speed    = {v[k]:8.2f} m/s at {p[k]:.2f} W")
print(f"full-speed power P(30)   = {p[-1]:8.2f} W")

width = 56
lo, hi = p.min(), p[-1]
print("\npower vs speed:")
for vv in range(0, 31, 2):
    pv = propulsion_power(float(vv), params)
    bar = "#" * int(width * (pv - lo) / (hi - lo) + 1)
    print(f"  {vv:2d} m/s {pv:8.1f} W {bar}")
