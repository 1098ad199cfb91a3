"""Train SAC-TLS on the point-to-goal task for a few minutes and watch the
return approach the analytic optimum.

Run:  python3 demos/train_toy.py [episodes]
"""

import sys

import numpy as np

from aavrelay.config import EnvConfig, SacConfig
from aavrelay.sac import SacTrainer
from aavrelay.toy import PointGoalEnv, optimal_return

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 150
env = PointGoalEnv(EnvConfig(task="point_goal", episode_length=40))
cfg = SacConfig(gamma=0.95, target_entropy=-1.0, hidden_dim=32, trunk_dims=(64, 64),
                batch_size=96, buffer_capacity=20000, warmup_steps=500,
                update_every=2, seq_len=4, dtype="float32")
trainer = SacTrainer(env, cfg, seed=0)
opt = optimal_return(40)
print(f"analytic optimal return: {opt:.2f}")

block = 25
for start in range(0, episodes, block):
    rows = trainer.train(episodes=min(block, episodes - start))
    ev = trainer.evaluate(episodes=3)
    frac = ev["mean_return"] / opt
    bar = "#" * max(0, int(40 * frac))
    print(f"ep {start + len(rows):4d}  eval return {ev['mean_return']:6.2f} "
          f"({frac:5.1%} of optimal) {bar}")
