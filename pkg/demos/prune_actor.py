"""Structured pruning in action: briefly train a small policy, shave 80% of
its hidden units by group magnitude, and compare parameter counts and
behavior.

Run:  python3 demos/prune_actor.py
"""

import numpy as np

from aavrelay.config import EnvConfig, SacConfig
from aavrelay.nn import ActorNetwork
from aavrelay.pruning import (
    evaluate_actor,
    layer_group_norms,
    regularized_finetune,
    structured_prune,
)
from aavrelay.sac import SacTrainer
from aavrelay.toy import PointGoalEnv

env = PointGoalEnv(EnvConfig(task="point_goal", episode_length=40))
cfg = SacConfig(gamma=0.95, target_entropy=-1.0, hidden_dim=32, trunk_dims=(64, 64),
                batch_size=96, buffer_capacity=20000, warmup_steps=500,
                update_every=2, seq_len=4, dtype="float32")
trainer = SacTrainer(env, cfg, seed=0)
print("training 120 episodes...")
trainer.train(episodes=120)
print("finetuning 30 episodes with a group-lasso penalty (lambda = 1e-6)...")
networks, header = regularized_finetune(trainer, 1e-6, episodes=30)

values, meta = networks["actor"], header["actor_meta"]
norms = layer_group_norms(values, meta)
print("group-norm spread per layer (min / median / max):")
for layer, n in norms.items():
    print(f"  {layer:<10} {n.min():8.4f} {np.median(n):8.4f} {n.max():8.4f}")

full = sum(v.size for v in values.values())
for ratio in (0.5, 0.8):
    pruned = structured_prune(values, meta, ratio)
    small = sum(v.size for v in pruned.values())
    actor = ActorNetwork.from_params(pruned, meta)
    ret = evaluate_actor(PointGoalEnv(EnvConfig(task="point_goal", episode_length=40)),
                         actor, episodes=5, seed=0)
    print(f"ratio {ratio:.0%}: {full} -> {small} params "
          f"({small / full:.1%}), eval return {ret:.2f}")
