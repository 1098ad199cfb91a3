"""Structured pruning of the actor: group-lasso regularized finetuning
followed by magnitude-based removal of whole hidden units.

A prunable group is the set of weights that generate one hidden unit's
output: the three gate columns of a GRU unit, one squeeze-excitation
bottleneck row, or one dense trunk column (with bias).  Removing a group
rebuilds every affected array, shrinking the downstream consumers' input
rows as well; the policy head's output dimensions are never pruned.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from .nn import ActorNetwork
from .sac import SacTrainer


def _gru_dims(values: Dict[str, np.ndarray]) -> int:
    return values["encoder.gru.u"].shape[0]


def _trunk_indices(values: Dict[str, np.ndarray]) -> List[int]:
    out = []
    i = 0
    while f"trunk.{i}.w" in values:
        out.append(i)
        i += 1
    return out


def layer_group_norms(values: Dict[str, np.ndarray], meta: Dict) -> Dict[str, np.ndarray]:
    """L2 norm of each prunable group, keyed by layer name.

    Layers: "gru" (hidden units), "se" (bottleneck units), "trunk.i"
    (output units of every trunk layer).
    """
    norms: Dict[str, np.ndarray] = {}
    if meta.get("recurrent"):
        h = _gru_dims(values)
        w = values["encoder.gru.w"].reshape(-1, 3, h)
        u = values["encoder.gru.u"].reshape(-1, 3, h)
        sq = (w**2).sum(axis=(0, 1)) + (u**2).sum(axis=(0, 1))
        if "encoder.gru.b_ih" in values:
            sq = sq + (values["encoder.gru.b_ih"].reshape(3, h) ** 2).sum(axis=0)
            sq = sq + (values["encoder.gru.b_hh"].reshape(3, h) ** 2).sum(axis=0)
        norms["gru"] = np.sqrt(sq)
        if "encoder.se.w1" in values:
            sq = (values["encoder.se.w1"] ** 2).sum(axis=0) + values["encoder.se.b1"] ** 2
            norms["se"] = np.sqrt(sq)
    for i in _trunk_indices(values):
        sq = (values[f"trunk.{i}.w"] ** 2).sum(axis=0) + values[f"trunk.{i}.b"] ** 2
        norms[f"trunk.{i}"] = np.sqrt(sq)
    return norms


def group_lasso_penalty(values: Dict[str, np.ndarray], meta: Dict) -> float:
    """Sum of all prunable group norms (multiply by lambda for the loss)."""
    return float(sum(n.sum() for n in layer_group_norms(values, meta).values()))


def add_group_lasso_grads(params: Dict, meta: Dict, lam: float):
    """Accumulate d(lambda * sum ||w_g||)/dw onto live parameter grads.

    The subgradient at a zero-norm group is taken as zero.
    """
    if lam == 0.0:
        return
    values = {k: p.data for k, p in params.items()}
    norms = layer_group_norms(values, meta)

    def scaled(arr, norm, axis_shape):
        safe = np.where(norm > 0.0, norm, 1.0)
        return lam * arr / safe.reshape(axis_shape)

    def bump(name, grad_piece):
        p = params[name]
        p.grad = grad_piece if p.grad is None else p.grad + grad_piece

    if "gru" in norms:
        h = _gru_dims(values)
        n = norms["gru"]
        for name in ("encoder.gru.w", "encoder.gru.u"):
            arr = values[name].reshape(-1, 3, h)
            bump(name, scaled(arr, n, (1, 1, h)).reshape(values[name].shape))
        for name in ("encoder.gru.b_ih", "encoder.gru.b_hh"):
            if name in values:
                arr = values[name].reshape(3, h)
                bump(name, scaled(arr, n, (1, h)).reshape(-1))
    if "se" in norms:
        n = norms["se"]
        bump("encoder.se.w1", scaled(values["encoder.se.w1"], n, (1, -1)))
        bump("encoder.se.b1", scaled(values["encoder.se.b1"], n, (-1,)))
    for i in _trunk_indices(values):
        n = norms[f"trunk.{i}"]
        bump(f"trunk.{i}.w", scaled(values[f"trunk.{i}.w"], n, (1, -1)))
        bump(f"trunk.{i}.b", scaled(values[f"trunk.{i}.b"], n, (-1,)))


def keep_indices(norms: np.ndarray, ratio: float) -> np.ndarray:
    """Indices of groups that survive: all but the round(ratio * n) with the
    smallest L2 norms (stable ordering breaks ties by index)."""
    n = len(norms)
    k_remove = int(round(ratio * n))
    if k_remove >= n:
        raise ValueError(f"pruning ratio {ratio} would empty a layer of {n} groups")
    order = np.argsort(norms, kind="stable")
    drop = set(order[:k_remove].tolist())
    return np.array([i for i in range(n) if i not in drop], dtype=int)


def _gru_cols(keep: np.ndarray, h: int) -> np.ndarray:
    return np.concatenate([keep, keep + h, keep + 2 * h])


def prune_masks(values: Dict[str, np.ndarray], meta: Dict, ratio: float) -> Dict[str, np.ndarray]:
    """Surviving-unit indices per prunable layer."""
    norms = layer_group_norms(values, meta)
    return {layer: keep_indices(n, ratio) for layer, n in norms.items()}


def structured_prune(
    values: Dict[str, np.ndarray],
    meta: Dict,
    ratio: float,
    masks: Optional[Dict[str, np.ndarray]] = None,
) -> Dict[str, np.ndarray]:
    """Remove the lowest-norm fraction of groups per layer and rebuild all
    affected arrays (downstream input rows shrink accordingly)."""
    if not 0 <= ratio < 1:
        raise ValueError("ratio must lie in [0, 1)")
    if masks is None:
        masks = prune_masks(values, meta, ratio)
    out = {k: v.copy() for k, v in values.items()}

    trunk_in_keep: Optional[np.ndarray] = None  # rows kept of the next consumer
    if meta.get("recurrent"):
        h = _gru_dims(values)
        keep_g = masks["gru"]
        cols = _gru_cols(keep_g, h)
        out["encoder.gru.w"] = values["encoder.gru.w"][:, cols]
        out["encoder.gru.u"] = values["encoder.gru.u"][np.ix_(keep_g, cols)]
        for name in ("encoder.gru.b_ih", "encoder.gru.b_hh"):
            if name in values:
                out[name] = values[name][cols]
        if "encoder.se.w1" in values:
            keep_se = masks["se"]
            out["encoder.se.w1"] = values["encoder.se.w1"][np.ix_(keep_g, keep_se)]
            out["encoder.se.b1"] = values["encoder.se.b1"][keep_se]
            out["encoder.se.w2"] = values["encoder.se.w2"][np.ix_(keep_se, keep_g)]
            out["encoder.se.b2"] = values["encoder.se.b2"][keep_g]
        trunk_in_keep = keep_g

    for i in _trunk_indices(values):
        keep_t = masks[f"trunk.{i}"]
        w = values[f"trunk.{i}.w"]
        if trunk_in_keep is not None:
            w = w[trunk_in_keep]
        out[f"trunk.{i}.w"] = w[:, keep_t]
        out[f"trunk.{i}.b"] = values[f"trunk.{i}.b"][keep_t]
        trunk_in_keep = keep_t

    if trunk_in_keep is not None:
        for name in ("head.mu_w", "head.ls_w"):
            out[name] = values[name][trunk_in_keep]
    return {k: np.ascontiguousarray(v) for k, v in out.items()}


def prunable_parameter_count(values: Dict[str, np.ndarray], meta: Dict) -> int:
    """Total size of the group-generating weights (the basis that the
    declared pruning ratio is measured against)."""
    total = 0
    if meta.get("recurrent"):
        total += values["encoder.gru.w"].size + values["encoder.gru.u"].size
        for name in ("encoder.gru.b_ih", "encoder.gru.b_hh"):
            if name in values:
                total += values[name].size
        if "encoder.se.w1" in values:
            total += values["encoder.se.w1"].size + values["encoder.se.b1"].size
    for i in _trunk_indices(values):
        total += values[f"trunk.{i}.w"].size + values[f"trunk.{i}.b"].size
    return total


def regularized_finetune(
    trainer: SacTrainer, lam: float, episodes: int
) -> Tuple[Dict[str, Dict[str, np.ndarray]], Dict]:
    """Continue training with the group-lasso penalty added to the actor
    objective; returns the finetuned checkpoint payload."""
    actor = trainer.nets.actor
    if lam > 0.0:
        trainer.extra_actor_grad = lambda a: add_group_lasso_grads(a.params(), a.meta, lam)
    try:
        trainer.train(episodes=episodes)
    finally:
        trainer.extra_actor_grad = None
    return trainer.checkpoint_payload()


def evaluate_actor(env, actor: ActorNetwork, episodes: int, seed: int) -> float:
    """Deterministic mean return of an actor over seeded eval episodes."""
    window = actor.meta["window"]
    returns = []
    for ep in range(episodes):
        ep_seed = int(np.random.SeedSequence((seed, 7331, ep)).generate_state(1)[0])
        env.reset(ep_seed)
        done = False
        total = 0.0
        while not done:
            seq = env.observe_sequence(max(window, 1))
            res = env.step(actor.act(seq))
            total += res.scalar_reward
            done = res.done
        returns.append(total)
    return float(np.mean(returns))


def sweep(
    make_env,
    make_trainer,
    base_payload: Tuple[Dict[str, Dict[str, np.ndarray]], Dict],
    ratios,
    lg_lambdas,
    finetune_episodes: int,
    eval_episodes: int,
    seed: int,
) -> List[Dict]:
    """Finetune once per lambda, prune at each ratio, and evaluate.

    Returns one row per (ratio, lg_lambda) with the evaluated mean return
    and its retention against the unpruned input checkpoint.
    """
    networks, header = base_payload
    base_actor = ActorNetwork.from_params(networks["actor"], header["actor_meta"])
    unpruned = evaluate_actor(make_env(), base_actor, eval_episodes, seed)

    rows: List[Dict] = []
    for lg_lam in lg_lambdas:
        lam = 10.0**lg_lam
        trainer = make_trainer()
        trainer.load_payload(networks, header)
        tuned_networks, tuned_header = regularized_finetune(trainer, lam, finetune_episodes)
        for ratio in ratios:
            pruned_values = structured_prune(
                tuned_networks["actor"], tuned_header["actor_meta"], ratio
            )
            pruned_actor = ActorNetwork.from_params(pruned_values, tuned_header["actor_meta"])
            mean_return = evaluate_actor(make_env(), pruned_actor, eval_episodes, seed)
            retention = mean_return / unpruned if unpruned != 0 else math.nan
            rows.append(
                {
                    "ratio": ratio,
                    "lg_lambda": lg_lam,
                    "mean_return": mean_return,
                    "unpruned_return": unpruned,
                    "return_retention": retention,
                }
            )
    return rows
