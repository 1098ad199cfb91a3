"""Soft actor-critic trainer with sequence inputs, twin critics, target
networks, and automatic entropy-temperature tuning.

The per-slot loop builds the observation window, samples a squashed-Gaussian
action from the recurrent actor, steps the environment, and stores the
transition; once past warmup it performs K gradient updates every
``update_every`` env steps (critics on the entropy-regularized Bellman
target, actor on the reparameterized objective, temperature on the entropy
gap, then a soft target blend).  Single-threaded runs are bit-deterministic
for a given (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint
from .config import SacConfig
from .nn import ActorNetwork, CriticNetwork, load_param_values
from .optim import Adam
from .replay import ReplayBuffer, Transition


@dataclass
class SacNetworks:
    """All learnable state of one SAC agent."""

    actor: ActorNetwork
    q1: CriticNetwork
    q2: CriticNetwork
    q1_target: CriticNetwork
    q2_target: CriticNetwork
    log_alpha: Tensor
    target_entropy: float

    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))


def build_networks(
    obs_dim: int, action_dim: int, cfg: SacConfig, rng: np.random.Generator
) -> SacNetworks:
    kwargs = dict(
        seq_len=cfg.seq_len,
        hidden_dim=cfg.hidden_dim,
        trunk_dims=cfg.trunk_dims,
        se_reduction=cfg.se_reduction,
        ln_eps=cfg.ln_eps,
        use_seq=cfg.use_seq,
        use_lngru=cfg.use_lngru,
        use_se=cfg.use_se,
        dtype=cfg.dtype,
    )
    actor = ActorNetwork.create(rng, obs_dim, action_dim, **kwargs)
    q1 = CriticNetwork.create(rng, obs_dim, action_dim, **kwargs)
    q2 = CriticNetwork.create(rng, obs_dim, action_dim, **kwargs)
    q1_target = CriticNetwork.from_params(
        {k: v.data.copy() for k, v in q1.params().items()}, q1.meta
    )
    q2_target = CriticNetwork.from_params(
        {k: v.data.copy() for k, v in q2.params().items()}, q2.meta
    )
    target_entropy = cfg.target_entropy if cfg.target_entropy != 0.0 else -float(action_dim)
    log_alpha = Tensor(np.array(math.log(cfg.init_alpha)), requires_grad=True)
    return SacNetworks(actor, q1, q2, q1_target, q2_target, log_alpha, target_entropy)


def compute_targets(
    batch: Dict[str, np.ndarray],
    nets: SacNetworks,
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Entropy-regularized Bellman targets, using the minimum of the twin
    target critics at the policy's next action; done cuts the bootstrap."""
    with ad.no_grad():
        noise = rng.standard_normal(
            (batch["next_state_seq"].shape[0], nets.actor.meta["action_dim"])
        )
        next_action, next_logp = nets.actor.sample(batch["next_state_seq"], noise)
        q1t = nets.q1_target.q_value(batch["next_state_seq"], next_action.data).data
        q2t = nets.q2_target.q_value(batch["next_state_seq"], next_action.data).data
        q_min = np.minimum(q1t, q2t)
        alpha = nets.alpha()
        backup = q_min - alpha * next_logp.data
        return batch["reward"] + gamma * (1.0 - batch["done"]) * backup


def critic_loss(
    batch: Dict[str, np.ndarray],
    nets: SacNetworks,
    gamma: float,
    rng: np.random.Generator,
    targets: Optional[np.ndarray] = None,
) -> Tensor:
    """Summed MSE of both critics against the shared Bellman target."""
    if targets is None:
        targets = compute_targets(batch, nets, gamma, rng)
    y = Tensor(targets.astype(nets.q1.dtype, copy=False))
    q1 = nets.q1.q_value(batch["state_seq"], batch["action"])
    q2 = nets.q2.q_value(batch["state_seq"], batch["action"])
    return ad.mean(ad.square(q1 - y)) + ad.mean(ad.square(q2 - y))


def actor_loss(
    batch: Dict[str, np.ndarray],
    nets: SacNetworks,
    rng: np.random.Generator,
    critic_features: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Mean of alpha * log pi(a|s) - min twin Q(s, a) over the batch, with a
    reparameterized; returns the loss and the sampled log-probs.

    The critics' state-side features do not depend on the action, so the
    actor gradient is exact with them treated as constants; passing the
    features from the critic pass skips recomputing both encoders.
    """
    noise = rng.standard_normal((batch["state_seq"].shape[0], nets.actor.meta["action_dim"]))
    action, logp = nets.actor.sample(batch["state_seq"], noise)
    if critic_features is None:
        with ad.no_grad():
            f1_data = nets.q1.state_features(batch["state_seq"]).data
            f2_data = nets.q2.state_features(batch["state_seq"]).data
    else:
        f1_data, f2_data = critic_features
    q1 = nets.q1.q_from_features(Tensor(f1_data), action)
    q2 = nets.q2.q_from_features(Tensor(f2_data), action)
    pick_q1 = Tensor((q1.data <= q2.data).astype(q1.dtype))
    q_min = q1 * pick_q1 + q2 * (1.0 - pick_q1)
    loss = ad.mean(nets.alpha() * logp - q_min)
    return loss, logp.data


def temperature_update(
    batch_log_probs: np.ndarray, nets: SacNetworks, alpha_opt: Adam
) -> float:
    """One dual-gradient step on J(alpha) = -log(alpha) * mean(log pi +
    target_entropy); returns the new alpha.

    The gradient is zero exactly when the policy's mean log-prob sits at
    -target_entropy; a too-deterministic policy pushes alpha up.
    """
    gap = float(np.mean(batch_log_probs) + nets.target_entropy)
    nets.log_alpha.grad = np.asarray(-gap, dtype=nets.log_alpha.data.dtype)
    alpha_opt.step()
    nets.log_alpha.grad = None
    return nets.alpha()


def soft_update(target: CriticNetwork, online: CriticNetwork, tau: float):
    """target <- tau * online + (1 - tau) * target, parameter-wise."""
    t_params = target.params()
    o_params = online.params()
    if t_params.keys() != o_params.keys():
        raise ValueError("target/online parameter sets differ")
    for name, t in t_params.items():
        o = o_params[name]
        if t.data.shape != o.data.shape:
            raise ValueError(f"shape mismatch for {name}")
        t.data = tau * o.data + (1.0 - tau) * t.data


class SacTrainer:
    """Owns the networks, optimizers, replay buffer, and the training loop."""

    def __init__(self, env, cfg: SacConfig, seed: int):
        cfg.validate()
        self.env = env
        self.cfg = cfg
        self.seed = seed
        root = np.random.SeedSequence(seed)
        init_ss, action_ss, sample_ss, target_ss = root.spawn(4)
        self._init_rng = np.random.default_rng(init_ss)
        self._action_rng = np.random.default_rng(action_ss)
        self._sample_rng = np.random.default_rng(sample_ss)
        self._target_rng = np.random.default_rng(target_ss)
        self.nets = build_networks(env.obs_dim, env.action_dim, cfg, self._init_rng)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, cfg.seq_len, env.obs_dim, env.action_dim)
        self.actor_opt = Adam(list(self.nets.actor.params().values()), lr=cfg.lr_actor)
        critic_params = list(self.nets.q1.params().values()) + list(
            self.nets.q2.params().values()
        )
        self.critic_opt = Adam(critic_params, lr=cfg.lr_critic)
        self.alpha_opt = Adam([self.nets.log_alpha], lr=cfg.lr_alpha)
        self.global_step = 0
        self.extra_actor_grad: Optional[Callable] = None  # hook for penalties

    def episode_seed(self, episode: int, *, eval_run: bool = False) -> int:
        tag = 9176 if eval_run else 41
        return int(np.random.SeedSequence((self.seed, tag, episode)).generate_state(1)[0])

    def select_action(self, seq: np.ndarray) -> np.ndarray:
        if self.global_step < self.cfg.warmup_steps:
            return self._action_rng.uniform(-1.0, 1.0, size=self.env.action_dim)
        return self.nets.actor.act(seq, rng=self._action_rng)

    def update(self) -> Dict[str, float]:
        batch = self.buffer.sample(self._sample_rng, self.cfg.batch_size)

        self.critic_opt.zero_grad()
        c_loss = critic_loss(batch, self.nets, self.cfg.gamma, self._target_rng)
        ad.backward(c_loss)
        self.critic_opt.step()

        self.actor_opt.zero_grad()
        a_loss, logp = actor_loss(batch, self.nets, self._target_rng)
        ad.backward(a_loss)
        if self.extra_actor_grad is not None:
            self.extra_actor_grad(self.nets.actor)
        self.actor_opt.step()

        alpha = temperature_update(logp, self.nets, self.alpha_opt)
        soft_update(self.nets.q1_target, self.nets.q1, self.cfg.tau)
        soft_update(self.nets.q2_target, self.nets.q2, self.cfg.tau)
        return {
            "critic_loss": float(c_loss.data),
            "actor_loss": float(a_loss.data),
            "alpha": alpha,
        }

    def run_episode(self, episode: int) -> Dict[str, float]:
        env = self.env
        env.reset(self.episode_seed(episode))
        n = self.cfg.seq_len
        ep_return = 0.0
        losses: List[Dict[str, float]] = []
        done = False
        while not done:
            seq = env.observe_sequence(n)
            action = self.select_action(seq)
            result = env.step(action)
            next_seq = env.observe_sequence(n)
            self.buffer.add(
                Transition(seq, action, result.scalar_reward, next_seq, result.done)
            )
            ep_return += result.scalar_reward
            self.global_step += 1
            done = result.done
            if (
                self.global_step >= self.cfg.warmup_steps
                and len(self.buffer) >= self.cfg.batch_size
                and self.global_step % self.cfg.update_every == 0
            ):
                for _ in range(self.cfg.updates_per_trigger):
                    losses.append(self.update())

        f1, f2 = env.final_metrics()
        row = {
            "episode": episode,
            "return": ep_return,
            "time_avg_aoi": f1,
            "total_energy_j": f2,
            "alpha": self.nets.alpha(),
            "critic_loss": float(np.mean([l["critic_loss"] for l in losses])) if losses else 0.0,
            "actor_loss": float(np.mean([l["actor_loss"] for l in losses])) if losses else 0.0,
        }
        return row

    def train(
        self,
        episodes: Optional[int] = None,
        on_episode: Optional[Callable[[Dict[str, float]], None]] = None,
    ) -> List[Dict[str, float]]:
        episodes = self.cfg.episodes if episodes is None else episodes
        rows = []
        for ep in range(episodes):
            row = self.run_episode(ep)
            rows.append(row)
            if on_episode is not None:
                on_episode(row)
        return rows

    def evaluate(self, episodes: int, deterministic: bool = True) -> Dict[str, float]:
        returns, f1s, f2s, violations = [], [], [], []
        for ep in range(episodes):
            self.env.reset(self.episode_seed(ep, eval_run=True))
            done = False
            total = 0.0
            while not done:
                seq = self.env.observe_sequence(self.cfg.seq_len)
                action = self.nets.actor.act(
                    seq, rng=None if deterministic else self._action_rng
                )
                result = self.env.step(action)
                total += result.scalar_reward
                done = result.done
            returns.append(total)
            f1, f2 = self.env.final_metrics()
            f1s.append(f1)
            f2s.append(f2)
            trace = self.env.episode_trace()
            violations.append(sum(rec.get("violations", 0) for rec in trace))
        return {
            "mean_return": float(np.mean(returns)),
            "mean_time_avg_aoi": float(np.mean(f1s)),
            "mean_total_energy_j": float(np.mean(f2s)),
            "total_violations": int(np.sum(violations)),
            "returns": returns,
        }

    def checkpoint_payload(self) -> Tuple[Dict[str, Dict[str, np.ndarray]], Dict]:
        networks = {
            "actor": {k: v.data for k, v in self.nets.actor.params().items()},
            "q1": {k: v.data for k, v in self.nets.q1.params().items()},
            "q2": {k: v.data for k, v in self.nets.q2.params().items()},
            "q1_target": {k: v.data for k, v in self.nets.q1_target.params().items()},
            "q2_target": {k: v.data for k, v in self.nets.q2_target.params().items()},
        }
        header = {
            "actor_meta": self.nets.actor.meta,
            "critic_meta": self.nets.q1.meta,
            "log_alpha": float(self.nets.log_alpha.data),
            "target_entropy": self.nets.target_entropy,
        }
        return networks, header

    def load_payload(self, networks: Dict[str, Dict[str, np.ndarray]], header: Dict):
        """Restore all network parameters from a checkpoint payload.

        Shapes must match the live networks; use ``actor_from_checkpoint``
        for pruned actors whose layer sizes changed.
        """
        load_param_values(self.nets.actor.params(), networks["actor"])
        load_param_values(self.nets.q1.params(), networks["q1"])
        load_param_values(self.nets.q2.params(), networks["q2"])
        load_param_values(self.nets.q1_target.params(), networks["q1_target"])
        load_param_values(self.nets.q2_target.params(), networks["q2_target"])
        self.nets.log_alpha.data = np.asarray(header["log_alpha"])


def actor_from_checkpoint(path: str) -> ActorNetwork:
    networks, header = load_checkpoint(path)
    return ActorNetwork.from_params(networks["actor"], header["actor_meta"])
