"""Reproducible experiment driver: training/eval runs with manifests,
sweeps over fleet and sensor counts, ablations, the pruning surface, and
plot-data emission.

Every run writes into its own directory: ``manifest.json`` (config text,
seed, command, versions — enough to re-run it exactly), ``metrics.csv``
(one deterministic row per episode), ``timing.csv`` (wall time, excluded
from determinism comparisons), and ``checkpoint.npz``.  Evaluation runs add
``summary.csv`` and a per-slot ``trace.jsonl``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import time
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .baselines import greedy_policy, random_policy
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, parse_config, serialize_config
from .env import ForwardingEnv
from .pruning import sweep as prune_sweep_rows
from .sac import SacTrainer, actor_from_checkpoint
from .toy import PointGoalEnv

METRICS_COLUMNS = (
    "episode",
    "return",
    "time_avg_aoi",
    "total_energy_j",
    "alpha",
    "critic_loss",
    "actor_loss",
)

SUMMARY_COLUMNS = ("seed", "return", "time_avg_aoi", "total_energy_j", "violations")


def build_env(cfg: ExperimentConfig):
    if cfg.env.task == "point_goal":
        return PointGoalEnv(cfg.env)
    return ForwardingEnv(cfg.env, cfg.world, cfg.channel, cfg.energy)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:16]


def write_manifest(out_dir: str, cfg: ExperimentConfig, seed: int, command: str, extra=None):
    doc = {
        "command": command,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "config_text": serialize_config(cfg),
        "versions": {
            "aavrelay": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(run_dir: str) -> Dict:
    with open(os.path.join(run_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


def run_training(
    cfg: ExperimentConfig,
    seed: int,
    out_dir: str,
    episodes: Optional[int] = None,
    command: str = "train",
) -> Dict:
    """One seeded training run; returns the summary of what was written."""
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(out_dir, cfg, seed, command, extra={"episodes": episodes})
    env = build_env(cfg)
    trainer = SacTrainer(env, cfg.sac, seed)

    rows: List[Dict] = []
    timing: List[Dict] = []
    started = time.perf_counter()

    def save(path):
        networks, header = trainer.checkpoint_payload()
        header["seed"] = seed
        header["config_hash"] = config_hash(cfg)
        save_checkpoint(path, networks, header)

    def on_episode(row):
        timing.append({"episode": row["episode"],
                       "wall_ms": (time.perf_counter() - started) * 1000.0})
        every = cfg.sac.checkpoint_every
        if every > 0 and (row["episode"] + 1) % every == 0:
            save(os.path.join(out_dir, f"checkpoint_ep{row['episode'] + 1}.npz"))

    rows = trainer.train(episodes=episodes, on_episode=on_episode)
    write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_COLUMNS, rows)
    write_csv(os.path.join(out_dir, "timing.csv"), ("episode", "wall_ms"), timing)
    save(os.path.join(out_dir, "checkpoint.npz"))
    with open(os.path.join(out_dir, "trace.jsonl"), "w", encoding="utf-8") as fh:
        for rec in env.episode_trace():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    returns = [r["return"] for r in rows]
    return {
        "out_dir": out_dir,
        "episodes": len(rows),
        "final_return": returns[-1] if returns else float("nan"),
        "mean_final_window": float(np.mean(returns[-min(100, len(returns)) :])) if returns else float("nan"),
    }


def _policy_fn(name: str, cfg: ExperimentConfig, env, seed: int, checkpoint: Optional[str]):
    """obs-window -> action callables for the eval command."""
    if name in ("sactls", "sac"):
        if checkpoint is None:
            raise ValueError(f"policy {name!r} needs a checkpoint")
        actor = actor_from_checkpoint(checkpoint)
        window = actor.meta["window"]

        def act(env_ref=env, actor=actor, window=window):
            seq = env_ref.observe_sequence(max(window, cfg.env.seq_len))
            return actor.act(seq)

        return act
    if name == "greedy":
        def act(env_ref=env):
            obs = env_ref.observe_sequence(1)[-1]
            return greedy_policy(obs, env_ref.world)

        return act
    if name == "random":
        rng = np.random.default_rng(seed)

        def act(env_ref=env, rng=rng):
            return random_policy(rng, env_ref.action_dim)

        return act
    raise ValueError(f"unknown policy {name!r}")


def run_eval(
    cfg: ExperimentConfig,
    policy: str,
    seed: int,
    episodes: int,
    out_dir: str,
    checkpoint: Optional[str] = None,
) -> Dict:
    """Roll out a policy for seeded episodes; writes summary.csv and a
    per-slot trace.jsonl of the final episode."""
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(out_dir, cfg, seed, f"eval --policy {policy}",
                   extra={"episodes": episodes, "checkpoint": checkpoint})
    env = build_env(cfg)
    act = _policy_fn(policy, cfg, env, seed, checkpoint)

    rows = []
    last_trace: List[Dict] = []
    for ep in range(episodes):
        ep_seed = int(np.random.SeedSequence((seed, 555, ep)).generate_state(1)[0])
        env.reset(ep_seed)
        total = 0.0
        done = False
        while not done:
            res = env.step(act())
            total += res.scalar_reward
            done = res.done
        f1, f2 = env.final_metrics()
        trace = env.episode_trace()
        rows.append(
            {
                "seed": ep_seed,
                "return": total,
                "time_avg_aoi": f1,
                "total_energy_j": f2,
                "violations": sum(rec.get("violations", 0) for rec in trace),
            }
        )
        last_trace = trace
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, rows)
    with open(os.path.join(out_dir, "trace.jsonl"), "w", encoding="utf-8") as fh:
        for rec in last_trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return {
        "out_dir": out_dir,
        "mean_return": float(np.mean([r["return"] for r in rows])),
        "mean_time_avg_aoi": float(np.mean([r["time_avg_aoi"] for r in rows])),
        "mean_total_energy_j": float(np.mean([r["total_energy_j"] for r in rows])),
        "total_violations": int(np.sum([r["violations"] for r in rows])),
    }


def sweep_counts(
    cfg: ExperimentConfig,
    field: str,
    counts: Sequence[int],
    seeds: Sequence[int],
    out_root: str,
    episodes: Optional[int] = None,
) -> str:
    """Train across a world-size grid (n_aav or n_sn); one row per count."""
    os.makedirs(out_root, exist_ok=True)
    rows = []
    for count in counts:
        point_cfg = cfg.replace("world", **{field: int(count)})
        per_seed = []
        for seed in seeds:
            out_dir = os.path.join(out_root, f"{field}_{count}", f"seed_{seed}")
            summary = run_training(point_cfg, seed, out_dir, episodes=episodes,
                                   command=f"sweep {field}={count}")
            metrics = read_csv(os.path.join(out_dir, "metrics.csv"))
            tail = metrics[-min(50, len(metrics)) :]
            per_seed.append(
                {
                    "return": summary["mean_final_window"],
                    "f1": float(np.mean([float(r["time_avg_aoi"]) for r in tail])),
                    "f2": float(np.mean([float(r["total_energy_j"]) for r in tail])),
                }
            )
        rows.append(
            {
                field: count,
                "mean_return": float(np.mean([p["return"] for p in per_seed])),
                "std_return": float(np.std([p["return"] for p in per_seed])),
                "mean_time_avg_aoi": float(np.mean([p["f1"] for p in per_seed])),
                "std_time_avg_aoi": float(np.std([p["f1"] for p in per_seed])),
                "mean_total_energy_j": float(np.mean([p["f2"] for p in per_seed])),
                "std_total_energy_j": float(np.std([p["f2"] for p in per_seed])),
            }
        )
    out_csv = os.path.join(out_root, f"sweep_{field}.csv")
    write_csv(
        out_csv,
        (field, "mean_return", "std_return", "mean_time_avg_aoi", "std_time_avg_aoi",
         "mean_total_energy_j", "std_total_energy_j"),
        rows,
    )
    return out_csv


ABLATION_VARIANTS = (
    ("full", dict(use_seq=True, use_lngru=True, use_se=True)),
    ("no_seq", dict(use_seq=False, use_lngru=True, use_se=True)),
    ("no_lngru", dict(use_seq=True, use_lngru=False, use_se=True)),
    ("no_se", dict(use_seq=True, use_lngru=True, use_se=False)),
)

PLAIN_VARIANT = ("plain_sac", dict(use_seq=False, use_lngru=False, use_se=False))


def run_ablation(
    cfg: ExperimentConfig,
    seeds: Sequence[int],
    out_root: str,
    episodes: Optional[int] = None,
    include_plain: bool = False,
    smooth_window: int = 100,
) -> str:
    """Train the four ablation variants (optionally plus plain SAC); emits a
    summary CSV of final smoothed returns per variant."""
    os.makedirs(out_root, exist_ok=True)
    variants = list(ABLATION_VARIANTS) + ([PLAIN_VARIANT] if include_plain else [])
    rows = []
    for name, flags in variants:
        variant_cfg = cfg.replace("sac", **flags)
        finals = []
        for seed in seeds:
            out_dir = os.path.join(out_root, name, f"seed_{seed}")
            run_training(variant_cfg, seed, out_dir, episodes=episodes,
                         command=f"ablate {name}")
            metrics = read_csv(os.path.join(out_dir, "metrics.csv"))
            returns = [float(r["return"]) for r in metrics]
            finals.append(float(np.mean(returns[-min(smooth_window, len(returns)) :])))
        rows.append(
            {
                "variant": name,
                "mean_final_return": float(np.mean(finals)),
                "std_final_return": float(np.std(finals)),
                "seeds": len(list(seeds)),
            }
        )
    out_csv = os.path.join(out_root, "ablation.csv")
    write_csv(out_csv, ("variant", "mean_final_return", "std_final_return", "seeds"), rows)
    return out_csv


def run_prune_sweep(
    cfg: ExperimentConfig,
    checkpoint_path: str,
    seed: int,
    out_root: str,
) -> str:
    """Finetune/prune/evaluate over the configured (ratio, lambda) grid."""
    os.makedirs(out_root, exist_ok=True)
    networks, header = load_checkpoint(checkpoint_path)

    def make_env():
        return build_env(cfg)

    def make_trainer():
        return SacTrainer(build_env(cfg), cfg.sac, seed)

    rows = prune_sweep_rows(
        make_env,
        make_trainer,
        (networks, header),
        cfg.prune.ratios,
        cfg.prune.lg_lambdas,
        cfg.prune.finetune_episodes,
        cfg.prune.eval_episodes,
        seed,
    )
    out_csv = os.path.join(out_root, "prune_surface.csv")
    write_csv(
        out_csv,
        ("ratio", "lg_lambda", "mean_return", "unpruned_return", "return_retention"),
        rows,
    )
    return out_csv


def aggregate(run_dirs: Sequence[str], out_csv: str) -> str:
    """Mean and std of return/f1/f2 across seeds, grouped by config hash."""
    if not run_dirs:
        raise ValueError("no run directories given")
    groups: Dict[str, List[Dict]] = {}
    for run_dir in run_dirs:
        manifest = load_manifest(run_dir)
        metrics = read_csv(os.path.join(run_dir, "metrics.csv"))
        if not metrics:
            raise ValueError(f"empty metrics in {run_dir}")
        tail = metrics[-min(100, len(metrics)) :]
        groups.setdefault(manifest["config_hash"], []).append(
            {
                "return": float(np.mean([float(r["return"]) for r in tail])),
                "f1": float(np.mean([float(r["time_avg_aoi"]) for r in tail])),
                "f2": float(np.mean([float(r["total_energy_j"]) for r in tail])),
            }
        )
    rows = []
    for chash in sorted(groups):
        runs = groups[chash]
        for metric in ("f1", "f2", "return"):
            rows.append(
                {
                    "config_hash": chash,
                    "metric": metric,
                    "mean": float(np.mean([r[metric] for r in runs])),
                    "std": float(np.std([r[metric] for r in runs])),
                    "runs": len(runs),
                }
            )
    write_csv(out_csv, ("config_hash", "metric", "mean", "std", "runs"), rows)
    return out_csv


def emit_plot_data(metrics_csvs: Sequence[str], out_csv: str, smooth: int = 10) -> str:
    """Smoothed learning curves merged across runs: plot-ready aggregation,
    a pure derivation of the input CSVs."""
    rows = []
    for path in sorted(metrics_csvs):
        label = os.path.basename(os.path.dirname(path)) or path
        metrics = read_csv(path)
        returns = np.array([float(r["return"]) for r in metrics])
        for i in range(len(returns)):
            lo = max(0, i - smooth + 1)
            rows.append(
                {
                    "run": label,
                    "episode": i,
                    "smoothed_return": float(returns[lo : i + 1].mean()),
                }
            )
    write_csv(out_csv, ("run", "episode", "smoothed_return"), rows)
    return out_csv


def render_curves_svg(plot_csv: str, out_svg: str, title: str):
    """Line chart of the aggregated curves (SVG without volatile metadata)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(plot_csv)
    runs: Dict[str, List] = {}
    for r in rows:
        runs.setdefault(r["run"], []).append((int(r["episode"]), float(r["smoothed_return"])))
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for label in sorted(runs):
        pts = sorted(runs[label])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label, linewidth=1.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("smoothed return")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_svg


def rerun_from_manifest(run_dir: str, out_dir: str) -> Dict:
    """Reproduce a training run from its manifest alone."""
    manifest = load_manifest(run_dir)
    cfg = parse_config(manifest["config_text"])
    return run_training(
        cfg,
        int(manifest["seed"]),
        out_dir,
        episodes=manifest.get("episodes"),
        command=manifest.get("command", "train"),
    )
