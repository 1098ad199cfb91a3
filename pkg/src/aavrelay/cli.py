"""Command-line entry point for training, evaluation, sweeps, ablations,
pruning, and plot-data emission."""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, ExperimentConfig, load_config
from . import harness


def _load(path: str | None) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    return load_config(path)


def _int_list(text: str):
    return [int(p) for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aavrelay",
        description="Multi-AAV beamforming/AoI forwarding simulator and SAC-TLS trainer",
    )
    parser.add_argument(
        "--out-root",
        default=os.environ.get("AAVRELAY_OUT", "runs"),
        help="root directory for run outputs (env var AAVRELAY_OUT)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="one seeded training run")
    train.add_argument("--config", help="config file (defaults apply if omitted)")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--episodes", type=int, default=None)
    train.add_argument("--name", default=None, help="run directory name")

    evalp = sub.add_parser("eval", help="roll out a checkpoint or baseline policy")
    evalp.add_argument("--config", default=None)
    evalp.add_argument("--policy", choices=("sactls", "sac", "greedy", "random"),
                       default="sactls")
    evalp.add_argument("--checkpoint", default=None)
    evalp.add_argument("--seed", type=int, default=0)
    evalp.add_argument("--episodes", type=int, default=10)
    evalp.add_argument("--name", default=None)

    sweep_aav = sub.add_parser("sweep-aav", help="train across fleet sizes")
    sweep_aav.add_argument("--config", default=None)
    sweep_aav.add_argument("--counts", type=_int_list, default=[2, 3, 4, 5])
    sweep_aav.add_argument("--seeds", type=_int_list, default=[0])
    sweep_aav.add_argument("--episodes", type=int, default=None)
    sweep_aav.add_argument("--name", default="sweep_aav")

    sweep_sn = sub.add_parser("sweep-sn", help="train across sensor counts")
    sweep_sn.add_argument("--config", default=None)
    sweep_sn.add_argument("--counts", type=_int_list, default=[20, 40, 60])
    sweep_sn.add_argument("--seeds", type=_int_list, default=[0])
    sweep_sn.add_argument("--episodes", type=int, default=None)
    sweep_sn.add_argument("--name", default="sweep_sn")

    ablate = sub.add_parser("ablate", help="train the four ablation variants")
    ablate.add_argument("--config", default=None)
    ablate.add_argument("--seeds", type=_int_list, default=[0])
    ablate.add_argument("--episodes", type=int, default=None)
    ablate.add_argument("--include-plain", action="store_true")
    ablate.add_argument("--name", default="ablation")

    prune = sub.add_parser("prune-sweep", help="finetune/prune/evaluate surface")
    prune.add_argument("--config", default=None)
    prune.add_argument("--checkpoint", required=True)
    prune.add_argument("--seed", type=int, default=0)
    prune.add_argument("--name", default="prune")

    plot = sub.add_parser("plot", help="aggregate metrics CSVs into plot data")
    plot.add_argument("metrics", nargs="+", help="metrics.csv files")
    plot.add_argument("--smooth", type=int, default=10)
    plot.add_argument("--title", default="learning curves")
    plot.add_argument("--name", default="plots")
    plot.add_argument("--svg", action="store_true", help="also render an SVG chart")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    out_root = args.out_root
    if args.command == "train":
        cfg = _load(args.config)
        name = args.name or f"train_seed{args.seed}"
        summary = harness.run_training(
            cfg, args.seed, os.path.join(out_root, name), episodes=args.episodes
        )
        print(f"wrote {summary['out_dir']} (episodes={summary['episodes']}, "
              f"final_return={summary['final_return']:.4f})")
        return 0

    if args.command == "eval":
        cfg = _load(args.config)
        name = args.name or f"eval_{args.policy}_seed{args.seed}"
        summary = harness.run_eval(
            cfg, args.policy, args.seed, args.episodes,
            os.path.join(out_root, name), checkpoint=args.checkpoint,
        )
        print(f"wrote {summary['out_dir']} (mean_return={summary['mean_return']:.4f}, "
              f"aoi={summary['mean_time_avg_aoi']:.4f})")
        return 0

    if args.command in ("sweep-aav", "sweep-sn"):
        cfg = _load(args.config)
        field = "n_aav" if args.command == "sweep-aav" else "n_sn"
        out_csv = harness.sweep_counts(
            cfg, field, args.counts, args.seeds,
            os.path.join(out_root, args.name), episodes=args.episodes,
        )
        print(f"wrote {out_csv}")
        return 0

    if args.command == "ablate":
        cfg = _load(args.config)
        out_csv = harness.run_ablation(
            cfg, args.seeds, os.path.join(out_root, args.name),
            episodes=args.episodes, include_plain=args.include_plain,
        )
        print(f"wrote {out_csv}")
        return 0

    if args.command == "prune-sweep":
        cfg = _load(args.config)
        out_csv = harness.run_prune_sweep(
            cfg, args.checkpoint, args.seed, os.path.join(out_root, args.name)
        )
        print(f"wrote {out_csv}")
        return 0

    if args.command == "plot":
        os.makedirs(os.path.join(out_root, args.name), exist_ok=True)
        out_csv = harness.emit_plot_data(
            args.metrics, os.path.join(out_root, args.name, "curves.csv"),
            smooth=args.smooth,
        )
        print(f"wrote {out_csv}")
        if args.svg:
            out_svg = harness.render_curves_svg(
                out_csv, os.path.join(out_root, args.name, "curves.svg"), args.title
            )
            print(f"wrote {out_svg}")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
