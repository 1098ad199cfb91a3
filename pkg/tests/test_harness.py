import json
import os

import numpy as np
import pytest

from aavrelay import cli, harness
from aavrelay.config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    serialize_config,
)


def toy_text(episodes="6"):
    return (
        "[env]\n"
        "task = point_goal\n"
        "episode_length = 10\n"
        "seq_len = 3\n"
        "[sac]\n"
        "hidden_dim = 8\n"
        "trunk_dims = 16\n"
        "batch_size = 16\n"
        "buffer_capacity = 400\n"
        "warmup_steps = 40\n"
        "se_reduction = 2\n"
        "dtype = float64\n"
        f"episodes = {episodes}\n"
    )


# -- config parsing ------------------------------------------------------------


def test_empty_config_gives_full_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = harness.parse_config(path.read_text())
    assert cfg.sac.gamma == 0.99
    assert cfg.env.episode_length == 100
    assert cfg.energy.p0 == 199.4
    assert cfg.energy.p1 == 88.66
    assert cfg.energy.u_tip == 120.0
    assert cfg.energy.v0_induced == 4.03
    assert cfg.energy.d0_drag == 0.6
    assert cfg.energy.air_density == 1.225
    assert cfg.energy.rotor_solidity == 0.05
    assert cfg.world.d_min == 1.0
    assert cfg.world.aav_altitude == 15.0
    assert cfg.world.x_max == 400.0 and cfg.world.y_max == 400.0
    assert cfg.channel.sigmoid_a == 5.18 and cfg.channel.sigmoid_b == 0.43
    assert cfg.channel.noise_psd_dbm_hz == -174.0
    assert cfg.sac.episodes == 4500


def test_invalid_value_names_the_key():
    with pytest.raises(ConfigError, match="world.aav_altitude"):
        parse_config("[world]\naav_altitude = -1\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="world.altitude"):
        parse_config("[world]\naltitude = 10\n")
    with pytest.raises(ConfigError, match="section"):
        parse_config("[planet]\nx = 1\n")


def test_bad_type_names_the_key():
    with pytest.raises(ConfigError, match="sac.gamma"):
        parse_config("[sac]\ngamma = fast\n")


def test_round_trip_idempotent():
    cfg = parse_config(toy_text())
    text1 = serialize_config(cfg)
    cfg2 = parse_config(text1)
    text2 = serialize_config(cfg2)
    assert text1 == text2
    assert cfg == cfg2


# -- training runs ---------------------------------------------------------------


def test_run_training_outputs_and_determinism(tmp_path):
    cfg = parse_config(toy_text())
    a = tmp_path / "a"
    b = tmp_path / "b"
    harness.run_training(cfg, 7, str(a), episodes=6)
    harness.run_training(cfg, 7, str(b), episodes=6)
    for name in ("manifest.json", "metrics.csv", "timing.csv", "checkpoint.npz",
                 "trace.jsonl"):
        assert (a / name).exists()
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    # timing differs run to run and is deliberately outside metrics.csv
    header = (a / "metrics.csv").read_text().splitlines()[0]
    assert header == "episode,return,time_avg_aoi,total_energy_j,alpha,critic_loss,actor_loss"


def test_checkpoint_interval(tmp_path):
    cfg = parse_config(toy_text())
    cfg = cfg.replace("sac", checkpoint_every=2)
    out = tmp_path / "runs"
    harness.run_training(cfg, 0, str(out), episodes=5)
    assert (out / "checkpoint_ep2.npz").exists()
    assert (out / "checkpoint_ep4.npz").exists()
    assert (out / "checkpoint.npz").exists()


def test_manifest_rerun_reproduces_metrics(tmp_path):
    cfg = parse_config(toy_text())
    first = tmp_path / "first"
    harness.run_training(cfg, 3, str(first), episodes=5)
    again = tmp_path / "again"
    harness.rerun_from_manifest(str(first), str(again))
    assert (first / "metrics.csv").read_bytes() == (again / "metrics.csv").read_bytes()


def test_eval_writes_summary_and_trace(tmp_path):
    cfg = ExperimentConfig().replace("world", n_sn=6, n_aav=2, x_max=100.0, y_max=100.0,
                                     comm_radius=30.0, cluster_count=2)
    cfg = cfg.replace("env", episode_length=8)
    out = tmp_path / "eval"
    summary = harness.run_eval(cfg, "random", seed=5, episodes=3, out_dir=str(out))
    assert (out / "summary.csv").exists()
    rows = harness.read_csv(str(out / "summary.csv"))
    assert len(rows) == 3
    trace = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert len(trace) == 8
    assert {"slot", "q", "aoi", "energy_j"} <= set(trace[0])
    assert np.isfinite(summary["mean_return"])


def test_eval_greedy_policy(tmp_path):
    cfg = ExperimentConfig().replace("world", n_sn=6, n_aav=2, x_max=100.0, y_max=100.0,
                                     comm_radius=30.0, cluster_count=2)
    cfg = cfg.replace("env", episode_length=8)
    summary = harness.run_eval(cfg, "greedy", seed=5, episodes=2,
                               out_dir=str(tmp_path / "greedy"))
    assert np.isfinite(summary["mean_return"])


# -- aggregation -------------------------------------------------------------------


def test_aggregate_single_run_zero_std(tmp_path):
    cfg = parse_config(toy_text())
    run = tmp_path / "r0"
    harness.run_training(cfg, 1, str(run), episodes=5)
    out = harness.aggregate([str(run)], str(tmp_path / "agg.csv"))
    rows = harness.read_csv(out)
    assert len(rows) == 3  # return, f1, f2
    assert all(float(r["std"]) == 0.0 for r in rows)
    assert all(r["runs"] == "1" for r in rows)


def test_aggregate_mean_exact(tmp_path):
    cfg = parse_config(toy_text())
    dirs = []
    finals = []
    for seed in range(5):
        d = tmp_path / f"r{seed}"
        harness.run_training(cfg, seed, str(d), episodes=5)
        metrics = harness.read_csv(str(d / "metrics.csv"))
        finals.append(np.mean([float(r["return"]) for r in metrics]))
        dirs.append(str(d))
    out = harness.aggregate(dirs, str(tmp_path / "agg.csv"))
    rows = harness.read_csv(out)
    ret = [r for r in rows if r["metric"] == "return"][0]
    assert float(ret["mean"]) == pytest.approx(float(np.mean(finals)))
    assert ret["runs"] == "5"
    # sorted by config hash then metric
    keys = [(r["config_hash"], r["metric"]) for r in rows]
    assert keys == sorted(keys)


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        harness.aggregate([], "x.csv")


# -- plot data ---------------------------------------------------------------------


def test_plot_data_regeneration_identical(tmp_path):
    cfg = parse_config(toy_text())
    run = tmp_path / "run"
    harness.run_training(cfg, 2, str(run), episodes=6)
    metrics = str(run / "metrics.csv")
    p1 = tmp_path / "p1.csv"
    p2 = tmp_path / "p2.csv"
    harness.emit_plot_data([metrics], str(p1))
    harness.emit_plot_data([metrics], str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_render_svg(tmp_path):
    cfg = parse_config(toy_text())
    run = tmp_path / "run"
    harness.run_training(cfg, 2, str(run), episodes=6)
    plot_csv = str(tmp_path / "curves.csv")
    harness.emit_plot_data([str(run / "metrics.csv")], plot_csv)
    svg = harness.render_curves_svg(plot_csv, str(tmp_path / "c.svg"), "t")
    text = open(svg).read()
    assert text.startswith("<?xml")


# -- CLI ----------------------------------------------------------------------------


def test_cli_train_determinism(tmp_path):
    cfg_path = tmp_path / "toy.cfg"
    cfg_path.write_text(toy_text())
    rootA = tmp_path / "outA"
    rootB = tmp_path / "outB"
    assert cli.main(["--out-root", str(rootA), "train", "--config", str(cfg_path),
                     "--seed", "7", "--episodes", "6", "--name", "run"]) == 0
    assert cli.main(["--out-root", str(rootB), "train", "--config", str(cfg_path),
                     "--seed", "7", "--episodes", "6", "--name", "run"]) == 0
    a = (rootA / "run" / "metrics.csv").read_bytes()
    b = (rootB / "run" / "metrics.csv").read_bytes()
    assert a == b


def test_cli_unknown_flag_nonzero_exit(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--nonsense"])
    assert exc.value.code != 0


def test_cli_invalid_config_nonzero_exit(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[world]\naav_altitude = -5\n")
    code = cli.main(["--out-root", str(tmp_path), "train", "--config", str(bad)])
    assert code == 1


def test_cli_ablate_runs_exactly_four_variants(tmp_path):
    cfg_path = tmp_path / "toy.cfg"
    cfg_path.write_text(toy_text(episodes="4"))
    root = tmp_path / "out"
    assert cli.main(["--out-root", str(root), "ablate", "--config", str(cfg_path),
                     "--seeds", "0", "--episodes", "4", "--name", "abl"]) == 0
    rows = harness.read_csv(str(root / "abl" / "ablation.csv"))
    assert [r["variant"] for r in rows] == ["full", "no_seq", "no_lngru", "no_se"]
    run_dirs = [d for d in os.listdir(root / "abl") if (root / "abl" / d).is_dir()]
    assert sorted(run_dirs) == ["full", "no_lngru", "no_se", "no_seq"]


def test_cli_sweep_aav_row_count(tmp_path):
    cfg_path = tmp_path / "desk.cfg"
    cfg_path.write_text(
        "[world]\nn_sn = 6\nn_aav = 2\nx_max = 100.0\ny_max = 100.0\n"
        "comm_radius = 30.0\ncluster_count = 2\n"
        "[env]\nepisode_length = 6\nseq_len = 2\n"
        "[sac]\nhidden_dim = 8\ntrunk_dims = 12\nbatch_size = 8\n"
        "buffer_capacity = 200\nwarmup_steps = 20\nse_reduction = 2\nseq_len = 2\n"
    )
    root = tmp_path / "out"
    assert cli.main(["--out-root", str(root), "sweep-aav", "--config", str(cfg_path),
                     "--counts", "2,3", "--seeds", "0", "--episodes", "3",
                     "--name", "sw"]) == 0
    rows = harness.read_csv(str(root / "sw" / "sweep_n_aav.csv"))
    assert len(rows) == 2
    assert [r["n_aav"] for r in rows] == ["2", "3"]
    for col in ("mean_return", "mean_time_avg_aoi", "mean_total_energy_j"):
        assert all(np.isfinite(float(r[col])) for r in rows)


def test_cli_eval_checkpoint_policy(tmp_path):
    cfg_path = tmp_path / "toy.cfg"
    cfg_path.write_text(toy_text())
    root = tmp_path / "out"
    cli.main(["--out-root", str(root), "train", "--config", str(cfg_path),
              "--seed", "0", "--episodes", "5", "--name", "run"])
    code = cli.main(["--out-root", str(root), "eval", "--config", str(cfg_path),
                     "--policy", "sactls",
                     "--checkpoint", str(root / "run" / "checkpoint.npz"),
                     "--episodes", "2", "--name", "ev"])
    assert code == 0
    rows = harness.read_csv(str(root / "ev" / "summary.csv"))
    assert len(rows) == 2


def test_cli_eval_checkpoint_required():
    assert cli.main(["eval", "--policy", "sactls"]) == 1


def test_prune_sweep_surface_shape(tmp_path):
    cfg_path = tmp_path / "toy.cfg"
    cfg_path.write_text(
        toy_text()
        + "[prune]\nratios = 0.25, 0.5\nlg_lambdas = -6.0\n"
          "finetune_episodes = 2\neval_episodes = 2\n"
    )
    root = tmp_path / "out"
    cli.main(["--out-root", str(root), "train", "--config", str(cfg_path),
              "--seed", "0", "--episodes", "5", "--name", "run"])
    code = cli.main(["--out-root", str(root), "prune-sweep", "--config", str(cfg_path),
                     "--checkpoint", str(root / "run" / "checkpoint.npz"),
                     "--name", "pr"])
    assert code == 0
    rows = harness.read_csv(str(root / "pr" / "prune_surface.csv"))
    assert len(rows) == 2  # |ratios| * |lambdas|
    for r in rows:
        got = float(r["mean_return"]) / float(r["unpruned_return"])
        assert float(r["return_retention"]) == pytest.approx(got)


def test_cli_plot_command(tmp_path):
    cfg_path = tmp_path / "toy.cfg"
    cfg_path.write_text(toy_text())
    root = tmp_path / "out"
    cli.main(["--out-root", str(root), "train", "--config", str(cfg_path),
              "--seed", "0", "--episodes", "5", "--name", "run"])
    assert cli.main(["--out-root", str(root), "plot",
                     str(root / "run" / "metrics.csv"), "--name", "plots"]) == 0
    assert (root / "plots" / "curves.csv").exists()
