"""``forestnav`` command line: gen-map, scan, train, eval, replay, plot."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import forest as forest_mod
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .evaluation import (
    MeanPolicy,
    TrajectoryParseError,
    constant_policy,
    evaluate,
    make_env,
    parse_trajectory_csv,
    random_init_policy,
    run_episode,
    trajectory_csv,
)
from .kinematics import Vec2
from .lidar import naive_scan, scan, scan_to_csv
from .plotting import render_svg
from .ppo.checkpoint import CheckpointError, load_checkpoint
from .ppo.trainer import train

log = logging.getLogger("forestnav")


def _seed(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _policy(args: argparse.Namespace, cfg: ExperimentConfig):
    if args.policy == "checkpoint":
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required with --policy checkpoint")
        return MeanPolicy(load_checkpoint(args.checkpoint, obs_bins=cfg.env.obs_bins, action_dim=2))
    if args.policy == "random-init":
        return random_init_policy(cfg)
    return constant_policy((1.0, 0.0))


def cmd_gen_map(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    fmap = forest_mod.generate(replace(cfg.forest, seed=seed))
    out = _out_dir(args, cfg) / f"map_{seed}.json"
    forest_mod.save_map(fmap, out)
    g = cfg.forest.grid_extent
    counts = fmap.cell_counts()
    print(f"seed {seed}: {fmap.n_trees} trees in {g}x{g} cells -> {out}")
    print("count/target per cell (top row = largest y):")
    for row in range(g - 1, -1, -1):
        cells = range(row * g, (row + 1) * g)
        print(" ".join(f"{counts[c]:>3}/{fmap.targets[c]:<3}" for c in cells))
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    fmap = forest_mod.load_map(args.map) if args.map else forest_mod.generate(replace(cfg.forest, seed=_seed(args, cfg)))
    pos = Vec2(args.x, args.y)
    result = naive_scan(fmap, pos, cfg.lidar) if args.naive else scan(fmap, pos, cfg.lidar)
    out = _out_dir(args, cfg) / "scan.csv"
    out.write_text(scan_to_csv(result, cfg.lidar))
    d = result.distances
    print(f"{len(result)} beams at ({args.x}, {args.y}): min {d.min():.3f} m, hits {(d < cfg.lidar.max_range).sum()} -> {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.total_steps is not None:
        cfg = replace(cfg, ppo=replace(cfg.ppo, total_steps=args.total_steps))
    seed = _seed(args, cfg)
    cfg = replace(cfg, seed=seed)
    out = _out_dir(args, cfg)
    save_config(cfg, out / "config.json")
    result = train(lambda i: make_env(cfg), cfg.ppo, seed, out)
    last = result.metrics[-1] if result.metrics else None
    print(f"{len(result.metrics)} updates, {len(result.checkpoints)} checkpoints -> {out}")
    if last is not None:
        print(f"final: steps={last['steps']} mean_return={last['mean_return']:.2f} success_rate={last['success_rate']:.2f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    policy = _policy(args, cfg)
    base = _seed(args, cfg)
    report = evaluate(cfg, policy, args.episodes, base, workers=args.workers)
    out = _out_dir(args, cfg) / "eval.csv"
    out.write_text(report.to_csv())
    print(report.table())
    print(f"per-episode records -> {out}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    policy = _policy(args, cfg)
    fixed = forest_mod.load_map(args.map) if args.map else None
    seed = _seed(args, cfg)
    env = make_env(cfg, fixed_map=fixed)
    ep = run_episode(env, policy, seed, record_scans=args.scans)
    out = _out_dir(args, cfg)
    (out / "trajectory.csv").write_text(trajectory_csv(ep))
    if fixed is None:
        forest_mod.save_map(env.map, out / "map.json")
    if args.scans:
        scan_dir = out / "scans"
        scan_dir.mkdir(exist_ok=True)
        for k, distances in enumerate(ep.scans):
            (scan_dir / f"step_{k:05d}.csv").write_text(scan_to_csv(_Scan(distances), cfg.lidar))
    last = ep.rows[-1]
    outcome = "collision" if ep.collided else ("goal" if last["terminated"] else "timeout")
    print(f"{ep.steps} steps, final x={ep.final_x:.2f} |y|={ep.final_abs_y:.2f}, {outcome} -> {out}")
    return 0


class _Scan:
    def __init__(self, distances) -> None:
        self.distances = distances


def cmd_plot(args: argparse.Namespace) -> int:
    fmap = forest_mod.load_map(args.map)
    traj_path = Path(args.trajectory)
    rows = parse_trajectory_csv(traj_path.read_text(), str(traj_path))
    goal = load_config(args.config).env.goal_distance_x if args.config else 30.0
    out_dir = Path(args.out) if args.out else traj_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "plot.svg"
    out.write_text(render_svg(fmap, rows, goal_x=goal, title=traj_path.name))
    print(f"{len(rows)} trajectory points, {fmap.n_trees} trees -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forestnav", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config: bool = True) -> None:
        if config:
            p.add_argument("--config", help="experiment config JSON (defaults built in)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (defaults to the config seed)")
        p.add_argument("--out", help="output directory (defaults to the config out_dir)")

    def policy_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--checkpoint", help="checkpoint file for --policy checkpoint")
        p.add_argument("--policy", choices=("checkpoint", "random-init", "forward"), default="checkpoint",
                       help="checkpoint mean action, the untrained initialisation, or constant full-speed +X")

    p = sub.add_parser("gen-map", help="generate a forest map file")
    common(p)
    p.set_defaults(func=cmd_gen_map)

    p = sub.add_parser("scan", help="dump one LiDAR sweep as CSV")
    common(p)
    p.add_argument("--map", help="map file (otherwise generated from --seed)")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--naive", action="store_true", help="use the unaccelerated all-trees sweep")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("train", help="train a PPO agent")
    common(p)
    p.add_argument("--total-steps", type=int, help="override ppo.total_steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="fly evaluation missions on fresh maps")
    common(p)
    policy_args(p)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="fly one episode and write its trajectory")
    common(p)
    policy_args(p)
    p.add_argument("--map", help="fixed map file (otherwise generated from --seed)")
    p.add_argument("--scans", action="store_true", help="also write per-step scan CSVs")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("plot", help="render map + trajectory as SVG")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--config", help="config used for the goal line (default goal 30 m)")
    p.add_argument("--out", help="output directory (defaults to the trajectory's directory)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("forestnav: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, TrajectoryParseError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"forestnav: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
