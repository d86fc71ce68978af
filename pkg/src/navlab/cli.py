"""Operator command line: episode generation, training, evaluation, ablation
sweeps and visualization. All subcommands are non-interactive; exit code 0
means fully successful. Output paths are rooted at $NAVLAB_OUT_ROOT when set."""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import viz
from .config import config_hash, load_config, save_config
from .errors import ConfigurationError, NavlabError, UsageError
from .evaluation import evaluate_episodes, export_cam_panels, run_episode
from .fusion import FusionConfig
from .training import EpisodeSampler, load_model, train
from .training.loop import _derived_seeds
from .world import Camera, WorldCache, generate_world, load_episodes, save_episodes


def _add_config_args(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config field, e.g. fusion.mechanism=mid")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--out", help="override the output directory")


def _build_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    return load_config(args.config, overrides)


def _camera(cfg):
    return Camera(cfg.world.resolution, cfg.world.hfov_deg)


def cmd_gen_episodes(args):
    cfg = _build_config(args)
    if args.split == "train":
        world_seeds = cfg.train_world_seeds()
    else:
        world_seeds = cfg.heldout_world_seeds()
    overlap = set(cfg.train_world_seeds()) & set(cfg.heldout_world_seeds())
    if overlap:
        raise ConfigurationError(f"train/heldout world seeds overlap: {sorted(overlap)[:3]}")
    sampler_seed = _derived_seeds(cfg.seed)["probe"] + (0 if args.split == "train" else 1)
    sampler = EpisodeSampler(world_seeds, cfg.train.bands, cfg.world.size_m,
                             _camera(cfg), seed=sampler_seed, cell_size=cfg.world.cell_size)
    episodes = [sampler.sample()[1] for _ in range(args.count)]
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    path = args.output or os.path.join(out_dir, f"episodes_{args.split}.jsonl")
    save_episodes(path, episodes)
    print(f"wrote {len(episodes)} episodes to {path}")
    return 0


def cmd_train(args):
    cfg = _build_config(args)
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    save_config(cfg, os.path.join(out_dir, "config.yaml"))
    result = train(cfg, resume_from=args.resume,
                   log=None if args.quiet else lambda msg: print(msg, flush=True))
    print(f"metrics: {result['metrics']}")
    print(f"final checkpoint: {result['final_checkpoint']}")
    return 0


def _load_eval_pairs(cfg, episodes_path):
    worlds = WorldCache(cfg.world.size_m, cfg.world.cell_size)
    episodes = load_episodes(episodes_path, worlds, _camera(cfg))
    return [(worlds.get(ep.world_seed), ep) for ep in episodes]


def cmd_eval(args):
    cfg = _build_config(args)
    if not os.path.exists(args.checkpoint):
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    episodes_path = args.episodes or cfg.eval.episodes_file
    if not episodes_path:
        raise UsageError("no episode file: pass --episodes or set eval.episodes_file")
    model, meta = load_model(cfg, args.checkpoint)
    pairs = _load_eval_pairs(cfg, episodes_path)
    rng = np.random.default_rng(cfg.seed) if args.stochastic else None
    report, _ = evaluate_episodes(pairs, model, greedy=not args.stochastic,
                                  max_steps=cfg.eval.max_steps, rng=rng,
                                  success_radius=cfg.eval.success_radius,
                                  count_collided_forwards=cfg.eval.count_collided_forwards)
    report["config_hash"] = config_hash(cfg)
    report["checkpoint"] = args.checkpoint
    out_path = args.output or os.path.join(cfg.resolved_out_dir(), "report.json")
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    print(f"SR {report['overall']['sr']:.3f} SPL {report['overall']['spl']:.3f} "
          f"over {report['overall']['episodes']} episodes -> {out_path}")
    return 0


AXES = {
    "mechanism": [("late", {"mechanism": "late"}), ("skip", {"mechanism": "skip"}),
                  ("mid", {"mechanism": "mid"}), ("early", {"mechanism": "early"})],
    "mid_mapping": [("fg_hr", {"mechanism": "mid", "mid_mapping": "fg_hr"}),
                    ("semantic", {"mechanism": "mid", "mid_mapping": "semantic"})],
    "mid_depth": [("depth1", {"mechanism": "mid", "mid_depth": 1}),
                  ("depth2", {"mechanism": "mid", "mid_depth": 2}),
                  ("depth4", {"mechanism": "mid", "mid_depth": 4})],
    "early_concat": [("stack3d", {"mechanism": "early", "early_concat": "stack3d"}),
                     ("edge", {"mechanism": "early", "early_concat": "edge"}),
                     ("channel", {"mechanism": "early", "early_concat": "channel"})],
    "modeling": [("separate", {"mechanism": "late", "modeling": "separate"}),
                 ("tied", {"mechanism": "late", "modeling": "tied"}),
                 ("joint", {"mechanism": "early", "modeling": "joint"})],
}


def variant_config(base, name, fusion_overrides, seed):
    """Derive one ablation run config: shared worlds, its own seed and out dir."""
    fusion_kwargs = {f.name: getattr(base.fusion, f.name)
                     for f in dataclasses.fields(FusionConfig)}
    fusion_kwargs.update(fusion_overrides)
    if "modeling" not in fusion_overrides:
        fusion_kwargs["modeling"] = ""  # let the mechanism pick its default
    return dataclasses.replace(
        base, seed=seed,
        world_seed_base=base.world_seed_base if base.world_seed_base >= 0 else base.seed,
        out_dir=os.path.join(base.out_dir, "ablate", f"{name}_seed{seed}"),
        fusion=FusionConfig(**fusion_kwargs))


def cmd_ablate(args):
    base = _build_config(args)
    if args.axis not in AXES:
        raise UsageError(f"unknown ablation axis {args.axis!r}; choose from {sorted(AXES)}")
    out_dir = base.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    episodes_path = args.episodes
    if not episodes_path:
        episodes_path = os.path.join(out_dir, "episodes_heldout.jsonl")
        sampler = EpisodeSampler(base.heldout_world_seeds(), base.train.bands,
                                 base.world.size_m, _camera(base),
                                 seed=_derived_seeds(base.seed)["probe"] + 1,
                                 cell_size=base.world.cell_size)
        save_episodes(episodes_path, [sampler.sample()[1] for _ in range(args.episodes_count)])
    seeds = [base.seed + i for i in range(args.seeds)]
    csv_path = args.output or os.path.join(out_dir, f"ablate_{args.axis}.csv")
    rows = []
    summary = {}
    for name, overrides in AXES[args.axis]:
        srs = []
        for seed in seeds:
            cfg = variant_config(base, name, overrides, seed)
            try:
                result = train(cfg, log=None)
                pairs = _load_eval_pairs(cfg, episodes_path)
                model, _ = load_model(cfg, result["final_checkpoint"])
                report, _ = evaluate_episodes(pairs, model, greedy=True,
                                              max_steps=cfg.eval.max_steps,
                                              success_radius=cfg.eval.success_radius)
                sr, sp = report["overall"]["sr"], report["overall"]["spl"]
                rows.append((name, seed, repr(sr), repr(sp), "ok"))
                srs.append((sr, sp))
                print(f"{args.axis}/{name} seed {seed}: SR {sr:.3f} SPL {sp:.3f}", flush=True)
            except NavlabError as exc:
                rows.append((name, seed, "nan", "nan", f"error: {exc}"))
                print(f"{args.axis}/{name} seed {seed}: FAILED ({exc})", flush=True)
        if srs:
            summary[name] = (float(np.mean([s[0] for s in srs])),
                             float(np.mean([s[1] for s in srs])))
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(f"# config_hash={config_hash(base)}\n")
        f.write("variant,seed,sr,spl,status\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
        for name, (sr, sp) in summary.items():
            f.write(f"{name},mean,{sr!r},{sp!r},ok\n")
    print(f"ablation table: {csv_path}")
    return 0


def cmd_visualize(args):
    cfg = _build_config(args)
    if not os.path.exists(args.checkpoint):
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    model, _ = load_model(cfg, args.checkpoint)
    pairs = _load_eval_pairs(cfg, args.episodes)
    if not 0 <= args.index < len(pairs):
        raise UsageError(f"episode index {args.index} out of range (0..{len(pairs) - 1})")
    grid, episode = pairs[args.index]
    timesteps = [int(t) for t in args.timesteps.split(",") if t.strip() != ""]
    out_dir = args.out_dir or os.path.join(cfg.resolved_out_dir(), "panels")
    chash = config_hash(cfg)
    paths = export_cam_panels(model, grid, episode, out_dir, timesteps,
                              max_steps=cfg.eval.max_steps, config_hash=chash)
    trace = []
    run_episode(grid, episode, model, greedy=True, max_steps=cfg.eval.max_steps,
                success_radius=cfg.eval.success_radius, trace=trace)
    map_path = os.path.join(out_dir, f"trajectory_ep{episode.id:04d}.ppm")
    viz.write_ppm(map_path, viz.trajectory_map(grid, trace, goal=episode.goal),
                  comment=f"config_hash={chash}")
    for p in paths + [map_path]:
        print(p)
    return 0


def cmd_debug_matches(args):
    cfg = _build_config(args)
    from . import keypoints as kp
    from .world import Pose
    grid = generate_world(args.world_seed, cfg.world.size_m, cfg.world.cell_size)
    free = np.argwhere(grid.free_mask)
    cy, cx = free[len(free) // 2]
    x, y = grid.center_of(int(cy), int(cx))
    from .world import render
    img_a = render(grid, Pose(x, y, 0.0), cfg.world.hfov_deg, cfg.world.resolution)
    img_b = render(grid, Pose(x, y, np.pi / 6), cfg.world.hfov_deg, cfg.world.resolution)
    matches = kp.match(kp.detect(img_a, 64), kp.detect(img_b, 64))
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    path = args.output or os.path.join(out_dir, f"matches_world{args.world_seed}.ppm")
    viz.write_ppm(path, viz.match_panel(img_a, img_b, matches),
                  comment=f"config_hash={config_hash(cfg)}")
    print(f"{len(matches)} matches -> {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="navlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-episodes", help="sample an episode set to a JSONL file")
    _add_config_args(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--split", choices=["train", "heldout"], default="train")
    p.add_argument("--output")
    p.set_defaults(func=cmd_gen_episodes)

    p = sub.add_parser("train", help="train a model with PPO")
    _add_config_args(p)
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an episode file")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", help="episode file (falls back to eval.episodes_file)")
    p.add_argument("--output")
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of argmax")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare variants along one axis")
    _add_config_args(p)
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--episodes", help="shared held-out episode file (generated if omitted)")
    p.add_argument("--episodes-count", type=int, default=200)
    p.add_argument("--output")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("visualize", help="export CAM panels and a trajectory map")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--timesteps", default="0")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("debug-matches", help="dump a side-by-side keypoint match panel")
    _add_config_args(p)
    p.add_argument("--world-seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_debug_matches)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NavlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
