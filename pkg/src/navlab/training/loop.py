"""PPO training loop: rollouts, GAE, clipped updates, metrics, checkpoints.

Checkpoints capture everything the loop depends on (parameters, optimizer
moments, RNG streams, per-env episode state, recurrent carries), so resuming
reproduces the exact update stream of an uninterrupted run.
"""

import os

import numpy as np

from ..errors import ConfigurationError
from ..nd import Adam, load_checkpoint, save_checkpoint
from ..world import Camera
from .gae import gae, normalize_advantages
from .model import NavModel
from .ppo import ppo_update
from .rollout import EpisodeSampler, VecNavEnv, collect_rollouts

CSV_HEADER = "step,updates,mean_episode_reward,probe_sr,probe_spl,actor_loss,value_loss,entropy"


def _derived_seeds(seed):
    state = np.random.SeedSequence(seed).generate_state(5)
    return {name: int(state[i]) for i, name in
            enumerate(["model", "sampler", "action", "perm", "probe"])}


def build_model(cfg):
    """Construct the NavModel for a run config (same seed path as training)."""
    return NavModel(cfg.fusion, backbone=cfg.backbone_spec(),
                    resolution=cfg.world.resolution,
                    hidden_dim=cfg.train.hidden_dim,
                    seed=_derived_seeds(cfg.seed)["model"])


def load_model(cfg, checkpoint_path, expect_hash=None):
    """Rebuild a model and load parameters from a checkpoint file."""
    tensors, meta, saved_hash = load_checkpoint(checkpoint_path)
    if expect_hash is not None and saved_hash != expect_hash:
        raise ConfigurationError(
            f"checkpoint config hash {saved_hash} does not match the run config {expect_hash}")
    model = build_model(cfg)
    params = {k: v for k, v in tensors.items()
              if not k.startswith(("adam.", "runtime."))}
    model.load_state_arrays(params)
    return model, meta


def probe_episode_set(cfg, seed):
    """Fixed held-out (grid, episode) probe pairs, disjoint from train worlds."""
    camera = Camera(cfg.world.resolution, cfg.world.hfov_deg)
    sampler = EpisodeSampler(cfg.heldout_world_seeds(), cfg.train.bands,
                             cfg.world.size_m, camera, seed=seed,
                             cell_size=cfg.world.cell_size)
    pairs = []
    for _ in range(cfg.train.probe_episodes):
        grid, ep = sampler.sample()
        pairs.append((grid, ep))
    return pairs


def _run_probe(model, pairs, eval_cfg):
    from ..evaluation import evaluate_episodes
    report, _ = evaluate_episodes(pairs, model, greedy=eval_cfg.greedy,
                                  max_steps=eval_cfg.max_steps,
                                  success_radius=eval_cfg.success_radius)
    return report["overall"]["sr"], report["overall"]["spl"]


def _fmt(x):
    return repr(float(x))


def _save(path, model, optimizer, hidden, meta, chash):
    tensors = dict(model.state_arrays())
    tensors.update(optimizer.state_arrays())
    tensors["runtime.hidden"] = hidden
    save_checkpoint(path, tensors, meta=meta, config_hash=chash)


def train(cfg, resume_from=None, log=None):
    """Run (or resume) training; returns artifact paths and final metrics."""
    from ..config import config_hash

    tc = cfg.train
    chash = config_hash(cfg)
    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    seeds = _derived_seeds(cfg.seed)

    model = build_model(cfg)
    optimizer = Adam(model.parameters(), lr=tc.lr)
    camera = Camera(cfg.world.resolution, cfg.world.hfov_deg)
    sampler = EpisodeSampler(cfg.train_world_seeds(), tc.bands, cfg.world.size_m,
                             camera, seed=seeds["sampler"], cell_size=cfg.world.cell_size)
    envs = VecNavEnv(tc.n_envs, sampler, cfg.reward, tc.max_episode_steps,
                     needs_keypoints=model.needs_keypoints, skip_k=cfg.fusion.skip_k)
    action_rng = np.random.default_rng(seeds["action"])
    perm_rng = np.random.default_rng(seeds["perm"])
    probe_pairs = probe_episode_set(cfg, seeds["probe"])
    hidden = model.policy.initial_state(tc.n_envs)
    start_update = 0
    probe_sr = probe_spl = float("nan")

    if resume_from:
        tensors, meta, saved_hash = load_checkpoint(resume_from)
        if saved_hash != chash:
            raise ConfigurationError(
                f"resume refused: checkpoint hash {saved_hash} != config hash {chash}")
        model.load_state_arrays({k: v for k, v in tensors.items()
                                 if not k.startswith(("adam.", "runtime."))})
        optimizer.load_state_arrays(tensors, meta["adam_t"])
        hidden = np.ascontiguousarray(tensors["runtime.hidden"], dtype=np.float32)
        action_rng.bit_generator.state = meta["rng"]["action"]
        perm_rng.bit_generator.state = meta["rng"]["perm"]
        sampler.load_state(meta["rng"]["sampler"])
        envs.load_runtime_state(meta["env_state"])
        start_update = int(meta["update"])
        probe_sr, probe_spl = meta["probe"]

    metrics_path = os.path.join(out_dir, "metrics.csv")
    append = bool(resume_from) and os.path.exists(metrics_path)
    checkpoints = []
    final_path = os.path.join(out_dir, "ckpt_final.ckpt")
    with open(metrics_path, "a" if append else "w", encoding="utf-8") as csv_f:
        if not append:
            csv_f.write(f"# config_hash={chash}\n")
            csv_f.write(CSV_HEADER + "\n")
        for update in range(start_update, tc.updates_total):
            lr_u = tc.lr * (1.0 - update / tc.updates_total) if tc.lr_decay else tc.lr
            buffer, hidden = collect_rollouts(envs, model, hidden, tc.rollout_t, action_rng)
            adv, ret = gae(buffer.rewards, buffer.values, buffer.dones,
                           buffer.bootstrap, tc.gamma, tc.gae_lambda)
            stats = ppo_update(buffer, model, optimizer, tc, lr_u, perm_rng,
                               normalize_advantages(adv), ret)
            steps_done = (update + 1) * tc.rollout_t * tc.n_envs
            mean_ep = (float(np.mean(buffer.completed_returns))
                       if buffer.completed_returns else float("nan"))
            if update % tc.probe_every == 0:
                probe_sr, probe_spl = _run_probe(model, probe_pairs, cfg.eval)
            row = [str(steps_done), str(update + 1), _fmt(mean_ep), _fmt(probe_sr),
                   _fmt(probe_spl), _fmt(stats["actor_loss"]), _fmt(stats["value_loss"]),
                   _fmt(stats["entropy"])]
            csv_f.write(",".join(row) + "\n")
            csv_f.flush()
            if log:
                log(f"update {update + 1}/{tc.updates_total} step {steps_done} "
                    f"reward {mean_ep:.3f} sr {probe_sr:.3f} actor {stats['actor_loss']:.4f}")
            if stats["aborted"]:
                if log:
                    log(f"update {update + 1}: non-finite loss, update aborted")
            if (update + 1) % tc.checkpoint_every == 0 or update + 1 == tc.updates_total:
                meta = {
                    "update": update + 1,
                    "steps_done": steps_done,
                    "adam_t": optimizer.t,
                    "rng": {"action": action_rng.bit_generator.state,
                            "perm": perm_rng.bit_generator.state,
                            "sampler": sampler.state()},
                    "env_state": envs.runtime_state(),
                    "probe": [probe_sr, probe_spl],
                    "mechanism": cfg.fusion.mechanism,
                }
                path = os.path.join(out_dir, f"ckpt_{update + 1:06d}.ckpt")
                _save(path, model, optimizer, hidden, meta, chash)
                checkpoints.append(path)
                if update + 1 == tc.updates_total:
                    _save(final_path, model, optimizer, hidden, meta, chash)
    return {"metrics": metrics_path, "checkpoints": checkpoints,
            "final_checkpoint": final_path, "config_hash": chash,
            "probe_sr": probe_sr, "probe_spl": probe_spl}
