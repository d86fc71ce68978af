"""CLI subcommand tests (in-process through main())."""

import json
import os

import yaml

from navlab.cli import main
from navlab.viz import read_ppm


def write_smoke_config(path, out_dir, mechanism="early", total=16, seed=3):
    data = {
        "seed": seed,
        "out_dir": str(out_dir),
        "backbone": "tiny",
        "world": {"size_m": 6.0, "resolution": 32},
        "fusion": {"mechanism": mechanism, "embed_dim": 32},
        "train": {"total_steps": total, "rollout_t": 4, "n_envs": 2, "hidden_dim": 16,
                  "n_train_worlds": 2, "n_heldout_worlds": 1, "bands": [[1.5, 3.0]],
                  "probe_every": 1, "probe_episodes": 1, "checkpoint_every": 1,
                  "max_episode_steps": 40},
        "eval": {"max_steps": 20},
    }
    with open(path, "w") as f:
        yaml.safe_dump(data, f)
    return str(path)


def test_gen_episodes_counts_and_determinism(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    out_a = tmp_path / "eps_a.jsonl"
    out_b = tmp_path / "eps_b.jsonl"
    assert main(["gen-episodes", "--config", cfg, "--count", "10", "--output", str(out_a)]) == 0
    assert main(["gen-episodes", "--config", cfg, "--count", "10", "--output", str(out_b)]) == 0
    assert len(out_a.read_text().splitlines()) == 10
    assert out_a.read_bytes() == out_b.read_bytes()


def test_gen_episodes_splits_use_disjoint_worlds(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    a = tmp_path / "train.jsonl"
    b = tmp_path / "held.jsonl"
    assert main(["gen-episodes", "--config", cfg, "--count", "8", "--output", str(a)]) == 0
    assert main(["gen-episodes", "--config", cfg, "--count", "8", "--split", "heldout",
                 "--output", str(b)]) == 0
    train_worlds = {json.loads(s)["world_seed"] for s in a.read_text().splitlines()}
    held_worlds = {json.loads(s)["world_seed"] for s in b.read_text().splitlines()}
    assert train_worlds and held_worlds
    assert not (train_worlds & held_worlds)


def test_train_smoke_and_checkpoint(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    assert main(["train", "--config", cfg, "--quiet"]) == 0
    out = tmp_path / "out"
    assert (out / "ckpt_final.ckpt").exists()
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert len(lines) == 2 + 2  # comment, header, one row per update


def test_invalid_mechanism_exits_nonzero(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    code = main(["train", "--config", cfg, "--set", "fusion.mechanism=bogus", "--quiet"])
    assert code != 0
    assert "mechanism" in capsys.readouterr().err


def test_unknown_config_field_exits_nonzero(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    assert main(["train", "--config", cfg, "--set", "train.rollout_tee=4"]) == 2
    assert "rollout_tee" in capsys.readouterr().err


def test_train_rerun_reproduces_metrics(tmp_path):
    cfg_a = write_smoke_config(tmp_path / "a.yaml", tmp_path / "out_a")
    cfg_b = write_smoke_config(tmp_path / "b.yaml", tmp_path / "out_b")
    assert main(["train", "--config", cfg_a, "--quiet"]) == 0
    assert main(["train", "--config", cfg_b, "--quiet"]) == 0
    a = (tmp_path / "out_a" / "metrics.csv").read_text().splitlines()
    b = (tmp_path / "out_b" / "metrics.csv").read_text().splitlines()
    assert a[2:] == b[2:]  # identical rows (hash comment differs via out_dir)


def test_eval_report(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    assert main(["train", "--config", cfg, "--quiet"]) == 0
    eps = tmp_path / "eps.jsonl"
    assert main(["gen-episodes", "--config", cfg, "--count", "6", "--split", "heldout",
                 "--output", str(eps)]) == 0
    report_path = tmp_path / "report.json"
    assert main(["eval", "--config", cfg, "--checkpoint",
                 str(tmp_path / "out" / "ckpt_final.ckpt"),
                 "--episodes", str(eps), "--output", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["overall"]["spl"] <= report["overall"]["sr"] + 1e-12
    assert set(report["bands"]) == {"1.5-3"}
    assert report["config_hash"]


def test_eval_episodes_from_config(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    assert main(["train", "--config", cfg, "--quiet"]) == 0
    eps = tmp_path / "eps.jsonl"
    main(["gen-episodes", "--config", cfg, "--count", "3", "--output", str(eps)])
    report = tmp_path / "r.json"
    assert main(["eval", "--config", cfg, "--set", f"eval.episodes_file={eps}",
                 "--checkpoint", str(tmp_path / "out" / "ckpt_final.ckpt"),
                 "--output", str(report)]) == 0
    assert report.exists()


def test_eval_missing_checkpoint_fails(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    eps = tmp_path / "eps.jsonl"
    main(["gen-episodes", "--config", cfg, "--count", "2", "--output", str(eps)])
    code = main(["eval", "--config", cfg, "--checkpoint", str(tmp_path / "nope.ckpt"),
                 "--episodes", str(eps)])
    assert code != 0


def test_ablate_axis_structure(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    csv_path = tmp_path / "ablate.csv"
    assert main(["ablate", "--config", cfg, "--axis", "mid_mapping", "--seeds", "1",
                 "--episodes-count", "4", "--output", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#") and not l.startswith("variant,")]
    per_seed = [l for l in body if ",mean," not in l]
    means = [l for l in body if ",mean," in l]
    assert [l.split(",")[0] for l in per_seed] == ["fg_hr", "semantic"]
    assert [l.split(",")[0] for l in means] == ["fg_hr", "semantic"]


def test_ablate_depth_axis_variants(tmp_path):
    from navlab.cli import AXES
    assert [n for n, _ in AXES["mid_depth"]] == ["depth1", "depth2", "depth4"]
    assert [n for n, _ in AXES["early_concat"]] == ["stack3d", "edge", "channel"]
    assert [n for n, _ in AXES["modeling"]] == ["separate", "tied", "joint"]
    assert [n for n, _ in AXES["mechanism"]] == ["late", "skip", "mid", "early"]


def test_visualize_outputs(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out", mechanism="mid")
    assert main(["train", "--config", cfg, "--quiet"]) == 0
    eps = tmp_path / "eps.jsonl"
    assert main(["gen-episodes", "--config", cfg, "--count", "2", "--output", str(eps)]) == 0
    panels = tmp_path / "panels"
    assert main(["visualize", "--config", cfg, "--checkpoint",
                 str(tmp_path / "out" / "ckpt_final.ckpt"), "--episodes", str(eps),
                 "--index", "0", "--timesteps", "0", "--out-dir", str(panels)]) == 0
    files = sorted(os.listdir(panels))
    assert any(f.startswith("cam_") for f in files)
    traj = [f for f in files if f.startswith("trajectory_")]
    assert traj
    img, comment = read_ppm(panels / traj[0])
    assert comment.startswith("config_hash=")
    assert img.shape[2] == 3


def test_visualize_timestep_out_of_range(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out", mechanism="mid")
    assert main(["train", "--config", cfg, "--quiet"]) == 0
    eps = tmp_path / "eps.jsonl"
    main(["gen-episodes", "--config", cfg, "--count", "1", "--output", str(eps)])
    code = main(["visualize", "--config", cfg, "--checkpoint",
                 str(tmp_path / "out" / "ckpt_final.ckpt"), "--episodes", str(eps),
                 "--timesteps", "9999"])
    assert code != 0
    assert "beyond" in capsys.readouterr().err


def test_debug_matches(tmp_path):
    cfg = write_smoke_config(tmp_path / "cfg.yaml", tmp_path / "out")
    out = tmp_path / "matches.ppm"
    assert main(["debug-matches", "--config", cfg, "--world-seed", "5",
                 "--output", str(out)]) == 0
    img, _ = read_ppm(out)
    assert img.shape[1] > img.shape[0]  # side-by-side layout


def test_out_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NAVLAB_OUT_ROOT", str(tmp_path / "root"))
    cfg = write_smoke_config(tmp_path / "cfg.yaml", "nested/run")
    assert main(["gen-episodes", "--config", cfg, "--count", "2"]) == 0
    assert (tmp_path / "root" / "nested" / "run" / "episodes_train.jsonl").exists()
