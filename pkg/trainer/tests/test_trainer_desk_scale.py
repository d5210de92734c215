"""Desk-scale end-to-end experiment (run with `pytest -m slow`):

pre-train on 200 dense-random 10x10 instances with 8 agents for 30 epochs,
fine-tune on one held-out map, then compare policy-guided initial solutions
against plain search on 32 test instances from that map. The policy-guided
sum of costs must be <= the plain one on at least half of the instances with
a 100% success rate; held-out action accuracy must beat the uniform 0.2
baseline by at least 0.3.
"""

import re
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from magat_trainer.collect import collect, generate_suite
from magat_trainer.dataset import build_dataset
from magat_trainer.formats import dump_scenario, parse_map
from magat_trainer.model import MagatModel, ModelConfig, export_bytes
from magat_trainer.train import TrainConfig, accuracy, train

pytestmark = pytest.mark.slow

MODEL_CFG = ModelConfig(
    r_obs=4, r_comm=5, embed_dim=64, edge_dim=16, edge_hidden=16,
    cnn_channels=(16, 32), decoder_hidden=32,
)
AGENTS = 8


def sample_instance(grid, seed):
    comp = grid.largest_component()
    rng = np.random.default_rng(seed)
    starts = rng.choice(comp, size=AGENTS, replace=False)
    goals = rng.choice(comp, size=AGENTS, replace=False)
    return [int(v) for v in starts], [int(v) for v in goals]


def run_solver(map_path, scen_path, out_path, policy=None, seed=0):
    """One initial-solution solve; returns (status_ok, soc)."""
    cmd = [
        "lagat", "solve", "--map", str(map_path), "--scen", str(scen_path),
        "--agents", str(AGENTS), "--time-limit", "60", "--seed", str(seed),
        "--output", str(out_path),
    ]
    cmd += ["--policy", str(policy)] if policy else ["--no-policy"]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=180)
    if proc.returncode != 0:
        return False, None
    m = re.search(r"soc=(\d+)", proc.stdout)
    return True, int(m.group(1))


def test_desk_scale_pipeline(tmp_path):
    t0 = time.perf_counter()

    # --- pre-training corpus: 200 dense-random maps, expert = anytime search
    instances = generate_suite(tmp_path / "pretrain_inst", "random", "10x10",
                               AGENTS, count=200, seed=100)
    data_dir = tmp_path / "pretrain_data"
    trajs = collect(instances, data_dir, timeouts=(1.0, 5.0, 15.0),
                    anytime=True, workers=8)
    assert len(trajs) >= 150, f"only {len(trajs)} of 200 instances collected"
    split = max(1, len(trajs) // 10)
    val_trajs, fit_trajs = trajs[:split], trajs[split:]
    fit_samples = build_dataset(fit_trajs, MODEL_CFG)
    val_samples = build_dataset(val_trajs, MODEL_CFG)

    torch.manual_seed(0)
    model = MagatModel(MODEL_CFG)
    train(model, fit_samples,
          TrainConfig(epochs=30, dagger_every=4, seed=0,
                      dagger_timeouts=(1.0, 5.0)),
          trajectories=fit_trajs)

    val_acc = accuracy(model, val_samples)
    acc_ok = val_acc > 0.2 + 0.3
    print(f"[{'PASS' if acc_ok else 'FAIL'}] desk-scale-accuracy: held-out "
          f"top-1 {val_acc:.3f} vs uniform 0.2 + 0.3 margin")

    # --- held-out map: 50 fine-tune instances + 32 test instances
    held_dir = tmp_path / "held"
    held_dir.mkdir()
    subprocess.run(
        ["lagat", "gen", "--kind", "random", "--size", "10x10", "--agents",
         str(AGENTS), "--count", "1", "--seed", "999", "--out", str(held_dir)],
        check=True, capture_output=True,
    )
    map_path = next(held_dir.glob("*.map"))
    grid = parse_map(map_path.read_text())

    ft_instances = []
    for k in range(50):
        starts, goals = sample_instance(grid, 2000 + k)
        scen = held_dir / f"ft_{k:02d}.scen"
        scen.write_text(dump_scenario(grid, starts, goals))
        fmap = held_dir / f"ft_{k:02d}.map"
        fmap.write_text(map_path.read_text())
        ft_instances.append((fmap, scen, AGENTS))
    ft_data = tmp_path / "ft_data"
    ft_trajs = collect(ft_instances, ft_data, timeouts=(1.0, 5.0, 15.0),
                       anytime=True, workers=8)
    assert len(ft_trajs) >= 40
    train(model, build_dataset(ft_trajs, MODEL_CFG),
          TrainConfig(epochs=10, dagger_every=4, seed=1,
                      dagger_timeouts=(1.0, 5.0)),
          trajectories=ft_trajs)

    weights_path = tmp_path / "finetuned.bin"
    weights_path.write_bytes(export_bytes(model))

    # --- evaluation: initial solutions, policy-guided vs plain
    wins = 0
    solved = 0
    pairs = []
    for k in range(32):
        starts, goals = sample_instance(grid, 5000 + k)
        scen = held_dir / f"test_{k:02d}.scen"
        scen.write_text(dump_scenario(grid, starts, goals))
        ok_p, soc_p = run_solver(map_path, scen, held_dir / f"p_{k}.sol",
                                 policy=weights_path)
        ok_b, soc_b = run_solver(map_path, scen, held_dir / f"b_{k}.sol")
        assert ok_b, f"plain search failed on test instance {k}"
        if ok_p:
            solved += 1
            if soc_p <= soc_b:
                wins += 1
        pairs.append((soc_p, soc_b))

    elapsed = time.perf_counter() - t0
    ok = solved == 32 and wins >= 16 and acc_ok and elapsed < 7200
    print(f"[{'PASS' if ok else 'FAIL'}] desk-scale-effect: success "
          f"{solved}/32, policy SoC <= plain on {wins}/32, "
          f"{elapsed / 60:.1f} min")
    if not ok:
        print("  per-instance (policy, plain):", pairs)
    assert ok
