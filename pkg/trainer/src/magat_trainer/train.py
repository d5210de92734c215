"""Cross-entropy imitation training with DAgger-style aggregation.

Every ``dagger_every`` epochs the current policy is rolled out on sampled
training instances; failed rollouts query the expert from the failure
configuration and the full expert completion is appended to the dataset.
Learning rate follows a cosine decay from ``lr`` to ``lr_min``. A NaN loss
aborts after writing a checkpoint.
"""

import logging
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .collect import solve_instance
from .dataset import Sample, build_dataset, samples_from_trajectory
from .formats import Grid, Trajectory, dump_scenario
from .model import MagatModel, ModelConfig
from .observe import ACTIONS, build_comm_graph, build_observation

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    lr_min: float = 1e-6
    dagger_every: int = 4
    dagger_instances: int = 8
    dagger_timeouts: Tuple[float, ...] = (1.0, 5.0)
    seed: int = 0


def collate(batch: Sequence[Sample]):
    """Flatten samples into one agent batch with offset edge indices."""
    obs = torch.from_numpy(np.concatenate([s.observations for s in batch]))
    labels = torch.from_numpy(np.concatenate([s.labels for s in batch]))
    src, dst, feat = [], [], []
    offset = 0
    for s in batch:
        src.append(s.edge_src + offset)
        dst.append(s.edge_dst + offset)
        feat.append(s.edge_feat)
        offset += s.graph.n
    return (
        obs,
        labels,
        torch.from_numpy(np.concatenate(src)),
        torch.from_numpy(np.concatenate(dst)),
        torch.from_numpy(np.concatenate(feat)),
    )


def batch_loss(model: MagatModel, batch: Sequence[Sample]) -> torch.Tensor:
    """Mean per-agent cross-entropy over the batch's timestep samples."""
    obs, labels, src, dst, feat = collate(batch)
    logits = model.forward_batched(obs, src, dst, feat)
    return torch.nn.functional.cross_entropy(logits, labels)


def accuracy(model: MagatModel, samples: Sequence[Sample],
             chunk: int = 256) -> float:
    """Top-1 action accuracy."""
    hits = total = 0
    with torch.no_grad():
        for start in range(0, len(samples), chunk):
            part = samples[start : start + chunk]
            obs, labels, src, dst, feat = collate(part)
            logits = model.forward_batched(obs, src, dst, feat)
            hits += int((logits.argmax(dim=1) == labels).sum())
            total += len(labels)
    return hits / max(1, total)


def rollout(
    model: MagatModel,
    grid: Grid,
    starts: Sequence[int],
    goals: Sequence[int],
    max_steps: int,
) -> Tuple[bool, List[int]]:
    """Greedy collision-avoiding rollout of the current policy.

    Agents act in descending distance-to-goal order; each takes its
    highest-probability feasible action whose target is unclaimed and does
    not swap with an already-committed agent. Returns (success, final
    configuration); an agent with no admissible action fails the rollout.
    """
    cfg = model.cfg
    n = len(starts)
    dists = [grid.distance_field(g) for g in goals]
    config = list(starts)
    with torch.no_grad():
        for _ in range(max_steps):
            if all(config[i] == goals[i] for i in range(n)):
                return True, config
            obs = np.stack([
                build_observation(grid, config, i, dists[i], goals[i],
                                  cfg.r_obs)
                for i in range(n)
            ]).astype(np.float32)
            graph = build_comm_graph(config, grid, cfg.r_comm, cfg.comm_metric)
            logits = model(torch.from_numpy(obs), graph).numpy()
            order = sorted(range(n),
                           key=lambda i: (-dists[i][config[i]], i))
            claimed = {}
            moves = {}
            for i in order:
                x, y = grid.xy(config[i])
                ranked = np.argsort(-logits[i], kind="stable")
                target = None
                for a in ranked:
                    dx, dy = ACTIONS[a]
                    nx, ny = x + dx, y + dy
                    if not grid.in_bounds(nx, ny):
                        continue
                    v = grid.vertex(nx, ny)
                    if not grid.passable[v] or v in claimed:
                        continue
                    # swap check: someone already moved onto my cell from v
                    swapper = [k for k, tv in moves.items()
                               if tv == config[i] and config[k] == v]
                    if swapper:
                        continue
                    target = v
                    break
                if target is None:
                    return False, config
                claimed[target] = i
                moves[i] = target
            config = [moves[i] for i in range(n)]
    return all(config[i] == goals[i] for i in range(n)), config


def dagger_round(
    model: MagatModel,
    trajectories: Sequence[Trajectory],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> List[Sample]:
    """Roll the policy out on sampled instances; on failure append the full
    expert completion from the failure configuration."""
    new_samples: List[Sample] = []
    picks = rng.choice(len(trajectories),
                       size=min(cfg.dagger_instances, len(trajectories)),
                       replace=False)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for idx in picks:
            traj = trajectories[int(idx)]
            grid = traj.grid
            max_steps = 4 * (grid.width + grid.height)
            ok, final = rollout(model, grid, traj.starts, traj.goals,
                                max_steps)
            if ok:
                continue
            if len(set(final)) != len(final):
                continue  # defensive: degenerate failure configuration
            if any(final[i] == traj.goals[i] for i in range(len(final))) and \
                    sorted(final) == sorted(traj.goals) and \
                    tuple(final) != traj.goals:
                continue  # goals occupied pairwise-swapped; skip odd case
            map_path = tmp / f"{traj.name}_dagger.map"
            rows = [
                "".join(
                    "." if grid.passable[y * grid.width + x] else "@"
                    for x in range(grid.width)
                )
                for y in range(grid.height)
            ]
            map_path.write_text(
                "type octile\nheight {}\nwidth {}\nmap\n{}\n".format(
                    grid.height, grid.width, "\n".join(rows)
                )
            )
            scen_path = map_path.with_suffix(".scen")
            scen_path.write_text(dump_scenario(grid, final, traj.goals))
            sol_path = map_path.with_suffix(".sol")
            completion = solve_instance(
                map_path, scen_path, len(final), sol_path,
                timeouts=cfg.dagger_timeouts, seed=cfg.seed,
            )
            if completion is None:
                log.info("dagger: expert failed from failure config on %s",
                         traj.name)
                continue
            new_samples.extend(
                samples_from_trajectory(completion, model.cfg)
            )
    return new_samples


def train(
    model: MagatModel,
    samples: List[Sample],
    cfg: TrainConfig,
    trajectories: Optional[Sequence[Trajectory]] = None,
    checkpoint_path: Optional[Path] = None,
) -> List[float]:
    """Train in place; returns per-epoch mean losses.

    ``trajectories`` enables the DAgger rounds; without them the loop is
    plain behavior cloning. Zero epochs leaves the model untouched
    (warm-start identity).
    """
    if not samples:
        raise ValueError("dataset is empty")
    if cfg.epochs == 0:
        return []
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr)
    history = []
    data = list(samples)
    for epoch in range(cfg.epochs):
        frac = epoch / max(1, cfg.epochs - 1)
        lr = cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (
            1 + math.cos(math.pi * frac)
        )
        for group in opt.param_groups:
            group["lr"] = lr
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        batches = 0
        model.train()
        for start in range(0, len(order), cfg.batch_size):
            batch = [data[i] for i in order[start : start + cfg.batch_size]]
            opt.zero_grad()
            loss = batch_loss(model, batch)
            if not torch.isfinite(loss):
                if checkpoint_path is not None:
                    save_checkpoint(model, checkpoint_path)
                raise RuntimeError(
                    f"loss diverged (non-finite) at epoch {epoch}"
                )
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach())
            batches += 1
        history.append(epoch_loss / max(1, batches))
        log.info("epoch %d: loss %.4f lr %.2e samples %d",
                 epoch, history[-1], lr, len(data))
        if (
            trajectories
            and cfg.dagger_every > 0
            and (epoch + 1) % cfg.dagger_every == 0
            and epoch + 1 < cfg.epochs
        ):
            model.eval()
            added = dagger_round(model, trajectories, cfg, rng)
            if added:
                log.info("dagger: appended %d samples", len(added))
                data.extend(added)
    model.eval()
    return history


def save_checkpoint(model: MagatModel, path: Path) -> None:
    torch.save(
        {"config": model.cfg.__dict__, "state": model.state_dict()}, path
    )


def load_checkpoint(path: Path) -> MagatModel:
    blob = torch.load(path, weights_only=False)
    cfg = ModelConfig(**{
        **blob["config"],
        "cnn_channels": tuple(blob["config"]["cnn_channels"]),
    })
    model = MagatModel(cfg)
    model.load_state_dict(blob["state"])
    model.eval()
    return model
