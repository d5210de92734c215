"""Export format contract and cross-stack agreement with the solver engine.

These tests deliberately import the solver package as the reference
implementation — the shipped pipeline itself only talks to it through
subprocesses and files.
"""

import numpy as np
import pytest
import torch

from magat_trainer.formats import Grid
from magat_trainer.model import MagatModel, export_bytes, import_bytes
from magat_trainer.observe import build_comm_graph, build_observation

import lagat.policy as engine


def make_model(tiny_cfg, seed=0):
    torch.manual_seed(seed)
    return MagatModel(tiny_cfg)


class TestExportFormat:
    def test_engine_parses_export(self, tiny_cfg):
        data = export_bytes(make_model(tiny_cfg))
        w = engine.load_weights(data)
        assert w.r_obs == tiny_cfg.r_obs
        assert w.embed_dim == tiny_cfg.embed_dim
        assert set(w.tensors) == {n for n, _ in w.manifest()}

    def test_corrupt_magic_rejected(self, tiny_cfg):
        data = bytearray(export_bytes(make_model(tiny_cfg)))
        data[0] ^= 0xFF
        with pytest.raises(engine.WeightFormatError):
            engine.load_weights(bytes(data))

    def test_truncated_rejected(self, tiny_cfg):
        data = export_bytes(make_model(tiny_cfg))
        with pytest.raises(engine.WeightFormatError):
            engine.load_weights(data[:-5])

    def test_import_export_identity(self, tiny_cfg):
        data = export_bytes(make_model(tiny_cfg))
        assert export_bytes(import_bytes(data)) == data


class TestCrossStack:
    def test_forward_agreement_on_20_inputs(self, tiny_cfg):
        """Trainer forward vs engine forward within 1e-4 relative on 20
        shared random inputs."""
        model = make_model(tiny_cfg, seed=7).double().eval()
        weights = engine.load_weights(export_bytes(model))
        rng = np.random.default_rng(11)
        side = 8
        grid = Grid(side, side, np.ones(side * side, dtype=bool))
        max_rel = 0.0
        for _ in range(20):
            n = int(rng.integers(1, 5))
            cells = rng.choice(side * side, size=2 * n, replace=False)
            config = [int(v) for v in cells[:n]]
            goals = [int(v) for v in cells[n:]]
            dists = [grid.distance_field(g) for g in goals]
            obs = np.stack([
                build_observation(grid, config, i, dists[i], goals[i],
                                  tiny_cfg.r_obs)
                for i in range(n)
            ])
            graph = build_comm_graph(config, grid, tiny_cfg.r_comm)
            with torch.no_grad():
                logits = model(torch.from_numpy(obs), graph)
                ours = torch.softmax(logits, dim=1).numpy()

            from lagat.grid import GridMap, Instance

            gmap = GridMap(side, side, np.ones(side * side, dtype=bool))
            inst = Instance(gmap, config, goals)
            eng_obs = np.stack([
                engine.build_observation(inst, config, i, inst.dist_field(i),
                                         weights.r_obs)
                for i in range(n)
            ])
            eng_graph = engine.build_comm_graph(config, gmap, weights.r_comm)
            theirs = engine.gnn_forward(weights, eng_obs, eng_graph)
            max_rel = max(
                max_rel,
                float(np.max(np.abs(ours - theirs)
                             / np.maximum(np.abs(theirs), 1e-12))),
            )
        print(f"[{'PASS' if max_rel < 1e-4 else 'FAIL'}] cross-stack: "
              f"max rel err {max_rel:.2e} over 20 inputs (tol 1e-4)")
        assert max_rel < 1e-4
