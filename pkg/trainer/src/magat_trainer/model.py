"""Torch implementation of the graph-attention preference policy, plus
bit-exact import/export of the ``MAGATW01`` weight format consumed by the
solver.

Architecture (identical to the inference stack): three valid 3x3 convolutions
with ReLU and a global max-pool produce the per-agent embedding; a two-layer
edge MLP maps (dx, dy, manhattan) to edge embeddings; three attention layers
compute logits x_i^T (Theta_n x_j + Theta_e w_ji), LeakyReLU, softmax over
in-neighbors, message sum of W_n x_j + W_e w_ji, update ReLU(W_R x + m); a
two-layer decoder ends in a 5-way softmax.
"""

import json
import struct
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .observe import CommGraph

MAGIC = b"MAGATW01"


@dataclass
class ModelConfig:
    r_obs: int = 5
    r_comm: int = 7
    embed_dim: int = 128
    num_layers: int = 3
    actions: int = 5
    edge_dim: int = 32
    edge_hidden: int = 32
    cnn_channels: Tuple[int, int] = (32, 64)
    decoder_hidden: int = 64
    comm_metric: str = "chebyshev"
    leaky_slope: float = 0.2


def manifest(cfg: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    c1, c2 = cfg.cnn_channels
    out = [
        ("cnn.conv1.weight", (c1, 4, 3, 3)),
        ("cnn.conv1.bias", (c1,)),
        ("cnn.conv2.weight", (c2, c1, 3, 3)),
        ("cnn.conv2.bias", (c2,)),
        ("cnn.conv3.weight", (cfg.embed_dim, c2, 3, 3)),
        ("cnn.conv3.bias", (cfg.embed_dim,)),
        ("edge_mlp.fc1.weight", (cfg.edge_hidden, 3)),
        ("edge_mlp.fc1.bias", (cfg.edge_hidden,)),
        ("edge_mlp.fc2.weight", (cfg.edge_dim, cfg.edge_hidden)),
        ("edge_mlp.fc2.bias", (cfg.edge_dim,)),
    ]
    for l in range(cfg.num_layers):
        out += [
            (f"layers.{l}.W_R", (cfg.embed_dim, cfg.embed_dim)),
            (f"layers.{l}.W_n", (cfg.embed_dim, cfg.embed_dim)),
            (f"layers.{l}.W_e", (cfg.embed_dim, cfg.edge_dim)),
            (f"layers.{l}.Theta_n", (cfg.embed_dim, cfg.embed_dim)),
            (f"layers.{l}.Theta_e", (cfg.embed_dim, cfg.edge_dim)),
        ]
    out += [
        ("decoder.fc1.weight", (cfg.decoder_hidden, cfg.embed_dim)),
        ("decoder.fc1.bias", (cfg.decoder_hidden,)),
        ("decoder.fc2.weight", (cfg.actions, cfg.decoder_hidden)),
        ("decoder.fc2.bias", (cfg.actions,)),
    ]
    return out


class AttentionLayer(nn.Module):
    def __init__(self, embed_dim: int, edge_dim: int):
        super().__init__()
        self.W_R = nn.Parameter(torch.empty(embed_dim, embed_dim))
        self.W_n = nn.Parameter(torch.empty(embed_dim, embed_dim))
        self.W_e = nn.Parameter(torch.empty(embed_dim, edge_dim))
        self.Theta_n = nn.Parameter(torch.empty(embed_dim, embed_dim))
        self.Theta_e = nn.Parameter(torch.empty(embed_dim, edge_dim))


class MagatModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2 = cfg.cnn_channels
        self.conv1 = nn.Conv2d(4, c1, 3)
        self.conv2 = nn.Conv2d(c1, c2, 3)
        self.conv3 = nn.Conv2d(c2, cfg.embed_dim, 3)
        self.edge_fc1 = nn.Linear(3, cfg.edge_hidden)
        self.edge_fc2 = nn.Linear(cfg.edge_hidden, cfg.edge_dim)
        self.layers = nn.ModuleList(
            AttentionLayer(cfg.embed_dim, cfg.edge_dim)
            for _ in range(cfg.num_layers)
        )
        self.dec_fc1 = nn.Linear(cfg.embed_dim, cfg.decoder_hidden)
        self.dec_fc2 = nn.Linear(cfg.decoder_hidden, cfg.actions)
        self._init_params()

    def _init_params(self):
        for name, shape in manifest(self.cfg):
            p = self._param(name)
            fan_in = shape[-1] if len(shape) == 2 else max(
                1, int(np.prod(shape[1:]))
            )
            bound = 1.0 / float(np.sqrt(fan_in))
            nn.init.uniform_(p, -bound, bound)

    # --- manifest-name <-> parameter mapping -------------------------------

    _NAME_MAP = {
        "cnn.conv1.weight": "conv1.weight", "cnn.conv1.bias": "conv1.bias",
        "cnn.conv2.weight": "conv2.weight", "cnn.conv2.bias": "conv2.bias",
        "cnn.conv3.weight": "conv3.weight", "cnn.conv3.bias": "conv3.bias",
        "edge_mlp.fc1.weight": "edge_fc1.weight",
        "edge_mlp.fc1.bias": "edge_fc1.bias",
        "edge_mlp.fc2.weight": "edge_fc2.weight",
        "edge_mlp.fc2.bias": "edge_fc2.bias",
        "decoder.fc1.weight": "dec_fc1.weight",
        "decoder.fc1.bias": "dec_fc1.bias",
        "decoder.fc2.weight": "dec_fc2.weight",
        "decoder.fc2.bias": "dec_fc2.bias",
    }

    def _param(self, name: str) -> torch.Tensor:
        attr = self._NAME_MAP.get(name)
        if attr is None:  # layers.N.X
            _, idx, p = name.split(".")
            return getattr(self.layers[int(idx)], p)
        obj = self
        for part in attr.split("."):
            obj = getattr(obj, part)
        return obj

    # --- forward -----------------------------------------------------------

    def encode(self, obs: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(obs))
        x = F.relu(self.conv2(x))
        x = F.relu(self.conv3(x))
        return x.amax(dim=(2, 3))

    def forward(self, obs: torch.Tensor, graph: CommGraph) -> torch.Tensor:
        """Action logits (n, actions) for one configuration's agents."""
        return self.forward_embeddings(self.encode(obs), graph)

    def forward_embeddings(self, x: torch.Tensor,
                           graph: CommGraph) -> torch.Tensor:
        slope = self.cfg.leaky_slope
        edge_w = []
        for i in range(graph.n):
            f = torch.as_tensor(graph.in_features[i], dtype=x.dtype,
                                device=x.device)
            edge_w.append(self.edge_fc2(F.relu(self.edge_fc1(f))))
        for layer in self.layers:
            xn = x @ layer.W_n.T
            xt = x @ layer.Theta_n.T
            new_rows = []
            for i in range(graph.n):
                js = torch.as_tensor(graph.in_neighbors[i], dtype=torch.long,
                                     device=x.device)
                if len(js) == 0:
                    m = torch.zeros_like(x[i])
                else:
                    wj = edge_w[i]
                    logits = (xt[js] + wj @ layer.Theta_e.T) @ x[i]
                    alpha = torch.softmax(
                        F.leaky_relu(logits, negative_slope=slope), dim=0
                    )
                    m = alpha @ (xn[js] + wj @ layer.W_e.T)
                new_rows.append(F.relu(layer.W_R @ x[i] + m))
            x = torch.stack(new_rows)
        h = F.relu(self.dec_fc1(x))
        return self.dec_fc2(h)

    def forward_batched(
        self,
        obs: torch.Tensor,
        edge_src: torch.Tensor,
        edge_dst: torch.Tensor,
        edge_feat: torch.Tensor,
    ) -> torch.Tensor:
        """Logits for many configurations at once.

        Agents of all samples are flattened into one (N, ...) batch; the edge
        list carries batch-global agent indices, so samples never exchange
        messages. Used by the training loop; mathematically identical to
        ``forward`` up to float summation order.
        """
        x = self.encode(obs)
        n = x.shape[0]
        ew = self.edge_fc2(F.relu(self.edge_fc1(edge_feat)))
        slope = self.cfg.leaky_slope
        for layer in self.layers:
            xn = x @ layer.W_n.T
            xt = x @ layer.Theta_n.T
            if len(edge_src):
                logits = ((xt[edge_src] + ew @ layer.Theta_e.T)
                          * x[edge_dst]).sum(dim=1)
                act = F.leaky_relu(logits, negative_slope=slope)
                seg_max = torch.full((n,), -torch.inf, dtype=act.dtype)
                seg_max = seg_max.scatter_reduce(
                    0, edge_dst, act.detach(), reduce="amax"
                )
                e = torch.exp(act - seg_max[edge_dst])
                denom = torch.zeros(n, dtype=e.dtype).index_add_(
                    0, edge_dst, e
                )
                alpha = e / denom[edge_dst]
                msg = alpha.unsqueeze(1) * (xn[edge_src] + ew @ layer.W_e.T)
                m = torch.zeros_like(x).index_add_(0, edge_dst, msg)
            else:
                m = torch.zeros_like(x)
            x = F.relu(x @ layer.W_R.T + m)
        h = F.relu(self.dec_fc1(x))
        return self.dec_fc2(h)


# ---------------------------------------------------------------------------
# Weight-file import/export


def export_bytes(model: MagatModel) -> bytes:
    cfg = model.cfg
    man = manifest(cfg)
    meta = dict(asdict(cfg), cnn_channels=list(cfg.cnn_channels),
                manifest=[{"name": n, "shape": list(s)} for n, s in man])
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    for name, shape in man:
        t = model._param(name).detach().cpu().numpy()
        if t.shape != shape:
            raise ValueError(f"tensor {name}: shape {t.shape} != {shape}")
        arr = np.ascontiguousarray(t, dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name}: non-finite values")
        parts.append(arr.tobytes())
    return b"".join(parts)


def import_bytes(data: bytes) -> MagatModel:
    if data[:8] != MAGIC:
        raise ValueError("bad magic")
    (meta_len,) = struct.unpack("<I", data[8:12])
    meta = json.loads(data[12 : 12 + meta_len].decode("utf-8"))
    cfg = ModelConfig(
        r_obs=meta["r_obs"], r_comm=meta["r_comm"],
        embed_dim=meta["embed_dim"], num_layers=meta["num_layers"],
        actions=meta["actions"], edge_dim=meta["edge_dim"],
        edge_hidden=meta["edge_hidden"],
        cnn_channels=tuple(meta["cnn_channels"]),
        decoder_hidden=meta["decoder_hidden"],
        comm_metric=meta["comm_metric"], leaky_slope=meta["leaky_slope"],
    )
    model = MagatModel(cfg)
    offset = 12 + meta_len
    with torch.no_grad():
        for name, shape in manifest(cfg):
            nbytes = 4 * int(np.prod(shape))
            arr = np.frombuffer(data[offset : offset + nbytes],
                                dtype="<f4").reshape(shape).copy()
            model._param(name).copy_(torch.from_numpy(arr))
            offset += nbytes
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes")
    return model
