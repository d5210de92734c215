"""Graph-attention policy inference: local observations, communication graph
with edge features, CNN encoder, three attention layers, MLP decoder, and
conversion of action distributions into PIBT preferences.

No training here; weights arrive via the bit-exact ``MAGATW01`` file format.
Aggregation iterates in-neighbors sorted by their grid vertex, a label-free
total order (positions are distinct), so relabeling agents permutes outputs
bitwise exactly.
"""

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .grid import DistField, GridMap, Instance
from .pibt import Preference

MAGIC = b"MAGATW01"

# action order is fixed: index -> (dx, dy)
ACTIONS = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))  # stay, up, down, left, right


class WeightFormatError(ValueError):
    pass


@dataclass
class PolicyWeights:
    """Named-tensor bundle plus shape metadata; immutable by convention."""

    r_obs: int
    r_comm: int
    embed_dim: int
    num_layers: int
    actions: int
    edge_dim: int
    edge_hidden: int
    cnn_channels: Tuple[int, int]
    decoder_hidden: int
    comm_metric: str  # chebyshev | manhattan
    leaky_slope: float
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def manifest(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return expected_manifest(
            self.embed_dim, self.num_layers, self.actions, self.edge_dim,
            self.edge_hidden, self.cnn_channels, self.decoder_hidden,
        )


def expected_manifest(embed_dim, num_layers, actions, edge_dim, edge_hidden,
                      cnn_channels, decoder_hidden):
    c1, c2 = cnn_channels
    out = [
        ("cnn.conv1.weight", (c1, 4, 3, 3)),
        ("cnn.conv1.bias", (c1,)),
        ("cnn.conv2.weight", (c2, c1, 3, 3)),
        ("cnn.conv2.bias", (c2,)),
        ("cnn.conv3.weight", (embed_dim, c2, 3, 3)),
        ("cnn.conv3.bias", (embed_dim,)),
        ("edge_mlp.fc1.weight", (edge_hidden, 3)),
        ("edge_mlp.fc1.bias", (edge_hidden,)),
        ("edge_mlp.fc2.weight", (edge_dim, edge_hidden)),
        ("edge_mlp.fc2.bias", (edge_dim,)),
    ]
    for l in range(num_layers):
        out += [
            (f"layers.{l}.W_R", (embed_dim, embed_dim)),
            (f"layers.{l}.W_n", (embed_dim, embed_dim)),
            (f"layers.{l}.W_e", (embed_dim, edge_dim)),
            (f"layers.{l}.Theta_n", (embed_dim, embed_dim)),
            (f"layers.{l}.Theta_e", (embed_dim, edge_dim)),
        ]
    out += [
        ("decoder.fc1.weight", (decoder_hidden, embed_dim)),
        ("decoder.fc1.bias", (decoder_hidden,)),
        ("decoder.fc2.weight", (actions, decoder_hidden)),
        ("decoder.fc2.bias", (actions,)),
    ]
    return out


def save_weights(weights: PolicyWeights) -> bytes:
    manifest = weights.manifest()
    meta = {
        "r_obs": weights.r_obs,
        "r_comm": weights.r_comm,
        "embed_dim": weights.embed_dim,
        "num_layers": weights.num_layers,
        "actions": weights.actions,
        "edge_dim": weights.edge_dim,
        "edge_hidden": weights.edge_hidden,
        "cnn_channels": list(weights.cnn_channels),
        "decoder_hidden": weights.decoder_hidden,
        "comm_metric": weights.comm_metric,
        "leaky_slope": weights.leaky_slope,
        "manifest": [
            {"name": name, "shape": list(shape)} for name, shape in manifest
        ],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    for name, shape in manifest:
        t = weights.tensors[name]
        if t.shape != shape:
            raise WeightFormatError(
                f"tensor {name} has shape {t.shape}, expected {shape}"
            )
        parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(parts)


def load_weights(data: bytes) -> PolicyWeights:
    """Parse a weight file; save(load(data)) == data for valid files."""
    if data[:8] != MAGIC:
        raise WeightFormatError(f"bad magic {data[:8]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise WeightFormatError("truncated metadata length")
    (meta_len,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + meta_len:
        raise WeightFormatError("truncated metadata block")
    try:
        meta = json.loads(data[12 : 12 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"bad metadata JSON: {e}")
    expected = expected_manifest(
        meta["embed_dim"], meta["num_layers"], meta["actions"],
        meta["edge_dim"], meta["edge_hidden"], tuple(meta["cnn_channels"]),
        meta["decoder_hidden"],
    )
    declared = [(m["name"], tuple(m["shape"])) for m in meta["manifest"]]
    if declared != expected:
        raise WeightFormatError(
            "manifest inconsistent with metadata "
            f"(declared {len(declared)} tensors, expected {len(expected)})"
        )
    tensors = {}
    offset = 12 + meta_len
    for name, shape in expected:
        nbytes = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        if offset + nbytes > len(data):
            raise WeightFormatError(f"truncated tensor data at {name}")
        arr = np.frombuffer(data[offset : offset + nbytes], dtype="<f4")
        arr = arr.reshape(shape).copy()
        if not np.all(np.isfinite(arr)):
            raise WeightFormatError(f"non-finite values in tensor {name}")
        arr.setflags(write=False)
        tensors[name] = arr
        offset += nbytes
    if offset != len(data):
        raise WeightFormatError(f"{len(data) - offset} trailing bytes")
    return PolicyWeights(
        r_obs=meta["r_obs"],
        r_comm=meta["r_comm"],
        embed_dim=meta["embed_dim"],
        num_layers=meta["num_layers"],
        actions=meta["actions"],
        edge_dim=meta["edge_dim"],
        edge_hidden=meta["edge_hidden"],
        cnn_channels=tuple(meta["cnn_channels"]),
        decoder_hidden=meta["decoder_hidden"],
        comm_metric=meta["comm_metric"],
        leaky_slope=meta["leaky_slope"],
        tensors=tensors,
    )


def random_weights(
    seed: int = 0,
    r_obs: int = 5,
    r_comm: int = 7,
    embed_dim: int = 128,
    num_layers: int = 3,
    edge_dim: int = 32,
    edge_hidden: int = 32,
    cnn_channels: Tuple[int, int] = (32, 64),
    decoder_hidden: int = 64,
    comm_metric: str = "chebyshev",
) -> PolicyWeights:
    """Small random weight bundle (tests, smoke runs)."""
    rng = np.random.default_rng(seed)
    w = PolicyWeights(
        r_obs=r_obs, r_comm=r_comm, embed_dim=embed_dim, num_layers=num_layers,
        actions=5, edge_dim=edge_dim, edge_hidden=edge_hidden,
        cnn_channels=cnn_channels, decoder_hidden=decoder_hidden,
        comm_metric=comm_metric, leaky_slope=0.2,
    )
    for name, shape in w.manifest():
        fan_in = shape[-1] if len(shape) == 2 else max(
            1, int(np.prod(shape[1:], dtype=np.int64))
        )
        scale = 1.0 / math.sqrt(fan_in)
        w.tensors[name] = (
            rng.uniform(-scale, scale, size=shape).astype(np.float32)
        )
    return w


# ---------------------------------------------------------------------------
# Observation and communication graph


def build_observation(
    instance: Instance,
    config: Sequence[int],
    agent: int,
    dist: DistField,
    r_obs: int,
) -> np.ndarray:
    """4 x (2R+1) x (2R+1) local view centered on the agent.

    Channels: obstacles (out-of-map counts as obstacle), other agents, goal
    projection, and normalized cost-to-go; obstacles and unreachable cells get
    1.0 in the cost channel.
    """
    gmap = instance.map
    side = 2 * r_obs + 1
    obs = np.zeros((4, side, side), dtype=np.float64)
    cx, cy = gmap.xy(config[agent])
    center_dist = dist[config[agent]]
    others = {v for j, v in enumerate(config) if j != agent}
    for oy in range(side):
        for ox in range(side):
            x, y = cx + ox - r_obs, cy + oy - r_obs
            if not gmap.in_bounds(x, y) or not gmap.passable[gmap.vertex(x, y)]:
                obs[0, oy, ox] = 1.0
                obs[3, oy, ox] = 1.0
                continue
            v = gmap.vertex(x, y)
            if v in others:
                obs[1, oy, ox] = 1.0
            d = dist[v]
            if d >= gmap.unreachable or center_dist >= gmap.unreachable:
                obs[3, oy, ox] = 1.0
            else:
                obs[3, oy, ox] = (d - center_dist) / (2 * r_obs)
    # goal projection: the goal cell if inside the FOV, otherwise the FOV
    # boundary cell closest in angle to the goal direction
    gx, gy = gmap.xy(dist.goal)
    dgx, dgy = gx - cx, gy - cy
    if abs(dgx) <= r_obs and abs(dgy) <= r_obs:
        obs[2, dgy + r_obs, dgx + r_obs] = 1.0
    else:
        best = None
        best_cos = -2.0
        norm_g = math.hypot(dgx, dgy)
        for oy in range(side):
            for ox in range(side):
                if oy not in (0, side - 1) and ox not in (0, side - 1):
                    continue
                bx, by = ox - r_obs, oy - r_obs
                cos = (bx * dgx + by * dgy) / (math.hypot(bx, by) * norm_g)
                if cos > best_cos + 1e-12:
                    best_cos = cos
                    best = (oy, ox)
        obs[2, best[0], best[1]] = 1.0
    return obs


@dataclass
class CommGraph:
    """Directed proximity graph over agents with 3-dim edge features.

    in_neighbors[i] lists source agents j of edges (j -> i), sorted by j's
    grid vertex; in_features[i] holds the aligned (dx, dy, manhattan) rows.
    """

    n: int
    in_neighbors: List[np.ndarray]
    in_features: List[np.ndarray]


def build_comm_graph(
    config: Sequence[int],
    gmap: GridMap,
    r_comm: int,
    metric: str = "chebyshev",
) -> CommGraph:
    n = len(config)
    xy = [gmap.xy(v) for v in config]
    in_neighbors = []
    in_features = []
    for i in range(n):
        xi, yi = xy[i]
        js = []
        for j in range(n):
            if j == i:
                continue
            dx, dy = xy[j][0] - xi, xy[j][1] - yi
            prox = max(abs(dx), abs(dy)) if metric == "chebyshev" else (
                abs(dx) + abs(dy)
            )
            if prox <= r_comm:
                js.append(j)
        js.sort(key=lambda j: config[j])  # label-free order: positions distinct
        feats = np.array(
            [
                (xy[j][0] - xi, xy[j][1] - yi,
                 abs(xy[j][0] - xi) + abs(xy[j][1] - yi))
                for j in js
            ],
            dtype=np.float64,
        ).reshape(len(js), 3)
        in_neighbors.append(np.array(js, dtype=np.int64))
        in_features.append(feats)
    return CommGraph(n=n, in_neighbors=in_neighbors, in_features=in_features)


# ---------------------------------------------------------------------------
# Forward pass


def _relu(x):
    return np.maximum(x, 0.0)


def _dense(weights: PolicyWeights) -> Dict[str, np.ndarray]:
    """Float64 views of the weight tensors, plus contiguous per-offset conv
    slices, computed once per bundle and cached on it."""
    cache = getattr(weights, "_dense_cache", None)
    if cache is None:
        cache = {k: v.astype(np.float64) for k, v in weights.tensors.items()}
        for conv in ("conv1", "conv2", "conv3"):
            w = cache[f"cnn.{conv}.weight"]  # (out_c, c, 3, 3)
            # (9c, out_c): kernel slabs stacked in row-major (ky, kx) order
            cache[f"cnn.{conv}.stacked"] = np.ascontiguousarray(
                w.transpose(0, 2, 3, 1).reshape(w.shape[0], -1).T
            )
        object.__setattr__(weights, "_dense_cache", cache)
    return cache


def _conv3_valid(x: np.ndarray, w_stacked: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched valid 3x3 convolution as one im2col matmul with agents along
    rows, so each agent's output is computed independently of the others.
    w_stacked is (9c, out_c) with kernel offsets in row-major (ky, kx) order
    matching the column layout built here."""
    n, c, h, wdt = x.shape
    out_c = w_stacked.shape[1]
    ho, wo = h - 2, wdt - 2
    cols = np.empty((n * ho * wo, 9 * c))
    for ky in range(3):
        for kx in range(3):
            k = 3 * ky + kx
            # (n, c, ho, wo) slice -> rows (n*ho*wo) x channels
            cols[:, k * c : (k + 1) * c] = (
                x[:, :, ky : ky + ho, kx : kx + wo]
                .transpose(0, 2, 3, 1)
                .reshape(n * ho * wo, c)
            )
    out = cols @ w_stacked + b
    return out.reshape(n, ho, wo, out_c).transpose(0, 3, 1, 2)


def _encode(weights: PolicyWeights, observations: np.ndarray) -> np.ndarray:
    t = _dense(weights)
    x = observations.astype(np.float64)
    for conv in ("conv1", "conv2", "conv3"):
        x = _relu(
            _conv3_valid(x, t[f"cnn.{conv}.stacked"], t[f"cnn.{conv}.bias"])
        )
    return x.max(axis=(2, 3))  # global max pool -> (n, embed_dim)


def gnn_forward(
    weights: PolicyWeights,
    observations: np.ndarray,
    graph: CommGraph,
    return_attention: bool = False,
):
    """Action distributions for all agents of one configuration.

    observations: (n, 4, 2R+1, 2R+1). Deterministic; the per-agent message sum
    runs over in-neighbors in the graph's fixed (vertex-sorted) order.
    """
    t = _dense(weights)
    n = graph.n
    slope = weights.leaky_slope
    x = _encode(weights, observations)

    # processed edge features are layer-independent
    edge_w: List[np.ndarray] = []
    for i in range(n):
        f = graph.in_features[i]
        hdn = _relu(f @ t["edge_mlp.fc1.weight"].T + t["edge_mlp.fc1.bias"])
        edge_w.append(hdn @ t["edge_mlp.fc2.weight"].T + t["edge_mlp.fc2.bias"])

    attention: List[List[np.ndarray]] = []
    for l in range(weights.num_layers):
        w_r = t[f"layers.{l}.W_R"]
        w_n = t[f"layers.{l}.W_n"]
        w_e = t[f"layers.{l}.W_e"]
        th_n = t[f"layers.{l}.Theta_n"]
        th_e = t[f"layers.{l}.Theta_e"]
        xn = x @ w_n.T
        xt = x @ th_n.T
        new_x = np.empty_like(x)
        layer_att: List[np.ndarray] = []
        for i in range(n):
            js = graph.in_neighbors[i]
            if len(js) == 0:
                m = np.zeros(x.shape[1])
                layer_att.append(np.empty(0))
            else:
                wj = edge_w[i]  # (k, edge_dim), aligned with js
                logits = (xt[js] + wj @ th_e.T) @ x[i]
                act = np.where(logits > 0, logits, slope * logits)
                act = act - act.max()  # stable softmax
                e = np.exp(act)
                alpha = e / e.sum()
                layer_att.append(alpha)
                m = alpha @ (xn[js] + wj @ w_e.T)
            new_x[i] = _relu(w_r @ x[i] + m)
        x = new_x
        attention.append(layer_att)

    h = _relu(x @ t["decoder.fc1.weight"].T + t["decoder.fc1.bias"])
    logits = h @ t["decoder.fc2.weight"].T + t["decoder.fc2.bias"]
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    if return_attention:
        return probs, attention
    return probs


# ---------------------------------------------------------------------------
# Action distribution -> PIBT preference


def policy_preference(
    dist_probs: np.ndarray,
    agent: int,
    config: Sequence[int],
    gmap: GridMap,
    tiebreak: DistField,
) -> Preference:
    """Feasible action targets sorted by probability descending; ties by
    ascending cost-to-go, then fixed action order."""
    x, y = gmap.xy(config[agent])
    entries = []
    for a, (dx, dy) in enumerate(ACTIONS):
        nx, ny = x + dx, y + dy
        if not gmap.in_bounds(nx, ny):
            continue
        v = gmap.vertex(nx, ny)
        if not gmap.passable[v]:
            continue
        entries.append((-float(dist_probs[a]), int(tiebreak[v]), a, v))
    entries.sort()
    return Preference(agent=agent, candidates=tuple(e[3] for e in entries))


class PolicyProvider:
    """Preference provider backed by a weight bundle.

    Batches one forward pass per search node and caches it, so the per-agent
    callback stays cheap inside PIBT.
    """

    def __init__(self, weights: PolicyWeights, instance: Instance,
                 cache_size: int = 256):
        self.weights = weights
        self.instance = instance
        self.cache_size = cache_size
        self._cache: Dict[int, np.ndarray] = {}

    def _probs_for(self, node_id: int, config: Tuple[int, ...]) -> np.ndarray:
        probs = self._cache.get(node_id)
        if probs is None:
            inst = self.instance
            obs = np.stack(
                [
                    build_observation(
                        inst, config, i, inst.dist_field(i), self.weights.r_obs
                    )
                    for i in range(inst.n)
                ]
            )
            graph = build_comm_graph(
                config, inst.map, self.weights.r_comm, self.weights.comm_metric
            )
            probs = gnn_forward(self.weights, obs, graph)
            if len(self._cache) >= self.cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[node_id] = probs
        return probs

    def __call__(self, agent: int, config: Tuple[int, ...], ctx) -> Tuple[int, ...]:
        probs = self._probs_for(ctx.node_id, config)
        pref = policy_preference(
            probs[agent], agent, config, self.instance.map,
            self.instance.dist_field(agent),
        )
        return pref.candidates
