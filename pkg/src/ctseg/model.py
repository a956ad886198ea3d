"""Contour-evolution network: ring graph, GCN blocks and the cascade.

Each block sees per-vertex pyramid features gathered at the current contour
(plus normalized coordinates by default) and predicts per-vertex offsets;
the cascade applies the blocks in sequence starting from the exemplar
contour centered in the target image.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .errors import ContourOutOfImage, ShapeMismatch
from .geometry import Contour
from .imaging import ImageGrid, FeaturePyramid

CHECKPOINT_MAGIC = "ctseg-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class RingGraph:
    """Cycle graph where each vertex links to two neighbors on each side."""

    n: int
    operator: np.ndarray = field(compare=False)

    @classmethod
    def build(cls, n: int) -> "RingGraph":
        if n < 5:
            raise ValueError("ring graph needs at least 5 vertices")
        a = np.zeros((n, n))
        idx = np.arange(n)
        for off in (1, 2):
            a[idx, (idx + off) % n] = 1.0
            a[idx, (idx - off) % n] = 1.0
        a_hat = a + np.eye(n)
        deg = a_hat.sum(axis=1)
        d_inv_sqrt = 1.0 / np.sqrt(deg)
        return cls(n=n, operator=d_inv_sqrt[:, None] * a_hat * d_inv_sqrt[None, :])


@dataclass
class ModelConfig:
    n_vertices: int = 100
    gcn_blocks: int = 5
    hidden_channels: int = 256
    res_layers: int = 6
    readout_channels: int = 32
    append_coords: bool = True

    def feature_channels(self, pyramid_channels: int) -> int:
        return pyramid_channels + (2 if self.append_coords else 0)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class ModelParams:
    """Named weight tensors for all blocks; insertion order is canonical."""

    config: ModelConfig
    tensors: dict

    @classmethod
    def init(cls, config: ModelConfig, in_channels: int, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        h, r = config.hidden_channels, config.readout_channels
        tensors = {}
        for b in range(config.gcn_blocks):
            pre = f"block{b}."
            tensors[pre + "in.W"] = _glorot(rng, in_channels, h)
            tensors[pre + "in.b"] = np.zeros(h)
            for l in range(config.res_layers):
                tensors[pre + f"res{l}.0.W"] = _glorot(rng, h, h)
                tensors[pre + f"res{l}.0.b"] = np.zeros(h)
                tensors[pre + f"res{l}.1.W"] = _glorot(rng, h, h)
                tensors[pre + f"res{l}.1.b"] = np.zeros(h)
            tensors[pre + "out.W"] = _glorot(rng, h, r)
            tensors[pre + "out.b"] = np.zeros(r)
            # zero-initialized readout: training starts from identity evolution
            tensors[pre + "fc.W"] = np.zeros((r, 2))
            tensors[pre + "fc.b"] = np.zeros(2)
        return cls(config=config, tensors=tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(config=self.config,
                           tensors={k: v.copy() for k, v in self.tensors.items()})

    def as_values(self) -> dict:
        return {k: dc.Value(v) for k, v in self.tensors.items()}


def _graph_conv(op: np.ndarray, x: dc.Value, w: dc.Value, b: dc.Value) -> dc.Value:
    return dc.matmul(dc.as_value(op), dc.matmul(x, w)) + b


def gcn_block_forward(block: dict, graph: RingGraph, q: dc.Value,
                      config: ModelConfig) -> dc.Value:
    """One evolution block: GraphConv+ReLU, residual stack, readout, FC."""
    if q.data.shape[0] != graph.n:
        raise ShapeMismatch(f"features rows {q.data.shape[0]} != graph n {graph.n}")
    op = graph.operator
    x = dc.relu(_graph_conv(op, q, block["in.W"], block["in.b"]))
    for l in range(config.res_layers):
        inner = dc.relu(_graph_conv(op, x, block[f"res{l}.0.W"], block[f"res{l}.0.b"]))
        x = x + dc.relu(_graph_conv(op, inner, block[f"res{l}.1.W"], block[f"res{l}.1.b"]))
    x = dc.relu(_graph_conv(op, x, block["out.W"], block["out.b"]))
    return dc.matmul(x, block["fc.W"]) + block["fc.b"]


def _block_view(values: dict, b: int) -> dict:
    pre = f"block{b}."
    return {k[len(pre):]: v for k, v in values.items() if k.startswith(pre)}


def gather_vertex_features(c: dc.Value, pyramid: FeaturePyramid,
                           img_shape: tuple[int, int],
                           append_coords: bool) -> dc.Value:
    """Per-vertex concatenated pyramid features, optionally with (x/W, y/H)."""
    parts = [dc.bilinear_gather(fmap, dc.mul(c, 1.0 / factor))
             for factor, fmap in pyramid.levels]
    if append_coords:
        h, w = img_shape
        parts.append(dc.mul(c, np.array([1.0 / w, 1.0 / h])))
    return dc.concat(parts, axis=1)


def forward(params: ModelParams, img: ImageGrid, pyramid: FeaturePyramid,
            exemplar_contour: Contour, graph: RingGraph | None = None,
            param_values: dict | None = None):
    """Run the cascade; returns (contour Value C_K, list of intermediates).

    Intermediates are plain arrays [C_0 .. C_K]. Pass param_values to reuse
    Value-wrapped parameters so gradients reach the weights.
    """
    cfg = params.config
    if exemplar_contour.n != cfg.n_vertices:
        raise ShapeMismatch(
            f"exemplar has {exemplar_contour.n} vertices, config wants {cfg.n_vertices}")
    graph = graph or RingGraph.build(cfg.n_vertices)
    values = param_values if param_values is not None else params.as_values()
    center = np.array([(img.width - 1) / 2.0, (img.height - 1) / 2.0])
    c0 = exemplar_contour.vertices - exemplar_contour.centroid() + center
    c = dc.Value(c0, requires_grad=False)
    intermediates = [c0.copy()]
    for b in range(cfg.gcn_blocks):
        q = gather_vertex_features(c, pyramid, (img.height, img.width),
                                   cfg.append_coords)
        offsets = gcn_block_forward(_block_view(values, b), graph, q, cfg)
        c = c + offsets
        intermediates.append(c.data.copy())
        inside = ((c.data[:, 0] >= 0) & (c.data[:, 0] <= img.width - 1)
                  & (c.data[:, 1] >= 0) & (c.data[:, 1] <= img.height - 1))
        if not inside.any():
            raise ContourOutOfImage(f"all vertices outside image after block {b}")
    return c, intermediates


def predict_contour(params: ModelParams, img: ImageGrid,
                    pyramid: FeaturePyramid, exemplar_contour: Contour,
                    graph: RingGraph | None = None) -> Contour:
    c, _ = forward(params, img, pyramid, exemplar_contour, graph=graph)
    return Contour(c.data)


# --- checkpoint I/O -------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    """JSON header line + little-endian float64 payload; bit-exact round trip."""
    index = []
    offset = 0
    for name, arr in params.tensors.items():
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "magic": CHECKPOINT_MAGIC,
        "format_version": CHECKPOINT_VERSION,
        "config": vars(params.config),
        "tensors": index,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        for arr in params.tensors.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    config = ModelConfig(**header["config"])
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count,
                            offset=entry["offset"]).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
    return ModelParams(config=config, tensors=tensors)
