"""One-shot training and human-in-the-loop fine-tuning with a local Adam.

The loss on every sample is evaluated at the final contour of the cascade:
lambda1 * perceptual + lambda2 * bending + lambda3 * edge, plus
lambda4 * partial matching for corrected images during fine-tuning.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diffcore as dc
from . import losses
from .data import Dataset
from .errors import DatasetInvalid, NonFiniteGradient
from .geometry import Contour, polygon_iou
from .hitl import correspond_segments
from .imaging import encode_features, gradient_magnitude_map
from .model import ModelConfig, ModelParams, RingGraph, forward


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 1.0
    lambda2: float = 0.25
    lambda3: float = 0.1
    lambda4: float = 1.0
    lr: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 12
    epochs: int = 500
    seed: int = 0
    n_vertices: int = 1000
    gcn_blocks: int = 5
    hidden_channels: int = 256
    perceptual_metric: str = "l1"
    append_coords: bool = True
    gradient_sigma: float = 1.0
    max_skipped_steps: int = 5

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3, self.lambda4) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(n_vertices=self.n_vertices, gcn_blocks=self.gcn_blocks,
                           hidden_channels=self.hidden_channels,
                           append_coords=self.append_coords)


# reference configuration for full-resolution corpora (the dataclass defaults)
FULLSCALE_PRESET = TrainConfig()

# shrunk sizes and a faster learning rate for laptop-scale synthetic runs
DESK_PRESET = TrainConfig(n_vertices=100, batch_size=8, epochs=80, lr=1e-3,
                          hidden_channels=96)


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def init(cls, params: ModelParams) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.tensors.items()},
                   v={k: np.zeros_like(p) for k, p in params.tensors.items()})


def adam_step(params: ModelParams, grads: dict, state: AdamState,
              cfg: TrainConfig) -> None:
    """In-place Adam update with coupled (L2-style) weight decay."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, p in params.tensors.items():
        g = grads.get(name, 0.0) + cfg.weight_decay * p
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        params.tensors[name] = p - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass
class SampleContext:
    """Per-image constants reused across epochs (the encoder is fixed)."""

    image_id: str
    pyramid: object
    gmap: np.ndarray
    image: object
    contour_gt: Contour | None
    corrections: object | None = None


def _prepare(ds: Dataset, cfg: TrainConfig) -> list:
    contexts = []
    for it in ds.items:
        if it.image_id == ds.exemplar_id:
            continue
        contexts.append(SampleContext(
            image_id=it.image_id,
            pyramid=encode_features(it.image),
            gmap=gradient_magnitude_map(it.image, cfg.gradient_sigma),
            image=it.image,
            contour_gt=it.contour,
            corrections=it.corrections))
    return contexts


def _sample_loss(params: ModelParams, ctx: SampleContext, exemplar: Contour,
                 pyr_e, bending, graph, cfg: TrainConfig,
                 param_values: dict, assignment: dict | None):
    c_final, _ = forward(params, ctx.image, ctx.pyramid, exemplar,
                         graph=graph, param_values=param_values)
    l_perc = losses.contour_perceptual_loss(c_final, ctx.pyramid, pyr_e,
                                            exemplar, metric=cfg.perceptual_metric)
    l_bend = losses.contour_bending_loss(c_final, bending)
    l_edge = losses.edge_loss(c_final, ctx.gmap)
    total = cfg.lambda1 * l_perc + cfg.lambda2 * l_bend + cfg.lambda3 * l_edge
    comps = {"perc": float(l_perc.data), "bend": float(l_bend.data),
             "edge": float(l_edge.data), "pcm": 0.0}
    if assignment is not None:
        l_pcm = losses.partial_contour_matching_loss(c_final, assignment)
        total = total + cfg.lambda4 * l_pcm
        comps["pcm"] = float(l_pcm.data)
    return total, comps, c_final


def _run_loop(ds: Dataset, cfg: TrainConfig, params: ModelParams,
              use_corrections: bool, log_path=None, checkpoint_dir=None):
    exemplar_item = ds.exemplar
    if exemplar_item.contour is None:
        raise DatasetInvalid("exemplar carries no ground-truth contour")
    contexts = _prepare(ds, cfg)
    if not contexts:
        raise DatasetInvalid("need at least one non-exemplar image")
    exemplar = exemplar_item.contour
    if exemplar.n != cfg.n_vertices:
        raise DatasetInvalid(
            f"exemplar has {exemplar.n} vertices, config wants {cfg.n_vertices}")
    pyr_e = encode_features(exemplar_item.image)
    bending = losses.precompute_bending(exemplar)
    graph = RingGraph.build(cfg.n_vertices)
    state = AdamState.init(params)
    rng = np.random.default_rng(cfg.seed)
    log = []
    skipped = 0
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            assignments = {}
            if use_corrections:
                # re-derive correspondences from the current predictions
                for ctx in contexts:
                    if ctx.corrections is None or len(ctx.corrections) == 0:
                        continue
                    c_final, _ = forward(params, ctx.image, ctx.pyramid,
                                         exemplar, graph=graph)
                    assignments[ctx.image_id] = correspond_segments(
                        Contour(c_final.data), ctx.corrections)
            order = rng.permutation(len(contexts))
            epoch_comps = {"perc": 0.0, "bend": 0.0, "edge": 0.0, "pcm": 0.0}
            epoch_iou = []
            for lo in range(0, len(order), cfg.batch_size):
                batch = order[lo:lo + cfg.batch_size]
                grads = {k: np.zeros_like(p) for k, p in params.tensors.items()}
                for j in batch:
                    ctx = contexts[j]
                    param_values = {k: dc.Value(v) for k, v in params.tensors.items()}
                    assignment = assignments.get(ctx.image_id) if use_corrections else None
                    total, comps, c_final = _sample_loss(
                        params, ctx, exemplar, pyr_e, bending, graph, cfg,
                        param_values, assignment)
                    total.backward()
                    for k in grads:
                        grads[k] += param_values[k].grad_or_zero() / len(batch)
                    for k in epoch_comps:
                        epoch_comps[k] += comps[k] / len(contexts)
                    if ctx.contour_gt is not None:
                        epoch_iou.append(polygon_iou(
                            Contour(c_final.data), ctx.contour_gt,
                            (ctx.image.height, ctx.image.width)))
                try:
                    adam_step(params, grads, state, cfg)
                    skipped = 0
                except NonFiniteGradient:
                    skipped += 1
                    if skipped > cfg.max_skipped_steps:
                        raise
            record = {
                "epoch": epoch,
                "loss_perc": epoch_comps["perc"],
                "loss_bend": epoch_comps["bend"],
                "loss_edge": epoch_comps["edge"],
                "loss_pcm": epoch_comps["pcm"],
            }
            record["loss_total"] = (cfg.lambda1 * record["loss_perc"]
                                    + cfg.lambda2 * record["loss_bend"]
                                    + cfg.lambda3 * record["loss_edge"]
                                    + cfg.lambda4 * record["loss_pcm"])
            if epoch_iou:
                record["train_iou"] = float(np.mean(epoch_iou))
            log.append(record)
            if log_file:
                log_file.write(json.dumps(record) + "\n")
                log_file.flush()
            if checkpoint_dir:
                from .model import save_checkpoint
                save_checkpoint(params, Path(checkpoint_dir) / f"ckpt_epoch_{epoch}.bin")
    finally:
        if log_file:
            log_file.close()
    return params, log


def train_one_shot(ds: Dataset, cfg: TrainConfig, log_path=None,
                   checkpoint_dir=None):
    """Train from scratch on one exemplar plus unlabeled images."""
    in_channels = _input_channels(ds, cfg)
    params = ModelParams.init(cfg.model_config(), in_channels, seed=cfg.seed)
    return _run_loop(ds, cfg, params, use_corrections=False,
                     log_path=log_path, checkpoint_dir=checkpoint_dir)


def finetune_hitl(params: ModelParams, ds: Dataset, cfg: TrainConfig,
                  log_path=None, checkpoint_dir=None):
    """Continue training with the partial matching loss on corrected images."""
    params = params.copy()
    return _run_loop(ds, cfg, params, use_corrections=True,
                     log_path=log_path, checkpoint_dir=checkpoint_dir)


def _input_channels(ds: Dataset, cfg: TrainConfig) -> int:
    pyr = encode_features(ds.exemplar.image)
    return sum(pyr.channels) + (2 if cfg.append_coords else 0)
