"""Metrics aggregation and the desk-scale experiment suites.

Suites assert the directional findings (ablation degradation, perturbation
robustness, exemplar choice, block-count sweep) rather than corpus-specific
absolute numbers.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import diffcore as dc
from . import losses
from .data import Dataset, DatasetItem
from .errors import MissingGroundTruth
from .geometry import Contour, hausdorff, polygon_iou
from .imaging import ImageGrid, encode_features, gradient_magnitude_map
from .model import ModelParams, predict_contour
from .training import TrainConfig, train_one_shot


@dataclass(frozen=True)
class EvalReport:
    rows: tuple          # of (image_id, iou, hd)
    config: dict

    @property
    def mean_iou(self) -> float:
        return float(np.mean([r[1] for r in self.rows]))

    @property
    def std_iou(self) -> float:
        return float(np.std([r[1] for r in self.rows]))

    @property
    def mean_hd(self) -> float:
        return float(np.mean([r[2] for r in self.rows]))

    @property
    def std_hd(self) -> float:
        return float(np.std([r[2] for r in self.rows]))

    def to_json(self) -> dict:
        return {"mean_iou": self.mean_iou, "std_iou": self.std_iou,
                "mean_hd": self.mean_hd, "std_hd": self.std_hd,
                "count": len(self.rows), "config": self.config}

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "per_image.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["image_id", "iou", "hd"])
            for row in self.rows:
                writer.writerow(list(row))
        with open(out_dir / "aggregate.json", "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2)


def predict_all(params: ModelParams, ds: Dataset) -> dict:
    exemplar = ds.exemplar.contour
    out = {}
    for it in ds.items:
        pyr = encode_features(it.image)
        out[it.image_id] = predict_contour(params, it.image, pyr, exemplar)
    return out


def evaluate(params: ModelParams, ds: Dataset, config: dict | None = None,
             predictions: dict | None = None) -> EvalReport:
    """Forward every item with ground truth and score IoU / Hausdorff."""
    predictions = predictions or predict_all(params, ds)
    rows = []
    for it in ds.items:
        if it.contour is None:
            raise MissingGroundTruth(f"{it.image_id} has no ground truth")
        pred = predictions[it.image_id]
        rows.append((it.image_id,
                     polygon_iou(pred, it.contour, (it.image.height, it.image.width)),
                     hausdorff(pred, it.contour)))
    return EvalReport(rows=tuple(rows), config=dict(config or {}))


def acm_baseline(img: ImageGrid, init: Contour, steps: int = 200,
                 step_size: float = 0.5, bend_weight: float = 0.05,
                 edge_weight: float = 1.0, gradient_sigma: float = 2.0) -> Contour:
    """Per-image snake: gradient descent on edge + bending energy over the
    vertex coordinates directly, no learning."""
    gmap = gradient_magnitude_map(img, gradient_sigma)
    bending = losses.precompute_bending(init)
    verts = init.vertices.copy()
    for _ in range(steps):
        c = dc.Value(verts)
        loss = edge_weight * losses.edge_loss(c, gmap) \
            + bend_weight * losses.contour_bending_loss(c, bending)
        loss.backward()
        verts = verts - step_size * c.grad_or_zero()
    return Contour(verts)


def _split(ds: Dataset, test_ds: Dataset):
    return ds, test_ds


def run_ablation(train_ds: Dataset, test_ds: Dataset, cfg: TrainConfig) -> dict:
    """Full model plus one training run per individually-zeroed loss weight."""
    table = {}
    for label, zeroed in (("full", None), ("no_perc", "lambda1"),
                          ("no_bend", "lambda2"), ("no_edge", "lambda3")):
        run_cfg = replace(cfg, **{zeroed: 0.0}) if zeroed else cfg
        params, _ = train_one_shot(train_ds, run_cfg)
        table[label] = evaluate(params, test_ds,
                                config={"ablation": label, "seed": cfg.seed})
    return table


def _rotate_item(it: DatasetItem, dx: float, dy: float, dtheta_deg: float) -> DatasetItem:
    """Shift and rotate the image about its center (bilinear, border clamp);
    ground truth moves with it."""
    img = it.image
    theta = np.radians(dtheta_deg)
    cy, cx = (img.height - 1) / 2.0, (img.width - 1) / 2.0
    ct, st = np.cos(theta), np.sin(theta)
    yy, xx = np.mgrid[0:img.height, 0:img.width].astype(np.float64)
    # inverse map: output pixel -> source pixel
    xs = ct * (xx - cx - dx) + st * (yy - cy - dy) + cx
    ys = -st * (xx - cx - dx) + ct * (yy - cy - dy) + cy
    warped = ndimage.map_coordinates(img.values, [ys, xs], order=1, mode="nearest")
    vx, vy = it.contour.vertices[:, 0], it.contour.vertices[:, 1]
    nx = ct * (vx - cx) - st * (vy - cy) + cx + dx
    ny = st * (vx - cx) + ct * (vy - cy) + cy + dy
    contour = Contour(np.stack([nx, ny], axis=1))
    return replace(it, image=ImageGrid(warped), contour=contour)


def run_perturbation(ds: Dataset, params: ModelParams, dx: float, dy: float,
                     dtheta_deg: float, seed: int = 0) -> EvalReport:
    """Evaluate on per-image random ROI offsets within the given bounds."""
    rng = np.random.default_rng(seed)
    items = []
    for it in ds.items:
        items.append(_rotate_item(it, rng.uniform(-dx, dx), rng.uniform(-dy, dy),
                                  rng.uniform(-dtheta_deg, dtheta_deg)))
    perturbed = replace(ds, items=tuple(items))
    return evaluate(params, perturbed,
                    config={"dx": dx, "dy": dy, "dtheta": dtheta_deg, "seed": seed})


def run_sweeps(train_ds: Dataset, test_ds: Dataset, cfg: TrainConfig,
               axis: str, values) -> dict:
    """Retrain per value of one axis (lambda1|lambda2|lambda3|blocks|exemplar)."""
    table = {}
    for v in values:
        if axis in ("lambda1", "lambda2", "lambda3"):
            run_cfg = replace(cfg, **{axis: float(v)})
            run_ds = train_ds
        elif axis == "blocks":
            run_cfg = replace(cfg, gcn_blocks=int(v))
            run_ds = train_ds
        elif axis == "exemplar":
            run_cfg = cfg
            run_ds = replace(train_ds, exemplar_id=str(v))
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
        params, _ = train_one_shot(run_ds, run_cfg)
        table[str(v)] = evaluate(params, test_ds,
                                 config={"axis": axis, "value": str(v),
                                         "seed": cfg.seed})
    return table


def write_suite(table: dict, suite: str, out_root) -> Path:
    out_dir = Path(out_root) / suite / time.strftime("%Y%m%d-%H%M%S")
    for label, report in table.items():
        report.write(out_dir / label)
    return out_dir
