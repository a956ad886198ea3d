"""The four differentiable contour losses.

All losses take the predicted contour as a diffcore Value of shape (N, 2) and
return a scalar Value; everything else (pyramids, exemplar contour, gradient
maps, correction assignments) is constant with respect to differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .errors import PyramidMismatch, SingularL, VertexCountMismatch
from .geometry import Contour
from .imaging import FeaturePyramid, bilinear_sample_many

MAX_L_CONDITION = 1e12


def _check_n(c_value: dc.Value, n: int):
    if c_value.data.shape != (n, 2):
        raise VertexCountMismatch(
            f"contour value has shape {c_value.data.shape}, expected ({n}, 2)")


def contour_perceptual_loss(c: dc.Value, pyr: FeaturePyramid,
                            pyr_e: FeaturePyramid, c_e: Contour,
                            metric: str = "l1") -> dc.Value:
    """Distance between pyramid features sampled at corresponding vertices.

    Vertex i of the prediction is compared with vertex i of the exemplar;
    level coordinates are the pixel coordinates divided by the level factor.
    The default metric is per-channel L1; "l2" is a comparison variant.
    """
    _check_n(c, c_e.n)
    if pyr.factors != pyr_e.factors or pyr.channels != pyr_e.channels:
        raise PyramidMismatch(
            f"pyramids differ: {pyr.factors}/{pyr.channels} vs "
            f"{pyr_e.factors}/{pyr_e.channels}")
    gathered = []
    reference = []
    for (factor, fmap), (_, fmap_e) in zip(pyr.levels, pyr_e.levels):
        gathered.append(dc.bilinear_gather(fmap, dc.mul(c, 1.0 / factor)))
        ref_vals, _ = bilinear_sample_many(fmap_e, c_e.vertices / factor)
        reference.append(ref_vals)
    diff = dc.concat(gathered, axis=1) - np.concatenate(reference, axis=1)
    if metric == "l1":
        return dc.l1_norm(diff)
    if metric == "l2":
        return dc.sum_(dc.sqrt(dc.sum_(dc.mul(diff, diff), axis=1)))
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class BendingPrecomputed:
    """Bending-energy matrix for a fixed source contour.

    H is the upper-left N x N block of the inverse of the thin-plate-spline
    system matrix built on the source vertices; its null space contains every
    affine function of the source coordinates.
    """

    source: Contour
    H: np.ndarray


def tps_system(points: np.ndarray) -> np.ndarray:
    """Assemble the (N+3) x (N+3) thin-plate-spline system matrix."""
    n = len(points)
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(d > 1e-12, d * d * np.log(d), 0.0)
    p = np.concatenate([np.ones((n, 1)), points], axis=1)
    top = np.concatenate([k, p], axis=1)
    bottom = np.concatenate([p.T, np.zeros((3, 3))], axis=1)
    return np.concatenate([top, bottom], axis=0)


def precompute_bending(c_e: Contour) -> BendingPrecomputed:
    n = c_e.n
    system = tps_system(c_e.vertices)
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > MAX_L_CONDITION:
        raise SingularL(f"TPS system condition estimate {cond:.3e}")
    h = np.linalg.inv(system)[:n, :n]
    return BendingPrecomputed(source=c_e, H=h)


def contour_bending_loss(c: dc.Value, pre: BendingPrecomputed) -> dc.Value:
    """Clamped quadratic bending energy of the warp from the source to c."""
    _check_n(c, pre.source.n)
    x = c[:, 0:1]
    y = c[:, 1:2]
    quad = dc.sum_(dc.mul(x, dc.matmul(dc.as_value(pre.H), x))) + \
        dc.sum_(dc.mul(y, dc.matmul(dc.as_value(pre.H), y)))
    return dc.clamp_min(dc.mul(quad, 1.0 / (8.0 * np.pi)), 0.0)


def edge_loss(c: dc.Value, gmap: np.ndarray) -> dc.Value:
    """Negative mean gradient magnitude sampled at the contour vertices."""
    return dc.mul(dc.mean(dc.bilinear_gather(gmap, c)), -1.0)


def partial_contour_matching_loss(c: dc.Value, assignment: dict) -> dc.Value:
    """Mean distance from matched predicted vertices to their corrected points.

    The assignment (predicted index -> corrected point) is computed outside
    and treated as constant; an empty assignment yields zero loss.
    """
    n = c.data.shape[0]
    if not assignment:
        return dc.Value(0.0, requires_grad=False)
    idx = np.array(sorted(assignment.keys()), dtype=int)
    targets = np.array([assignment[i] for i in idx], dtype=np.float64)
    diff = c[idx] - targets
    dists = dc.sqrt(dc.sum_(dc.mul(diff, diff), axis=1))
    return dc.mul(dc.sum_(dists), 1.0 / n)
