"""Partial-correction data model, correspondence, and the simulated annotator.

Corrections are open polylines redrawing only the wrong stretches of a
predicted contour. Correspondence pins each predicted vertex on the arc
between the segment's endpoint matches to its nearest corrected point; the
resulting assignment feeds the partial contour matching loss.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedJson, MissingGroundTruth
from .geometry import Contour, hausdorff


@dataclass(frozen=True)
class CorrectionSet:
    """Ordered partial-contour segments drawn for one image."""

    image_id: str
    segments: tuple  # of (M_i, 2) float arrays, M_i >= 2

    def __post_init__(self):
        segs = []
        for seg in self.segments:
            arr = np.asarray(seg, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 1:
                raise MalformedJson(f"segment must be (M, 2), got {arr.shape}")
            if len(np.unique(arr, axis=0)) < 2 and len(arr) >= 2:
                raise MalformedJson("segment points all coincide")
            segs.append(arr)
        object.__setattr__(self, "segments", tuple(segs))

    def __len__(self):
        return len(self.segments)

    def to_json(self) -> dict:
        return {"image_id": self.image_id,
                "segments": [[[float(x), float(y)] for x, y in seg]
                             for seg in self.segments]}

    @classmethod
    def from_json(cls, obj: dict) -> "CorrectionSet":
        if not isinstance(obj, dict) or "image_id" not in obj or "segments" not in obj:
            raise MalformedJson("correction JSON needs image_id and segments")
        segments = obj["segments"]
        if any(len(seg) < 2 for seg in segments):
            raise MalformedJson("every segment needs at least 2 points")
        return cls(image_id=str(obj["image_id"]),
                   segments=tuple(np.asarray(s, dtype=np.float64) for s in segments))


def canonical_correction_json(obj: dict) -> str:
    """The single serialized form shared with the annotator UI."""
    return json.dumps(CorrectionSet.from_json(obj).to_json(),
                      sort_keys=True, separators=(",", ":"))


def _arc_indices(a: int, b: int, n: int) -> list:
    """Indices from a to b walking forward around the ring (inclusive)."""
    if a <= b:
        return list(range(a, b + 1))
    return list(range(a, n)) + list(range(0, b + 1))


def correspond_segments(c: Contour, corrections: CorrectionSet) -> dict:
    """Map predicted vertex index -> corrected point, per the endpoint-arc rule.

    For each segment: match its start and end to the nearest predicted
    vertices a and b; of the two ring arcs between a and b, keep the one whose
    vertices lie closer (mean distance) to the segment, shorter arc on ties;
    assign each arc vertex to its nearest segment point. Earlier segments win
    on overlap.
    """
    pred = c.vertices
    n = len(pred)
    assignment: dict = {}
    for seg in corrections.segments:
        d_start = np.linalg.norm(pred - seg[0], axis=1)
        d_end = np.linalg.norm(pred - seg[-1], axis=1)
        a = int(d_start.argmin())
        b = int(d_end.argmin())
        if a == b:
            candidates = [[a]]
        else:
            candidates = [_arc_indices(a, b, n), _arc_indices(b, a, n)]
        best = None
        for arc in candidates:
            d = np.linalg.norm(pred[arc][:, None, :] - seg[None, :, :], axis=2)
            key = (float(d.min(axis=1).mean()), len(arc))
            if best is None or key < best[0]:
                best = (key, arc, d)
        _, arc, d = best
        nearest = d.argmin(axis=1)
        for idx, j in zip(arc, nearest):
            if idx not in assignment:
                assignment[idx] = seg[j].copy()
    return assignment


def simulate_corrections(pred: Contour, gt: Contour,
                         threshold: float = 3.0) -> CorrectionSet:
    """Ground-truth segments for maximal cyclic runs of vertices displaced by
    strictly more than threshold pixels."""
    if pred.n != gt.n:
        raise ValueError("pred and gt must share vertex count and correspondence")
    n = pred.n
    err = np.linalg.norm(pred.vertices - gt.vertices, axis=1) > threshold
    if not err.any():
        return CorrectionSet(image_id="", segments=())
    if err.all():
        return CorrectionSet(image_id="", segments=(gt.vertices.copy(),))
    # start scanning just after a non-error vertex so cyclic runs stay whole
    start = int(np.argmin(err))
    order = [(start + k) % n for k in range(n)]
    segments, run = [], []
    for i in order:
        if err[i]:
            run.append(i)
        elif run:
            segments.append(gt.vertices[run].copy())
            run = []
    if run:
        segments.append(gt.vertices[run].copy())
    return CorrectionSet(image_id="", segments=tuple(segments))


def select_worst(ds, predictions: dict, fraction: float) -> list:
    """Ids of the ceil(fraction * count) images with largest Hausdorff error.

    predictions maps image_id -> predicted Contour; every ranked item must
    carry ground truth. fraction is in [0, 1]; ties rank by id.
    """
    scored = []
    for it in ds.items:
        if it.image_id not in predictions:
            continue
        if it.contour is None:
            raise MissingGroundTruth(f"{it.image_id} has no ground truth")
        scored.append((-hausdorff(predictions[it.image_id], it.contour),
                       it.image_id))
    scored.sort()
    k = math.ceil(fraction * len(scored))
    return [image_id for _, image_id in scored[:k]]
