"""Closed-contour representation, resampling, rasterization and metrics.

Contours are closed polylines of ordered (x, y) vertices in pixel units,
normalized to counter-clockwise orientation. All functions here are pure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateContour

_MIN_SPACING = 1e-9


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateContour(f"expected (N, 2) point array, got shape {pts.shape}")
    return pts


def signed_area(points: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise order."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Contour:
    """Closed polyline of N ordered vertices, always CCW after construction."""

    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = _as_points(self.vertices)
        if len(pts) < 3:
            raise DegenerateContour("contour needs at least 3 vertices")
        spacing = np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1)
        if np.any(spacing <= _MIN_SPACING):
            raise DegenerateContour("consecutive vertices coincide")
        if signed_area(pts) < 0:
            # reverse but keep the first vertex first, so resampling anchors survive
            pts = np.concatenate([pts[:1], pts[1:][::-1]])
        object.__setattr__(self, "vertices", pts)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def perimeter(self) -> float:
        d = self.vertices - np.roll(self.vertices, -1, axis=0)
        return float(np.linalg.norm(d, axis=1).sum())

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def translated(self, offset) -> "Contour":
        return Contour(self.vertices + np.asarray(offset, dtype=np.float64))

    def to_json(self) -> dict:
        return {"vertices": [[float(x), float(y)] for x, y in self.vertices],
                "closed": True}

    @classmethod
    def from_json(cls, obj: dict) -> "Contour":
        return cls(np.asarray(obj["vertices"], dtype=np.float64))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path) -> "Contour":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def _arc_resample(pts: np.ndarray, n: int) -> np.ndarray:
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    perimeter = seg.sum()
    if perimeter <= _MIN_SPACING:
        raise DegenerateContour("zero perimeter")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(n) * (perimeter / n)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(pts) - 1)
    local = (targets - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    nxt = (idx + 1) % len(pts)
    return pts[idx] + local[:, None] * (pts[nxt] - pts[idx])


def resample_uniform(polyline, n: int) -> Contour:
    """Resample a closed polyline to n vertices at equal arc-length intervals.

    The first output vertex coincides with the first input vertex; orientation
    is normalized CCW by the Contour constructor. A short fixed-point pass
    equalizes the output chord lengths so resampling is idempotent at fixed n.
    """
    pts = _as_points(polyline)
    if n < 3:
        raise DegenerateContour("n must be >= 3")
    # drop consecutive duplicates (closing duplicate included)
    keep = np.linalg.norm(pts - np.roll(pts, 1, axis=0), axis=1) > _MIN_SPACING
    if keep.sum() < 3:
        raise DegenerateContour("fewer than 3 distinct points")
    pts = pts[keep]
    out = _arc_resample(pts, n)
    for _ in range(25):
        nxt = _arc_resample(out, n)
        moved = np.abs(nxt - out).max()
        out = nxt
        if moved < 1e-9:
            break
    return Contour(out)


def rasterize(contour: Contour, height: int, width: int) -> np.ndarray:
    """Boolean mask via pixel-center even-odd point-in-polygon.

    Pixels whose center lies exactly on the boundary count as inside.
    """
    pts = contour.vertices
    x0 = max(int(np.floor(pts[:, 0].min())), 0)
    x1 = min(int(np.ceil(pts[:, 0].max())), width - 1)
    y0 = max(int(np.floor(pts[:, 1].min())), 0)
    y1 = min(int(np.ceil(pts[:, 1].max())), height - 1)
    mask = np.zeros((height, width), dtype=bool)
    if x1 < x0 or y1 < y0:
        return mask
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    px, py = np.meshgrid(xs, ys)  # (H', W')
    px = px[:, :, None]
    py = py[:, :, None]
    ax, ay = pts[:, 0], pts[:, 1]
    bx, by = np.roll(pts[:, 0], -1), np.roll(pts[:, 1], -1)
    # even-odd crossing with the half-open rule on the y-range
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = (cond & (px < np.where(cond, xint, np.inf))).sum(axis=2) % 2 == 1
    # boundary ties: pixel center on any edge counts as inside
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg_len2, 0.0, 1.0)
    dist2 = (ax + t * dx - px) ** 2 + (ay + t * dy - py) ** 2
    on_edge = (dist2 <= 1e-18).any(axis=2)
    mask[y0:y1 + 1, x0:x1 + 1] = inside | on_edge
    return mask


def polygon_iou(a: Contour, b: Contour, grid: tuple[int, int]) -> float:
    """Rasterized intersection-over-union on a (height, width) grid."""
    h, w = grid
    ma = rasterize(a, h, w)
    mb = rasterize(b, h, w)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 0.0
    return np.count_nonzero(ma & mb) / union


def hausdorff(a: Contour, b: Contour) -> float:
    """Symmetric Hausdorff distance between the two vertex sets."""
    pa, pb = a.vertices, b.vertices
    d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
