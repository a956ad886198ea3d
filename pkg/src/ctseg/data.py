"""Dataset I/O, synthetic shape families and exemplar selection.

The synthetic generator produces one bright shape per image on a mildly
textured background, with the analytic boundary as ground truth. It is the
desk-scale stand-in for real radiograph corpora.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (ImageContourMismatch, InvalidFamilySpec, MalformedJson,
                     MissingExemplar)
from .geometry import Contour, resample_uniform
from .imaging import ImageGrid, encode_features, load_pgm, save_pgm

FAMILIES = ("ellipse", "superellipse", "bean")


@dataclass(frozen=True)
class FamilySpec:
    family: str = "ellipse"
    height: int = 128
    width: int = 128
    n_vertices: int = 100
    radius: tuple = (28.0, 38.0)
    aspect: tuple = (0.75, 1.0)
    # modest orientation spread, like structures in consistently framed scans
    rotation: tuple = (-np.pi / 6, np.pi / 6)
    center_jitter: tuple = (-6.0, 6.0)
    exponent: tuple = (2.5, 4.0)        # superellipse only
    bend: tuple = (0.1, 0.25)           # bean only
    contrast: tuple = (0.4, 0.55)
    noise_sigma: tuple = (0.0, 0.02)
    texture_amp: float = 0.05
    edge_softness: float = 1.0

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidFamilySpec(f"unknown family {self.family!r}")
        for name in ("radius", "aspect", "rotation", "center_jitter",
                     "exponent", "bend", "contrast", "noise_sigma"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise InvalidFamilySpec(f"empty range for {name}: ({lo}, {hi})")


@dataclass(frozen=True)
class DatasetItem:
    image_id: str
    image: ImageGrid
    contour: Contour | None = None
    corrections: "object | None" = None  # hitl.CorrectionSet


@dataclass(frozen=True)
class Dataset:
    items: tuple
    exemplar_id: str
    n_vertices: int

    def __post_init__(self):
        ids = [it.image_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise MalformedJson("duplicate image ids")

    def __len__(self):
        return len(self.items)

    def get(self, image_id: str) -> DatasetItem:
        for it in self.items:
            if it.image_id == image_id:
                return it
        raise KeyError(image_id)

    @property
    def exemplar(self) -> DatasetItem:
        return self.get(self.exemplar_id)

    def with_item(self, item: DatasetItem) -> "Dataset":
        items = tuple(item if it.image_id == item.image_id else it
                      for it in self.items)
        return replace(self, items=items)


def _boundary_points(spec: FamilySpec, rng: np.random.Generator, dense: int = 512):
    t = np.linspace(0.0, 2 * np.pi, dense, endpoint=False)
    r = rng.uniform(*spec.radius)
    a, b = r, r * rng.uniform(*spec.aspect)
    theta = rng.uniform(*spec.rotation)
    cx = spec.width / 2.0 + rng.uniform(*spec.center_jitter)
    cy = spec.height / 2.0 + rng.uniform(*spec.center_jitter)
    if spec.family == "ellipse":
        x, y = a * np.cos(t), b * np.sin(t)
    elif spec.family == "superellipse":
        m = rng.uniform(*spec.exponent)
        x = a * np.sign(np.cos(t)) * np.abs(np.cos(t)) ** (2.0 / m)
        y = b * np.sign(np.sin(t)) * np.abs(np.sin(t)) ** (2.0 / m)
    else:  # bean: ellipse bent along its minor axis
        k = rng.uniform(*spec.bend)
        x = a * np.cos(t)
        y = b * np.sin(t) + k * a * np.cos(t) ** 2
    ct, st = np.cos(theta), np.sin(theta)
    px = cx + ct * x - st * y
    py = cy + st * x + ct * y
    return np.stack([px, py], axis=1)


def _render(spec: FamilySpec, contour: Contour, rng: np.random.Generator) -> ImageGrid:
    from .geometry import rasterize

    mask = rasterize(contour, spec.height, spec.width).astype(np.float64)
    if spec.edge_softness > 0:
        mask = ndimage.gaussian_filter(mask, spec.edge_softness, mode="nearest")
    bg = 0.25
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    fy = rng.uniform(0.02, 0.08, size=2)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    texture = spec.texture_amp * (np.sin(2 * np.pi * fy[0] * xx + phase[0])
                                  * np.sin(2 * np.pi * fy[1] * yy + phase[1]))
    contrast = rng.uniform(*spec.contrast)
    img = bg * (1.0 + texture) + contrast * mask
    sigma = rng.uniform(*spec.noise_sigma)
    if sigma > 0:
        img = img + rng.normal(0.0, sigma, size=img.shape)
    return ImageGrid(np.clip(img, 0.0, 1.0))


def generate_synthetic(spec: FamilySpec, count: int, seed: int) -> Dataset:
    """Deterministic synthetic dataset; item i uses the substream (seed, i)."""
    spec.validate()
    if count < 2:
        raise InvalidFamilySpec("count must be >= 2")
    items = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        contour = resample_uniform(_boundary_points(spec, rng), spec.n_vertices)
        img = _render(spec, contour, rng)
        items.append(DatasetItem(image_id=f"img{i:04d}", image=img, contour=contour))
    return Dataset(items=tuple(items), exemplar_id=items[0].image_id,
                   n_vertices=spec.n_vertices)


def select_exemplar(ds: Dataset) -> str:
    """Id whose feature pyramid has minimum mean L2 distance to all others."""
    if len(ds) == 1:
        return ds.items[0].image_id
    feats = [encode_features(it.image).flat() for it in ds.items]
    n = len(feats)
    scored = []
    for i in range(n):
        dists = [np.linalg.norm(feats[i] - feats[j]) for j in range(n) if j != i]
        scored.append((float(np.mean(dists)), ds.items[i].image_id))
    return min(scored)[1]


# --- directory I/O --------------------------------------------------------

def save_dataset(ds: Dataset, root) -> None:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "contours").mkdir(exist_ok=True)
    (root / "corrections").mkdir(exist_ok=True)
    for it in ds.items:
        save_pgm(it.image, root / "images" / f"{it.image_id}.pgm")
        if it.contour is not None:
            it.contour.save(root / "contours" / f"{it.image_id}.json")
        if it.corrections is not None:
            with open(root / "corrections" / f"{it.image_id}.json", "w",
                      encoding="utf-8") as f:
                json.dump(it.corrections.to_json(), f)
    with open(root / "manifest.json", "w", encoding="utf-8") as f:
        json.dump({"exemplar": ds.exemplar_id, "n_vertices": ds.n_vertices}, f)


def save_contours(contours: dict, out_dir) -> None:
    """Write {image_id: Contour} as contour JSON files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image_id, contour in contours.items():
        contour.save(out_dir / f"{image_id}.json")


def load_dataset(root) -> Dataset:
    from .hitl import CorrectionSet

    root = Path(root)
    manifest_path = root / "manifest.json"
    try:
        with open(manifest_path, encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise MissingExemplar(f"{manifest_path} not found") from None
    except json.JSONDecodeError as e:
        raise MalformedJson(f"{manifest_path}: {e}") from None
    if "exemplar" not in manifest:
        raise MissingExemplar(f"{manifest_path} has no 'exemplar' field")
    n_vertices = int(manifest.get("n_vertices", 100))
    items = []
    for img_path in sorted((root / "images").glob("*.pgm")):
        stem = img_path.stem
        img = load_pgm(img_path)
        contour = None
        cpath = root / "contours" / f"{stem}.json"
        if cpath.exists():
            try:
                contour = Contour.load(cpath)
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise MalformedJson(f"{cpath}: {e}") from None
            v = contour.vertices
            if (v[:, 0].min() < 0 or v[:, 1].min() < 0
                    or v[:, 0].max() > img.width - 1 or v[:, 1].max() > img.height - 1):
                raise ImageContourMismatch(f"{stem}: contour outside image bounds")
        corrections = None
        xpath = root / "corrections" / f"{stem}.json"
        if xpath.exists():
            try:
                with open(xpath, encoding="utf-8") as f:
                    corrections = CorrectionSet.from_json(json.load(f))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise MalformedJson(f"{xpath}: {e}") from None
        items.append(DatasetItem(image_id=stem, image=img, contour=contour,
                                 corrections=corrections))
    exemplar_id = manifest["exemplar"]
    if not any(it.image_id == exemplar_id for it in items):
        raise MissingExemplar(f"exemplar {exemplar_id!r} has no image file")
    return Dataset(items=tuple(items), exemplar_id=exemplar_id,
                   n_vertices=n_vertices)
