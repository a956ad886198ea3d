"""Image container, bilinear sampling, gradient maps and the feature encoder.

The encoder is a fixed multi-scale Gaussian-derivative filter bank standing in
for a pretrained CNN backbone: deterministic, training-free, and reproducible
from source. Feature pyramids have levels at downsample factors {1, 2, 4, 8}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall

PYRAMID_FACTORS = (1, 2, 4, 8)


@dataclass(frozen=True)
class ImageGrid:
    """Row-major scalar image with intensities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 8 or v.shape[1] < 8:
            raise ValueError(f"image must be 2-D and at least 8x8, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeaturePyramid:
    """Multi-scale feature maps: list of (factor, array of shape (H', W', C))."""

    levels: tuple

    @property
    def factors(self) -> tuple:
        return tuple(f for f, _ in self.levels)

    @property
    def channels(self) -> tuple:
        return tuple(m.shape[2] for _, m in self.levels)

    def flat(self) -> np.ndarray:
        return np.concatenate([m.ravel() for _, m in self.levels])


def bilinear_sample(feature_map: np.ndarray, p) -> tuple[np.ndarray, np.ndarray]:
    """Sample a (H, W) or (H, W, C) map at continuous (x, y) with border clamp.

    Returns (value, jacobian) where jacobian has shape (..., 2) holding
    d(value)/dx and d(value)/dy. Coordinates clamped to the border have zero
    derivative in the clamped direction.
    """
    vals, jac = bilinear_sample_many(feature_map, np.asarray(p, dtype=np.float64)[None, :])
    return vals[0], jac[0]


def bilinear_sample_many(feature_map: np.ndarray, pts: np.ndarray):
    """Vectorized bilinear sampling at (M, 2) points.

    Returns (values (M, C), jacobian (M, C, 2)); for a 2-D map C == 1 is
    squeezed out of values but not the jacobian layout (values (M,), jac (M, 2)).
    """
    fmap = np.asarray(feature_map, dtype=np.float64)
    squeeze = fmap.ndim == 2
    if squeeze:
        fmap = fmap[:, :, None]
    h, w, c = fmap.shape
    x = np.clip(pts[:, 0], 0.0, w - 1.0)
    y = np.clip(pts[:, 1], 0.0, h - 1.0)
    in_x = (pts[:, 0] > 0.0) & (pts[:, 0] < w - 1.0)
    in_y = (pts[:, 1] > 0.0) & (pts[:, 1] < h - 1.0)
    x0 = np.minimum(np.floor(x), w - 2).astype(int) if w > 1 else np.zeros(len(x), int)
    y0 = np.minimum(np.floor(y), h - 2).astype(int) if h > 1 else np.zeros(len(y), int)
    fx = x - x0
    fy = y - y0
    f00 = fmap[y0, x0]
    f01 = fmap[y0, x0 + 1]
    f10 = fmap[y0 + 1, x0]
    f11 = fmap[y0 + 1, x0 + 1]
    fx_ = fx[:, None]
    fy_ = fy[:, None]
    vals = (f00 * (1 - fx_) * (1 - fy_) + f01 * fx_ * (1 - fy_)
            + f10 * (1 - fx_) * fy_ + f11 * fx_ * fy_)
    ddx = ((f01 - f00) * (1 - fy_) + (f11 - f10) * fy_) * in_x[:, None]
    ddy = ((f10 - f00) * (1 - fx_) + (f11 - f01) * fx_) * in_y[:, None]
    jac = np.stack([ddx, ddy], axis=-1)
    if squeeze:
        return vals[:, 0], jac[:, 0, :]
    return vals, jac


def gradient_magnitude_map(img: ImageGrid, sigma: float = 0.0) -> np.ndarray:
    """L2 norm of the image gradient after optional Gaussian smoothing.

    Central differences in the interior, one-sided at the borders.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    v = img.values
    if sigma > 0:
        v = ndimage.gaussian_filter(v, sigma, mode="nearest")
    gy, gx = np.gradient(v)
    return np.sqrt(gx * gx + gy * gy)


@dataclass(frozen=True)
class EncoderConfig:
    base_sigma: float = 1.0
    eps: float = 1e-8


def _filter_bank(level: np.ndarray, sigma: float) -> np.ndarray:
    """8 channels: smoothed value, 1st and 2nd Gaussian derivatives, and two
    center-surround responses. Periodic boundaries keep the bank exactly
    covariant with circular shifts."""
    g = ndimage.gaussian_filter(level, sigma, mode="wrap")
    gx = ndimage.gaussian_filter(level, sigma, order=(0, 1), mode="wrap")
    gy = ndimage.gaussian_filter(level, sigma, order=(1, 0), mode="wrap")
    gxx = ndimage.gaussian_filter(level, sigma, order=(0, 2), mode="wrap")
    gyy = ndimage.gaussian_filter(level, sigma, order=(2, 0), mode="wrap")
    gxy = ndimage.gaussian_filter(level, sigma, order=(1, 1), mode="wrap")
    dog1 = g - ndimage.gaussian_filter(level, 2 * sigma, mode="wrap")
    dog2 = g - ndimage.gaussian_filter(level, 4 * sigma, mode="wrap")
    return np.stack([g, gx, gy, gxx, gyy, gxy, dog1, dog2], axis=-1)


def encode_features(img: ImageGrid, config: EncoderConfig | None = None) -> FeaturePyramid:
    """Deterministic multi-scale filter-bank pyramid at factors {1, 2, 4, 8}.

    Each level is the Gaussian-downsampled image convolved with the fixed
    bank, then standardized per channel by that channel's global mean/std.
    """
    cfg = config or EncoderConfig()
    levels = []
    for f in PYRAMID_FACTORS:
        lh = -(-img.height // f)
        lw = -(-img.width // f)
        if lh < 4 or lw < 4:
            raise ImageTooSmall(f"level at factor {f} would be {lh}x{lw}")
        if f == 1:
            lv = img.values
        else:
            smoothed = ndimage.gaussian_filter(img.values, 0.5 * f, mode="wrap")
            lv = smoothed[::f, ::f]
        feats = _filter_bank(lv, cfg.base_sigma)
        mean = feats.reshape(-1, feats.shape[-1]).mean(axis=0)
        std = feats.reshape(-1, feats.shape[-1]).std(axis=0)
        feats = (feats - mean) / (std + cfg.eps)
        levels.append((f, feats))
    return FeaturePyramid(tuple(levels))


# --- PGM (P5) I/O ---------------------------------------------------------

def load_pgm(path) -> ImageGrid:
    """Read an 8-bit or 16-bit binary PGM, normalizing intensities to [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval; '#' comments allowed
    tokens = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(int(data[i:j]))
        i = j
    i += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval < 256:
        raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=width * height, offset=i)
    return ImageGrid(raw.reshape(height, width).astype(np.float64) / maxval)


def save_pgm(img: ImageGrid, path, maxval: int = 65535) -> None:
    if maxval < 256:
        payload = np.round(img.values * maxval).astype(np.uint8)
    else:
        payload = np.round(img.values * maxval).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n{maxval}\n".encode())
        f.write(payload.tobytes())
