"""Image decoding, resizing, contrast/noise preprocessing and augmentation.

Images are H x W x 3 numpy arrays. ``decode_image`` returns uint8; the
filters return float64 so that the pipeline quantises in exactly one place
(after resizing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from diacnn.datapipe.prng import XorShift64Star

SUPPORTED_FORMATS = ("PNG", "JPEG")


class ImageDecodeError(ValueError):
    pass


def decode_image(path) -> np.ndarray:
    """Read a PNG or JPEG file as an RGB uint8 array; grayscale is replicated to 3 channels."""
    try:
        with Image.open(path) as im:
            if im.format not in SUPPORTED_FORMATS:
                raise ImageDecodeError(f"{path}: unsupported format {im.format}")
            im.load()
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8).copy()
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: cannot decode ({exc})") from None
    return arr


def encode_png(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path, format="PNG")


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def _axis_weights(n_in: int, n_out: int):
    # pixel centres at (i + 0.5) / n on both grids
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres and edge clamping; returns float64."""
    if h < 1 or w < 1:
        raise ValueError("resize target must be at least 1x1")
    a = np.asarray(img, dtype=np.float64)
    if a.shape[:2] == (h, w):
        return a.copy()
    y0, y1, wy = _axis_weights(a.shape[0], h)
    x0, x1, wx = _axis_weights(a.shape[1], w)
    extra = (1,) * (a.ndim - 2)
    wy = wy.reshape((-1, 1) + extra)
    rows = a[y0] * (1 - wy) + a[y1] * wy
    wx = wx.reshape((1, -1) + extra)
    return rows[:, x0] * (1 - wx) + rows[:, x1] * wx


def quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def histogram_equalize(img: np.ndarray) -> np.ndarray:
    """Per-channel equalisation ``round((cdf(v) - cdf_min) / (N - cdf_min) * 255)``.

    A channel holding a single value is returned unchanged.
    """
    a = np.asarray(img)
    if a.dtype != np.uint8:
        a = quantize(a)
    chans = a[..., None] if a.ndim == 2 else a
    out = np.empty_like(chans)
    n = chans.shape[0] * chans.shape[1]
    for c in range(chans.shape[2]):
        ch = chans[..., c]
        cdf = np.cumsum(np.bincount(ch.ravel(), minlength=256))
        cdf_min = cdf[ch.min()]
        if cdf_min == n:
            out[..., c] = ch
            continue
        lut = np.rint((cdf - cdf_min) / (n - cdf_min) * 255.0)
        out[..., c] = np.clip(lut, 0, 255).astype(np.uint8)[ch]
    return out[..., 0] if a.ndim == 2 else out


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ceil(3 sigma), mirrored edges; sigma 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    a = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return a.copy()
    k = gaussian_kernel1d(sigma)
    r = len(k) // 2
    pad = [(r, r), (r, r)] + [(0, 0)] * (a.ndim - 2)
    p = np.pad(a, pad, mode="symmetric")
    h, w = a.shape[:2]
    tmp = sum(k[i] * p[i : i + h] for i in range(len(k)))
    return sum(k[i] * tmp[:, i : i + w] for i in range(len(k)))


def normalize01(img: np.ndarray) -> np.ndarray:
    return (np.asarray(img, dtype=np.float32) / np.float32(255.0)).astype(np.float32)


def _reflect(u: np.ndarray, n: int) -> np.ndarray:
    # mirror continuous coordinates into [-0.5, n - 0.5]
    period = 2 * n
    v = np.mod(u + 0.5, period)
    v = np.where(v >= n, period - v, v) - 0.5
    return np.clip(v, 0, n - 1)


def _bilinear_sample(a: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    ys = _reflect(ys, h)
    xs = _reflect(xs, w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[..., None]
    wx = (xs - x0)[..., None]
    top = a[y0, x0] * (1 - wx) + a[y0, x1] * wx
    bot = a[y1, x0] * (1 - wx) + a[y1, x1] * wx
    return top * (1 - wy) + bot * wy


def hflip(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(img)[:, ::-1])


@dataclass(frozen=True)
class AugmentConfig:
    rotate_deg_max: float = 15.0
    zoom_range: tuple[float, float] = (0.9, 1.1)
    hflip_prob: float = 0.5

    def __post_init__(self):
        lo, hi = self.zoom_range
        if not (0 < lo <= hi < 2):
            raise ValueError(f"zoom_range must lie inside (0, 2), got {self.zoom_range}")
        if not 0 <= self.rotate_deg_max <= 180:
            raise ValueError("rotate_deg_max must be in [0, 180]")
        if not 0 <= self.hflip_prob <= 1:
            raise ValueError("hflip_prob must be in [0, 1]")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(0.0, (1.0, 1.0), 0.0)


def augment(img: np.ndarray, rng: XorShift64Star, cfg: AugmentConfig) -> np.ndarray:
    """Random rotation, then zoom (both about the centre), then horizontal flip.

    Exactly three draws are taken from ``rng`` per call (angle, zoom, flip),
    whatever the configuration. Rotation and zoom are composed into a single
    bilinear resampling with mirrored borders.
    """
    angle = rng.uniform(-cfg.rotate_deg_max, cfg.rotate_deg_max)
    zoom = rng.uniform(*cfg.zoom_range)
    flip = rng.random() < cfg.hflip_prob
    a = np.asarray(img, dtype=np.float64)
    if angle != 0.0 or zoom != 1.0:
        h, w = a.shape[:2]
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
        dy, dx = (yy - cy) / zoom, (xx - cx) / zoom
        t = math.radians(angle)
        ct, st = math.cos(t), math.sin(t)
        # inverse rotation: output pixel looks up the source rotated by -angle
        sy = cy + ct * dy - st * dx
        sx = cx + st * dy + ct * dx
        squeeze = a.ndim == 2
        a3 = a[..., None] if squeeze else a
        a = _bilinear_sample(a3, sy, sx)
        if squeeze:
            a = a[..., 0]
    if flip:
        a = hflip(a)
    return a


@dataclass(frozen=True)
class PreprocessConfig:
    resize_hw: tuple[int, int] = (224, 224)
    equalize: bool = True
    blur_sigma: float = 1.0
    normalize01: bool = True
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def __post_init__(self):
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if min(self.resize_hw) < 1:
            raise ValueError("resize_hw must be positive")


def preprocess(img: np.ndarray, cfg: PreprocessConfig, rng: Optional[XorShift64Star] = None) -> np.ndarray:
    """decode output -> resize -> equalize -> blur -> augment (if ``rng``) -> normalize -> CHW float32."""
    a = quantize(resize(img, *cfg.resize_hw))
    if cfg.equalize:
        a = histogram_equalize(a)
    a = gaussian_blur(a, cfg.blur_sigma)
    if rng is not None:
        a = augment(a, rng, cfg.augment)
    a = normalize01(a) if cfg.normalize01 else a.astype(np.float32)
    return np.ascontiguousarray(a.transpose(2, 0, 1))
