"""Image preprocessing and seeded affine augmentation.

Images are float64 arrays of shape ``(height, width, channels)`` with
``channels`` 1 or 3. Augmentation composes rotation, shear, zoom and
translation into one affine map about the image centre and resamples once,
bilinearly, with mirrored borders.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DomainError

TARGET_SIZE = (224, 224)


def as_image(arr) -> np.ndarray:
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DomainError(f"expected an HxW, HxWx1 or HxWx3 image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DomainError("image has a zero dimension")
    return img


def normalize(raw) -> np.ndarray:
    """Map 8-bit intensities in [0, 255] to [0, 1]."""
    img = as_image(raw)
    if np.isnan(img).any() or img.min() < 0 or img.max() > 255:
        raise DomainError("raw pixels must lie in [0, 255]")
    return img / 255.0


def to_uint8(img) -> np.ndarray:
    """Inverse of :func:`normalize`, rounding half up."""
    img = as_image(img)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _resize_axis(n_in, n_out):
    # pixel-centre alignment: src = (dst + 0.5) * scale - 0.5
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(img, out_h: int, out_w: int) -> np.ndarray:
    img = as_image(img)
    if int(out_h) < 1 or int(out_w) < 1:
        raise DomainError(f"output size must be positive, got {out_h}x{out_w}")
    y0, y1, fy = _resize_axis(img.shape[0], int(out_h))
    x0, x1, fx = _resize_axis(img.shape[1], int(out_w))
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def preprocess(raw, size=TARGET_SIZE) -> np.ndarray:
    """Normalise 8-bit pixels then resize (224x224 by default)."""
    return resize_bilinear(normalize(raw), *size)


@dataclass(frozen=True)
class AugmentConfig:
    rotation_deg: float = 5.0
    shift_frac: float = 0.05
    shear: float = 0.05
    zoom_frac: float = 0.05
    brightness: tuple[float, float] = (0.9, 1.1)
    fill: str = "reflect"

    def __post_init__(self):
        for name in ("rotation_deg", "shift_frac", "shear", "zoom_frac"):
            v = float(getattr(self, name))
            if not v >= 0:
                raise DomainError(f"{name} must be nonnegative")
            object.__setattr__(self, name, v)
        if self.zoom_frac >= 1:
            raise DomainError("zoom_frac must be below 1")
        lo, hi = (float(b) for b in self.brightness)
        if not 0 < lo <= hi:
            raise DomainError(f"brightness interval must be positive and ordered, got {self.brightness}")
        object.__setattr__(self, "brightness", (lo, hi))
        if self.fill != "reflect":
            raise DomainError(f"unsupported fill mode {self.fill!r}")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(0.0, 0.0, 0.0, 0.0, (1.0, 1.0))

    @classmethod
    def from_dict(cls, d) -> "AugmentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown augmentation settings: {sorted(unknown)}")
        d = dict(d)
        if "brightness" in d:
            d["brightness"] = tuple(d["brightness"])
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["brightness"] = list(self.brightness)
        return d


@dataclass(frozen=True)
class AugmentParams:
    angle_deg: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    shear: float = 0.0
    zoom: float = 1.0
    brightness: float = 1.0


def sample_params(cfg: AugmentConfig, rng: np.random.Generator, shape) -> AugmentParams:
    """One random draw per augmentation, in a fixed order.

    ``shape`` is the image shape; shifts scale with its height and width.
    """
    h, w = shape[0], shape[1]
    r, s, c, z = cfg.rotation_deg, cfg.shift_frac, cfg.shear, cfg.zoom_frac
    lo, hi = cfg.brightness
    return AugmentParams(
        angle_deg=float(rng.uniform(-r, r)),
        dx=float(rng.uniform(-s * w, s * w)),
        dy=float(rng.uniform(-s * h, s * h)),
        shear=float(rng.uniform(-c, c)),
        zoom=float(rng.uniform(1 - z, 1 + z)),
        brightness=float(rng.uniform(lo, hi)),
    )


def affine_matrix(p: AugmentParams) -> np.ndarray:
    """2x2 linear part of the forward warp, acting on (x, y) = (col, row).

    Rotation first, then x-shear by ``p.shear`` degrees, then isotropic zoom.
    """
    a = math.radians(p.angle_deg)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    shear = np.array([[1.0, math.tan(math.radians(p.shear))], [0.0, 1.0]])
    return p.zoom * (shear @ rot)


def reflect_index(idx, n: int):
    """Edge-inclusive mirror: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ..."""
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def apply_augment(img, p: AugmentParams) -> np.ndarray:
    img = as_image(img)
    if np.isnan(img).any() or img.min() < 0 or img.max() > 1:
        raise DomainError("apply_augment expects a normalised image in [0, 1]")
    h, w = img.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    inv = np.linalg.inv(affine_matrix(p))

    # inverse map: src = A^-1 (dst - centre - shift) + centre
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = xs - cx - p.dx
    v = ys - cy - p.dy
    sx = inv[0, 0] * u + inv[0, 1] * v + cx
    sy = inv[1, 0] * u + inv[1, 1] * v + cy

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    xa, xb = reflect_index(x0, w), reflect_index(x0 + 1, w)
    ya, yb = reflect_index(y0, h), reflect_index(y0 + 1, h)

    out = (
        img[ya, xa] * ((1 - fx) * (1 - fy))
        + img[ya, xb] * (fx * (1 - fy))
        + img[yb, xa] * ((1 - fx) * fy)
        + img[yb, xb] * (fx * fy)
    )
    return np.clip(out * p.brightness, 0.0, 1.0)


def image_streams(seed: int, n_images: int) -> list[np.random.SeedSequence]:
    """Independent per-image seed sequences."""
    return np.random.SeedSequence(seed).spawn(n_images)


def _generator(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(ss))


def augment_batch(images, cfg: AugmentConfig, seed: int, count_per_image: int) -> list[np.ndarray]:
    """``count_per_image`` augmented variants of each image, image-major order.

    Each image draws from its own Philox substream of ``seed``, so the
    variants of image ``i`` do not depend on how many other images there are
    or on processing order.
    """
    if count_per_image < 0:
        raise DomainError("count_per_image must be nonnegative")
    images = [as_image(im) for im in images]
    out = []
    for img, ss in zip(images, image_streams(seed, len(images))):
        rng = _generator(ss)
        for _ in range(count_per_image):
            out.append(apply_augment(img, sample_params(cfg, rng, img.shape)))
    return out
