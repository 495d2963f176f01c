"""Raster types and pixel-level primitives.

Images are stored as 8-bit RGB arrays; augmentation pipelines work on a
floating [0, 1] representation and quantize exactly once at the end, so
composed effects do not accumulate rounding error. Depth maps hold relative
depth in [0, 1] with 0 at the camera; segmentation maps carry per-pixel
class ids plus a role table mapping semantic roles (sky, road, dynamic
objects) onto those ids.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    ChannelError,
    DecodeError,
    DimensionMismatchError,
    InvalidDataError,
    IoError,
)

# Default class-role table for the 19-class Cityscapes/BDD train-id palette.
DEFAULT_CLASS_ROLES: dict[str, tuple[int, ...]] = {
    "road": (0,),
    "sky": (10,),
    "dynamic": (11, 12, 13, 14, 15, 16, 17, 18),
}

# ITU-R BT.601 luma coefficients.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _round_u8(values: np.ndarray) -> np.ndarray:
    """Quantize float pixel values to uint8, rounding halves away from zero."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class ImageRgb:
    """8-bit RGB raster, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InvalidDataError(f"expected (h, w, 3) pixel array, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidDataError("image must be at least 1x1")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_float(self) -> np.ndarray:
        """Working representation in [0, 1], float64."""
        return self.pixels.astype(np.float64) / 255.0

    @classmethod
    def from_float(cls, values: np.ndarray) -> "ImageRgb":
        """Quantize a [0, 1] float raster back to 8 bits (single rounding)."""
        return cls(_round_u8(np.asarray(values, dtype=np.float64) * 255.0))


@dataclass(frozen=True)
class DepthMap:
    """Relative scene depth in [0, 1]; 0 = at camera, 1 = farthest.

    ``max_range_m`` maps relative depth to metric depth for physically
    parameterized effects (fog extinction is specified per meter).
    """

    depth: np.ndarray
    max_range_m: float = 200.0

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise InvalidDataError(f"expected (h, w) depth array, got {d.shape}")
        if not np.isfinite(d).all() or d.min() < 0.0 or d.max() > 1.0:
            raise InvalidDataError("depth values must be finite and within [0, 1]")
        object.__setattr__(self, "depth", d)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    def metric(self) -> np.ndarray:
        """Per-pixel depth in meters."""
        return self.depth * self.max_range_m


@dataclass(frozen=True)
class SegMap:
    """Per-pixel class ids plus a role table (role -> class ids)."""

    class_ids: np.ndarray
    class_roles: dict[str, tuple[int, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_ROLES)
    )

    def __post_init__(self):
        ids = np.asarray(self.class_ids)
        if ids.ndim != 2:
            raise InvalidDataError(f"expected (h, w) class-id array, got {ids.shape}")
        if ids.dtype.kind not in "ui":
            raise InvalidDataError("class ids must be unsigned integers")
        object.__setattr__(self, "class_ids", ids)
        object.__setattr__(
            self,
            "class_roles",
            {role: tuple(cids) for role, cids in self.class_roles.items()},
        )

    @property
    def width(self) -> int:
        return self.class_ids.shape[1]

    @property
    def height(self) -> int:
        return self.class_ids.shape[0]

    def has_role(self, role: str) -> bool:
        return role in self.class_roles

    def role_mask(self, role: str) -> np.ndarray:
        """Boolean mask of pixels whose class id belongs to ``role``."""
        ids = self.class_roles.get(role, ())
        return np.isin(self.class_ids, np.asarray(ids))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, exclusive lower-right corner."""

    x1: float
    y1: float
    x2: float
    y2: float
    category: str = ""

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidDataError(f"degenerate box {self}")

    def corners(self) -> np.ndarray:
        """Corner coordinates, order: tl, tr, br, bl."""
        return np.array(
            [
                [self.x1, self.y1],
                [self.x2, self.y1],
                [self.x2, self.y2],
                [self.x1, self.y2],
            ]
        )


def require_paired(img: ImageRgb, other) -> None:
    if (other.height, other.width) != (img.height, img.width):
        raise DimensionMismatchError(
            f"raster {other.width}x{other.height} does not match image "
            f"{img.width}x{img.height}"
        )


# ---------------------------------------------------------------------------
# File I/O


def load_image(path) -> ImageRgb:
    """Decode a PNG or JPEG file into an :class:`ImageRgb`."""
    p = Path(path)
    if not p.exists():
        raise IoError(f"no such file: {p}")
    try:
        with Image.open(p) as im:
            return ImageRgb(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode {p}: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {p}: {exc}") from exc


def save_image(img: ImageRgb, path) -> None:
    """Write an :class:`ImageRgb` as PNG (lossless round-trip)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img.pixels, mode="RGB").save(p, format="PNG")


def load_depth(path, max_range_m: float = 200.0) -> DepthMap:
    """Load an 8- or 16-bit single-channel PNG holding relative inverse depth.

    Stored values follow the depth-model convention (larger = nearer); the
    returned map is relative depth ``1 - stored / stored_max`` with 0 at the
    camera.
    """
    p = Path(path)
    if not p.exists():
        raise IoError(f"no such file: {p}")
    try:
        with Image.open(p) as im:
            if im.mode in ("L", "P"):
                raw = np.asarray(im.convert("L"), dtype=np.float64)
                stored_max = 255.0
            elif im.mode in ("I", "I;16", "I;16B", "I;16L"):
                raw = np.asarray(im, dtype=np.float64)
                stored_max = 65535.0
            else:
                raise ChannelError(
                    f"{p}: expected single-channel 8/16-bit input, got mode {im.mode}"
                )
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode {p}: {exc}") from exc
    depth = np.clip(1.0 - raw / stored_max, 0.0, 1.0)
    return DepthMap(depth, max_range_m=max_range_m)


def load_seg(path, class_roles: dict[str, tuple[int, ...]] | None = None) -> SegMap:
    """Load a single-channel class-id PNG as a :class:`SegMap`."""
    p = Path(path)
    if not p.exists():
        raise IoError(f"no such file: {p}")
    try:
        with Image.open(p) as im:
            if im.mode not in ("L", "P", "I", "I;16"):
                raise ChannelError(f"{p}: segmentation must be single-channel")
            ids = np.asarray(im, dtype=np.uint16)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode {p}: {exc}") from exc
    roles = dict(DEFAULT_CLASS_ROLES) if class_roles is None else class_roles
    return SegMap(ids, roles)


def save_seg(seg: SegMap, path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(seg.class_ids.astype(np.uint8), mode="L").save(p, format="PNG")


# ---------------------------------------------------------------------------
# Pixel primitives


def luma(values: np.ndarray) -> np.ndarray:
    """BT.601 luma of a float (h, w, 3) raster, shape (h, w)."""
    return values @ LUMA_WEIGHTS


def desaturate(img: ImageRgb, amount: float) -> ImageRgb:
    """Move every pixel toward its BT.601 luma by ``amount``.

    amount = 0 is the identity, amount = 1 is full grayscale. Gray pixels
    are fixed points for any amount.
    """
    if not 0.0 <= amount <= 1.0:
        raise InvalidDataError(f"amount must be within [0, 1], got {amount}")
    values = img.pixels.astype(np.float64)
    gray = luma(values)[..., None]
    return ImageRgb(_round_u8(values + amount * (gray - values)))


def desaturate_f(values: np.ndarray, amount: float) -> np.ndarray:
    """Float-pipeline variant of :func:`desaturate` (no quantization)."""
    gray = luma(values)[..., None]
    return values + amount * (gray - values)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete Gaussian kernel with radius ceil(3 sigma), normalized to 1."""
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur_f(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge clamp on a float raster."""
    if sigma < 0:
        raise InvalidDataError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return values.copy()
    from scipy.ndimage import convolve1d

    kernel = gaussian_kernel(sigma)
    out = convolve1d(values, kernel, axis=0, mode="nearest")
    return convolve1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(img: ImageRgb, sigma: float) -> ImageRgb:
    """Separable Gaussian convolution, kernel radius ceil(3 sigma), edge clamp."""
    if sigma == 0:
        return ImageRgb(img.pixels.copy())
    return ImageRgb(_round_u8(gaussian_blur_f(img.pixels.astype(np.float64), sigma)))


def blend_f(base: np.ndarray, overlay: np.ndarray, alpha) -> np.ndarray:
    """(1 - alpha) * base + alpha * overlay on float rasters.

    ``alpha`` may be a scalar, an (h, w) map, or an (h, w, 1) map.
    """
    a = np.asarray(alpha, dtype=np.float64)
    if a.ndim == 2:
        a = a[..., None]
    return (1.0 - a) * base + a * overlay


def blend(base: ImageRgb, overlay: ImageRgb, alpha) -> ImageRgb:
    """Channel-wise convex blend of two images, rounded once."""
    require_paired(base, overlay)
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise InvalidDataError("alpha must be within [0, 1]")
    out = blend_f(
        base.pixels.astype(np.float64), overlay.pixels.astype(np.float64), a
    )
    return ImageRgb(_round_u8(out))


def saturation_spread(img: ImageRgb) -> float:
    """Mean per-pixel channel spread (max - min); 0 for grayscale images."""
    px = img.pixels.astype(np.float64)
    return float((px.max(axis=2) - px.min(axis=2)).mean())


def replace(obj, **changes):
    """dataclasses.replace passthrough, re-exported for pipeline code."""
    return dataclasses.replace(obj, **changes)
