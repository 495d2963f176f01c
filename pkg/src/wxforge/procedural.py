"""Deterministic procedural primitives.

Randomness flows through :class:`RandomStream`, a value object wrapping the
Philox 4x64 counter-based generator. Substreams are derived from string
labels via a stable hash, so a batch run produces identical bytes for every
image regardless of worker count or scheduling order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, InvalidDataError

__all__ = [
    "RandomStream",
    "Homography",
    "SunPose",
    "perlin2d",
    "fit_homography",
    "warp_mask",
    "project_ground_point",
]


def _label_words(label: str) -> tuple[int, ...]:
    """Stable 4x32-bit digest of a stream label (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


@dataclass(frozen=True)
class RandomStream:
    """Seed plus label naming one reproducible random value sequence.

    The same (seed, stream_label) pair always yields the same sequence; the
    object itself is immutable, and :meth:`generator` returns a fresh
    generator positioned at the start of the sequence on every call.
    """

    seed: int
    stream_label: str = ""

    def generator(self) -> np.random.Generator:
        entropy = (self.seed & 0xFFFFFFFFFFFFFFFF,) + _label_words(self.stream_label)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def derive(self, sublabel: str) -> "RandomStream":
        """Fork an independent stream for a named sub-task."""
        return RandomStream(self.seed, f"{self.stream_label}/{sublabel}")


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so h[2][2] == 1."""

    h: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64)
        if m.shape != (3, 3):
            raise InvalidDataError(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) < 1e-12:
            raise DegenerateConfigurationError("h[2][2] is zero; cannot normalize")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateConfigurationError("homography is singular")
        object.__setattr__(self, "h", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the homography."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        hom = np.hstack([pts, ones]) @ self.h.T
        return hom[:, :2] / hom[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))


@dataclass(frozen=True)
class SunPose:
    """Sun direction plus its rendered position in the image.

    ``azimuth`` is the image-plane angle from the +x axis toward the sun
    (y measured upward, so azimuth pi/2 means the sun is straight above);
    ``elevation`` in (0, pi/2) controls shadow length via cot(elevation).
    """

    azimuth: float
    elevation: float
    image_xy: tuple[float, float]

    def __post_init__(self):
        if not 0.0 < self.elevation < math.pi / 2 + 1e-9:
            raise InvalidDataError(
                f"elevation must lie in (0, pi/2], got {self.elevation}"
            )


# ---------------------------------------------------------------------------
# Perlin noise

_FADE = lambda t: t * t * t * (t * (t * 6 - 15) + 10)  # noqa: E731

# 8 unit gradient directions (axes + diagonals); keeps |value| <= sqrt(2)/2.
_GRADS = np.array(
    [
        (1, 0), (-1, 0), (0, 1), (0, -1),
        (math.sqrt(0.5), math.sqrt(0.5)),
        (-math.sqrt(0.5), math.sqrt(0.5)),
        (math.sqrt(0.5), -math.sqrt(0.5)),
        (-math.sqrt(0.5), -math.sqrt(0.5)),
    ]
)


def _perm_table(stream: RandomStream) -> np.ndarray:
    perm = stream.derive("perlin-perm").generator().permutation(256)
    return np.concatenate([perm, perm]).astype(np.int64)


def _perlin_single(u: np.ndarray, v: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Classic gradient-lattice noise at scaled coordinates (u, v)."""
    ui = np.floor(u).astype(np.int64)
    vi = np.floor(v).astype(np.int64)
    uf = u - ui
    vf = v - vi
    ui &= 255
    vi &= 255

    def corner_grad(du, dv):
        gi = perm[perm[ui + du] + vi + dv] & 7
        g = _GRADS[gi]
        return g[..., 0] * (uf - du) + g[..., 1] * (vf - dv)

    n00 = corner_grad(0, 0)
    n10 = corner_grad(1, 0)
    n01 = corner_grad(0, 1)
    n11 = corner_grad(1, 1)

    su = _FADE(uf)
    sv = _FADE(vf)
    nx0 = n00 + su * (n10 - n00)
    nx1 = n01 + su * (n11 - n01)
    return nx0 + sv * (nx1 - nx0)


def perlin2d(x, y, frequency: float, octaves: int, stream: RandomStream):
    """Classic 2-D Perlin noise in [-1, 1], deterministic in all inputs.

    Coordinates are scaled by ``frequency`` (cycles per unit), so lattice
    nodes sit at integer multiples of 1/frequency; single-octave noise is
    exactly zero there. Octaves stack at doubling frequency and halving
    amplitude, renormalized to keep the total range inside [-1, 1].

    Accepts scalars or broadcastable arrays for ``x`` and ``y``.
    """
    if frequency <= 0:
        raise InvalidDataError(f"frequency must be > 0, got {frequency}")
    if octaves < 1:
        raise InvalidDataError(f"octaves must be >= 1, got {octaves}")
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    scalar = xs.ndim == 0 and ys.ndim == 0
    xs, ys = np.broadcast_arrays(np.atleast_1d(xs), np.atleast_1d(ys))

    perm = _perm_table(stream)
    total = np.zeros(xs.shape)
    amplitude = 1.0
    norm = 0.0
    for octave in range(octaves):
        scale = frequency * (2.0**octave)
        total += amplitude * _perlin_single(xs * scale, ys * scale, perm)
        norm += amplitude
        amplitude *= 0.5
    out = total / norm
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Homography estimation and warping


def _collinearity_margin(points: np.ndarray) -> float:
    """Smallest doubled triangle area over all point triples."""
    pts = np.asarray(points, dtype=np.float64)
    margin = math.inf
    for i in range(4):
        tri = np.delete(pts, i, axis=0)
        a, b, c = tri
        area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        margin = min(margin, area2)
    return margin


def fit_homography(src, dst) -> Homography:
    """Fit the exact homography sending 4 source points to 4 destinations.

    Solves the 8x8 direct linear system (h33 pinned to 1) by LU with partial
    pivoting; correspondences here are constructed, not noisy, so no robust
    estimation is involved. Raises ``degenerate-configuration`` when any 3
    points are collinear or the solution fails to reproduce the
    correspondences to 1e-6 px.
    """
    s = np.asarray(src, dtype=np.float64).reshape(4, 2)
    d = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    if _collinearity_margin(s) < 1e-9 or _collinearity_margin(d) < 1e-9:
        raise DegenerateConfigurationError("3 of the 4 points are collinear")

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = s[i]
        u, v = d[i]
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h8 = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(f"singular system: {exc}") from exc

    hom = Homography(np.append(h8, 1.0).reshape(3, 3))
    residual = np.abs(hom.apply(s) - d).max()
    if residual > 1e-6:
        raise DegenerateConfigurationError(
            f"solution residual {residual:.2e} px exceeds 1e-6"
        )
    return hom


def warp_mask(mask: np.ndarray, hom: Homography, out_shape: tuple[int, int]) -> np.ndarray:
    """Warp a binary mask by inverse mapping with nearest-neighbor sampling.

    ``out_shape`` is (height, width); output pixels whose preimage falls
    outside the source mask are 0.
    """
    src = np.asarray(mask)
    out_h, out_w = out_shape
    inv = np.linalg.inv(hom.h)

    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
        sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom
    ix = np.floor(sx + 0.5).astype(np.int64)
    iy = np.floor(sy + 0.5).astype(np.int64)
    valid = (
        np.isfinite(sx) & np.isfinite(sy)
        & (ix >= 0) & (ix < src.shape[1]) & (iy >= 0) & (iy < src.shape[0])
    )
    out = np.zeros((out_h, out_w), dtype=src.dtype)
    out[valid] = src[iy[valid], ix[valid]]
    return out


# ---------------------------------------------------------------------------
# Sun / ground projection

_BACKGROUND_DEPTH = 0.98


def project_ground_point(
    p: tuple[float, float],
    depth,
    sun: SunPose,
    horizon_row: float,
) -> tuple[float, float]:
    """Shadow anchor of pixel ``p`` on a planar ground.

    The point is shifted opposite the sun's azimuth by its pixel height
    above ``horizon_row`` (the object's ground-contact row) times
    cot(elevation); under a fronto-parallel plane the metric scale cancels,
    so pixel height is the correct image-space magnitude. Points at or below
    the contact row, and far-background pixels (relative depth >= 0.98), map
    to themselves. The result is clamped to the image bounds.
    """
    px, py = float(p[0]), float(p[1])
    d = depth.depth
    h, w = d.shape
    iy = min(max(int(round(py)), 0), h - 1)
    ix = min(max(int(round(px)), 0), w - 1)
    if d[iy, ix] >= _BACKGROUND_DEPTH:
        return (px, py)

    height_px = horizon_row - py
    if height_px <= 0:
        return (px, py)

    length = height_px / math.tan(sun.elevation)
    # Opposite the sun: azimuth is measured with y up, image rows grow down.
    dx = -math.cos(sun.azimuth)
    dy = math.sin(sun.azimuth)
    qx = px + length * dx
    qy = py + length * dy
    return (min(max(qx, 0.0), w - 1.0), min(max(qy, 0.0), h - 1.0))
