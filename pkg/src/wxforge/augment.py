"""The seven adverse-weather augmentation families.

All augmenters are pure functions of (image, guidance rasters, parameters,
stream): identical inputs give bit-identical outputs no matter how a batch
is scheduled. Geometry is never altered, so segmentation masks and bounding
boxes remain valid for the augmented image.

Pipelines run on float rasters in 0..255 and quantize exactly once on exit;
composing stages therefore costs no extra rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    MissingDepthError,
    MissingRoadRoleError,
    MissingSkyRoleError,
    InvalidDataError,
    DegenerateConfigurationError,
    LevelOutOfRangeError,
    UnknownFamilyError,
)
from .imagecore import (
    BBox,
    DepthMap,
    ImageRgb,
    SegMap,
    _round_u8,
    blend_f,
    desaturate_f,
    gaussian_blur_f,
    luma,
    require_paired,
)
from .params import (
    FAMILIES,
    LEVELS,
    FogParams,
    IntensityTables,
    OvercastParams,
    PuddleParams,
    RainCompositionParams,
    RainStreakParams,
    ReflectionParams,
    SunParams,
    param_type,
    resolve_intensity,
    subset_name,
)
from .procedural import (
    RandomStream,
    SunPose,
    fit_homography,
    perlin2d,
    project_ground_point,
    warp_mask,
)

log = logging.getLogger(__name__)

SUN_WHITE = np.array([255.0, 250.0, 240.0])


# ---------------------------------------------------------------------------
# Shared float-pipeline stages


def _overcast_f(values, seg: SegMap, amount: float, sky_gray, sky_weight: float):
    out = desaturate_f(values, amount)
    if sky_weight > 0:
        if not seg.has_role("sky"):
            raise MissingSkyRoleError("segmentation has no 'sky' role mapping")
        sky = seg.role_mask("sky")
        if sky.any():
            gray = np.asarray(sky_gray, dtype=np.float64)
            out[sky] = (1.0 - sky_weight) * out[sky] + sky_weight * gray
    return out


DEFAULT_SKY_GRAY = (150, 150, 154)


def _shared_overcast_f(values, seg: SegMap, amount: float):
    """The overcast step shared by the rain-family augmenters.

    One knob: desaturation by ``amount`` with the sky pulled toward the
    default gray by the same amount, so amount 0 degenerates to identity.
    """
    return _overcast_f(values, seg, amount, DEFAULT_SKY_GRAY, amount)


def _fog_f(values, depth: DepthMap, beta: float, airlight, blur_sigma_max: float):
    transmittance = np.exp(-beta * depth.metric())[..., None]
    air = np.asarray(airlight, dtype=np.float64)
    out = values * transmittance + air * (1.0 - transmittance)
    if blur_sigma_max > 0:
        out = _depth_varying_blur(out, transmittance[..., 0], blur_sigma_max)
    return out


def _depth_varying_blur(values, transmittance, sigma_max, levels: int = 4):
    """Approximate per-pixel blur sigma_max*(1-t) by blending pre-blurred levels."""
    sigmas = [sigma_max * k / (levels - 1) for k in range(levels)]
    stack = [values] + [gaussian_blur_f(values, s) for s in sigmas[1:]]
    target = (1.0 - transmittance) * (levels - 1)
    lo = np.clip(np.floor(target).astype(int), 0, levels - 1)
    hi = np.clip(lo + 1, 0, levels - 1)
    frac = (target - lo)[..., None]
    out = np.empty_like(values)
    pile = np.stack(stack, axis=0)
    rows, cols = np.indices(transmittance.shape)
    out = pile[lo, rows, cols] * (1.0 - frac) + pile[hi, rows, cols] * frac
    return out


def _road_boundary_rows(seg: SegMap, depth: DepthMap | None) -> np.ndarray:
    """Topmost road row per column; all-road columns fall back to the
    globally most depth-stable row (the horizon estimate)."""
    road = seg.role_mask("road")
    h, w = road.shape
    any_road = road.any(axis=0)
    first = np.where(any_road, road.argmax(axis=0), h)
    needs_fallback = any_road & (first == 0)
    if needs_fallback.any():
        if depth is not None and depth.height > 1:
            grad = np.abs(np.diff(depth.depth, axis=0)).mean(axis=1)
            horizon = int(np.argmin(grad))
        else:
            horizon = 0
        first = np.where(needs_fallback, horizon, first)
    return first


def _reflection_f(values, seg: SegMap, depth: DepthMap | None,
                  reflectivity: float, roughness_blur: float,
                  region: np.ndarray | None = None):
    """Mirror the scene above the road boundary onto road pixels."""
    road = seg.role_mask("road")
    if region is not None:
        road = road & region
    if reflectivity <= 0 or not road.any():
        return values
    boundary = _road_boundary_rows(seg, depth)
    h, w = road.shape
    source = gaussian_blur_f(values, roughness_blur) if roughness_blur > 0 else values
    rows, cols = np.nonzero(road)
    mirror = np.clip(2 * boundary[cols] - rows, 0, h - 1)
    values = values.copy()
    values[rows, cols] = (
        (1.0 - reflectivity) * values[rows, cols]
        + reflectivity * source[mirror, cols]
    )
    return values


@dataclass(frozen=True)
class Streak:
    x: float
    y: float
    length: float
    angle: float
    alpha: float


def plan_streaks(width: int, height: int, p: RainStreakParams,
                 stream: RandomStream) -> list[Streak]:
    """Deterministic streak plan: round(count x megapixels) particles.

    Exposed separately so callers (and tests) can count or inspect the
    particles an invocation will draw.
    """
    n = int(round(p.count * (width * height) / 1e6))
    rng = stream.derive("streaks").generator()
    out = []
    for _ in range(n):
        x = rng.uniform(0, width)
        y = rng.uniform(0, height)
        length = rng.uniform(p.length_px[0], p.length_px[1])
        angle = p.angle_mean + p.angle_jitter * rng.uniform(-1.0, 1.0)
        alpha = p.alpha * rng.uniform(0.7, 1.0)
        out.append(Streak(x, y, length, angle, alpha))
    return out


def _splat_segment(buf: np.ndarray, streak: Streak) -> None:
    """Accumulate an anti-aliased line segment into a coverage buffer."""
    h, w = buf.shape
    steps = max(2, int(streak.length * 2))
    t = np.linspace(0.0, 1.0, steps)
    xs = streak.x + t * streak.length * math.cos(streak.angle)
    ys = streak.y + t * streak.length * math.sin(streak.angle)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        np.add.at(buf, (yi[ok], xi[ok]), wgt[ok] * streak.alpha)


def _streaks_f(values, p: RainStreakParams, stream: RandomStream):
    h, w = values.shape[:2]
    plan = plan_streaks(w, h, p, stream)
    if not plan:
        return values
    coverage = np.zeros((h, w))
    for streak in plan:
        _splat_segment(coverage, streak)
    alpha = np.clip(coverage, 0.0, 1.0)
    color = np.asarray(p.streak_color, dtype=np.float64)
    return blend_f(values, color, alpha)


def _droplets_f(values, count: int, radius_px, alpha: float, stream: RandomStream):
    """Lens droplets: inverted, blurred local samples inside soft disks."""
    if count <= 0 or alpha <= 0:
        return values
    h, w = values.shape[:2]
    rng = stream.derive("droplets").generator()
    blurred = gaussian_blur_f(values, 1.5)
    out = values.copy()
    ys, xs = np.indices((h, w))
    for _ in range(count):
        cx = rng.uniform(0, w)
        cy = rng.uniform(0, h)
        r = rng.uniform(radius_px[0], radius_px[1])
        dist = np.hypot(xs - cx, ys - cy)
        disk = dist <= r
        if not disk.any():
            continue
        # Refraction: sample a minified, inverted neighborhood of the center.
        sx = np.clip(cx - (xs[disk] - cx) * 0.45, 0, w - 1).astype(int)
        sy = np.clip(cy - (ys[disk] - cy) * 0.45, 0, h - 1).astype(int)
        edge = np.clip((r - dist[disk]) / max(r * 0.35, 1.0), 0.0, 1.0)
        a = (alpha * edge)[..., None]
        out[disk] = (1.0 - a) * out[disk] + a * blurred[sy, sx]
    return out


# ---------------------------------------------------------------------------
# Family operations


def overcast(img: ImageRgb, seg: SegMap, amount: float, sky_gray=DEFAULT_SKY_GRAY,
             sky_weight: float = 0.0) -> ImageRgb:
    """Desaturate globally and pull sky pixels toward a gray sky color."""
    require_paired(img, seg)
    out = _overcast_f(img.pixels.astype(np.float64), seg, amount, sky_gray, sky_weight)
    return ImageRgb(_round_u8(out))


def dense_fog(img: ImageRgb, depth: DepthMap, seg: SegMap, p: FogParams) -> ImageRgb:
    """Depth-dependent fog over an overcast base.

    Per pixel the transmittance is t = exp(-beta * depth_m); the scene
    blends toward the airlight color as t falls, then a depth-varying blur
    with sigma = blur_sigma_max * (1 - t) softens distant content.
    """
    require_paired(img, depth)
    require_paired(img, seg)
    values = _overcast_f(
        img.pixels.astype(np.float64), seg, p.overcast_amount, p.airlight,
        p.overcast_amount,
    )
    values = _fog_f(values, depth, p.beta, p.airlight, p.blur_sigma_max)
    return ImageRgb(_round_u8(values))


def _sun_position(seg: SegMap) -> tuple[float, float]:
    """Centroid of the largest sky connected component."""
    sky = seg.role_mask("sky")
    if not sky.any():
        raise MissingSkyRoleError("no sky pixels available for sun placement")
    labels, n = ndimage.label(sky)
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=range(1, n + 1))
    largest = int(np.argmax(sizes)) + 1
    cy, cx = ndimage.center_of_mass(labels == largest)
    return (float(cx), float(cy))


def shadow_sunglare(img: ImageRgb, depth: DepthMap, seg: SegMap,
                    boxes: list[BBox], p: SunParams,
                    stream: RandomStream) -> ImageRgb:
    """Sun disc with radial glare, raised saturation, and projected shadows.

    Each object's bounding-box corners are sent to their ground projections
    (opposite the sun, length scaled by cot(elevation)); the homography
    between the two quads warps the instance mask into a road shadow.
    Degenerate objects are skipped and logged, never fatal.
    """
    require_paired(img, depth)
    require_paired(img, seg)
    values = img.pixels.astype(np.float64)
    h, w = values.shape[:2]

    sun_xy = None
    if p.glare_gain > 0:
        sun_xy = _sun_position(seg)
        xs, ys = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
        r2 = (xs - sun_xy[0]) ** 2 + (ys - sun_xy[1]) ** 2
        halo = p.glare_gain * np.exp(-r2 / (2.0 * p.glare_sigma**2))
        disc = r2 <= (p.glare_sigma / 8.0) ** 2
        halo[disc] = np.maximum(halo[disc], min(1.0, 1.5 * p.glare_gain))
        values = values + halo[..., None] * (SUN_WHITE - values)

    if p.saturation_boost > 0:
        gray = luma(values)[..., None]
        values = np.clip(gray + (1.0 + p.saturation_boost) * (values - gray), 0, 255)

    if boxes and p.shadow_strength > 0:
        road = seg.role_mask("road")
        dyn = seg.role_mask("dynamic") if seg.has_role("dynamic") else np.zeros_like(road)
        if sun_xy is None:
            sun_xy = _sun_position(seg)
        for box in boxes:
            values = _object_shadow(values, depth, road, dyn, box, p, sun_xy)
    return ImageRgb(_round_u8(values))


def _object_shadow(values, depth: DepthMap, road, dyn, box: BBox,
                   p: SunParams, sun_xy):
    h, w = values.shape[:2]
    cx = (box.x1 + box.x2) / 2.0
    azimuth = math.atan2(box.y2 - sun_xy[1], sun_xy[0] - cx)
    sun = SunPose(azimuth=azimuth, elevation=p.elevation, image_xy=sun_xy)

    src = box.corners()
    dst = np.array([
        project_ground_point((x, y), depth, sun, horizon_row=box.y2)
        for x, y in src
    ])
    try:
        hom = fit_homography(src, dst)
    except DegenerateConfigurationError as exc:
        log.warning("skipping shadow for %s: %s", box, exc)
        return values

    y1, y2 = int(box.y1), int(math.ceil(box.y2))
    x1, x2 = int(box.x1), int(math.ceil(box.x2))
    instance = np.zeros((h, w), dtype=np.float64)
    inside = dyn[y1:y2, x1:x2]
    if inside.any():
        instance[y1:y2, x1:x2] = inside
    else:
        instance[y1:y2, x1:x2] = 1.0

    warped = warp_mask(instance > 0.5, hom, (h, w)).astype(np.float64)
    soft = gaussian_blur_f(warped, 0.7)
    shade = np.clip(soft, 0.0, 1.0) * road * p.shadow_strength
    values = values * (1.0 - 0.85 * shade[..., None])

    # Side shading: luma ramp across the object, darkest away from the sun.
    obj_rows, obj_cols = np.nonzero(instance)
    if obj_rows.size and box.x2 > box.x1:
        toward_sun = 1.0 if sun_xy[0] >= cx else -1.0
        ramp = (obj_cols - box.x1) / (box.x2 - box.x1)
        if toward_sun > 0:
            ramp = 1.0 - ramp
        factor = 1.0 - 0.25 * p.shadow_strength * ramp
        values[obj_rows, obj_cols] *= factor[:, None]
    return values


def rain_streaks(img: ImageRgb, seg: SegMap, p: RainStreakParams,
                 overcast_amount: float, stream: RandomStream) -> ImageRgb:
    """Overcast base plus a seeded particle pass of anti-aliased streaks."""
    require_paired(img, seg)
    values = _shared_overcast_f(img.pixels.astype(np.float64), seg, overcast_amount)
    values = _streaks_f(values, p, stream)
    return ImageRgb(_round_u8(values))


def wet_street_lens_droplets(img: ImageRgb, depth: DepthMap, seg: SegMap,
                             p: ReflectionParams, overcast_amount: float,
                             stream: RandomStream) -> ImageRgb:
    """Road mirror reflections; levels with droplet_count > 0 add lens blobs."""
    require_paired(img, seg)
    if not seg.has_role("road"):
        raise MissingRoadRoleError("segmentation has no 'road' role mapping")
    values = _shared_overcast_f(img.pixels.astype(np.float64), seg, overcast_amount)
    values = _reflection_f(values, seg, depth, p.reflectivity, p.roughness_blur)
    values = _droplets_f(values, p.droplet_count, p.droplet_radius_px,
                         p.droplet_alpha, stream)
    return ImageRgb(_round_u8(values))


def puddle_mask(seg: SegMap, p: PuddleParams, stream: RandomStream) -> np.ndarray:
    """Road pixels whose noise value exceeds the threshold."""
    road = seg.role_mask("road")
    h, w = road.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    noise = perlin2d(xs, ys, p.noise_frequency, 2, stream.derive("puddles"))
    return road & (noise > p.threshold)


def puddles(img: ImageRgb, depth: DepthMap, seg: SegMap, p: PuddleParams,
            overcast_amount: float, stream: RandomStream) -> ImageRgb:
    """Noise-shaped puddles: mirrored reflections plus slight darkening."""
    require_paired(img, seg)
    if not seg.has_role("road"):
        raise MissingRoadRoleError("segmentation has no 'road' role mapping")
    values = _shared_overcast_f(img.pixels.astype(np.float64), seg, overcast_amount)
    mask = puddle_mask(seg, p, stream)
    if mask.any():
        values = _reflection_f(values, seg, depth, p.reflectivity, 0.8, region=mask)
        values[mask] *= 0.93
    return ImageRgb(_round_u8(values))


def rain_composition(img: ImageRgb, depth: DepthMap, seg: SegMap,
                     boxes: list[BBox], p: RainCompositionParams,
                     stream: RandomStream) -> ImageRgb:
    """Composite rain, fixed stage order.

    overcast -> wet-street reflections -> light fog -> rain streaks ->
    lens droplets. Atmospheric stages wrap the surface stages so streaks
    and droplets stay crisp in front of the fog.
    """
    del boxes  # geometry untouched; accepted for interface symmetry
    require_paired(img, seg)
    require_paired(img, depth)
    values = _overcast_f(img.pixels.astype(np.float64), seg, p.overcast_amount,
                         p.sky_gray, p.sky_weight)
    values = _reflection_f(values, seg, depth, p.reflectivity, p.roughness_blur)
    if p.fog_beta > 0:
        values = _fog_f(values, depth, p.fog_beta, p.fog_airlight,
                        p.fog_blur_sigma_max)
    streak_params = RainStreakParams(
        count=p.streak_count,
        length_px=p.streak_length_px,
        angle_mean=p.streak_angle_mean,
        angle_jitter=p.streak_angle_jitter,
        alpha=p.streak_alpha,
        streak_color=p.streak_color,
        overcast_amount=0.0,
    )
    values = _streaks_f(values, streak_params, stream)
    values = _droplets_f(values, p.droplet_count, p.droplet_radius_px,
                         p.droplet_alpha, stream)
    return ImageRgb(_round_u8(values))


# ---------------------------------------------------------------------------
# Dispatch


@dataclass(frozen=True)
class AugSpec:
    """Fully resolved description of one augmented output.

    ``level`` is an intensity row 1..5, or a preset name when the run came
    from a saved custom row; the subset name renders as ``<family>_<level>``.
    """

    family: str
    level: int | str
    params: object
    seed: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownFamilyError(f"unknown family {self.family!r}")
        if isinstance(self.level, int) and self.level not in LEVELS:
            raise LevelOutOfRangeError(f"level must be 1..5, got {self.level}")
        if not isinstance(self.params, param_type(self.family)):
            raise InvalidDataError(
                f"params type {type(self.params).__name__} does not match family"
            )

    @property
    def subset_name(self) -> str:
        return subset_name(self.family, self.level)


def spec_for_level(family: str, level: int, seed: int,
                   tables: IntensityTables | None = None) -> AugSpec:
    return AugSpec(family=family, level=level,
                   params=resolve_intensity(family, level, tables), seed=seed)


def apply_augmentation(spec: AugSpec, img: ImageRgb,
                       depth: DepthMap | None = None,
                       seg: SegMap | None = None,
                       boxes: list[BBox] | None = None) -> ImageRgb:
    """Run one augmenter as described by ``spec``.

    The random stream is derived from (seed, family), so a per-image seed
    makes every output independent of batch order and worker count.
    """
    stream = RandomStream(spec.seed, spec.family)
    family = spec.family
    p = spec.params
    needs_depth = family in ("dense_fog", "shadow_sunglare",
                             "wet_street_lens_droplets", "puddles",
                             "rain_composition")
    if needs_depth and depth is None:
        raise MissingDepthError(f"{family} requires a depth map")
    if seg is None:
        raise InvalidDataError(f"{family} requires a segmentation map")

    if family == "overcast":
        return overcast(img, seg, p.amount, p.sky_gray, p.sky_weight)
    if family == "dense_fog":
        return dense_fog(img, depth, seg, p)
    if family == "shadow_sunglare":
        return shadow_sunglare(img, depth, seg, boxes or [], p, stream)
    if family == "rain_streaks":
        return rain_streaks(img, seg, p, p.overcast_amount, stream)
    if family == "wet_street_lens_droplets":
        return wet_street_lens_droplets(img, depth, seg, p, p.overcast_amount, stream)
    if family == "puddles":
        return puddles(img, depth, seg, p, p.overcast_amount, stream)
    if family == "rain_composition":
        return rain_composition(img, depth, seg, boxes or [], p, stream)
    raise UnknownFamilyError(family)
