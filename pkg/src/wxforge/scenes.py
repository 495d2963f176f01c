"""Synthetic driving scenes for tests and demos.

A minimal scene with a sky band, building band, road band, and one vehicle
box is enough to exercise every augmentation family without real data.
"""

from __future__ import annotations

import numpy as np

from .imagecore import BBox, DepthMap, ImageRgb, SegMap

ROLES = {"road": (0,), "sky": (10,), "dynamic": (13,)}


def synthetic_road_scene(width: int = 64, height: int = 64):
    """Sky over buildings over road, with one car on the road.

    Returns (image, depth, seg, boxes). Proportions follow a forward-facing
    driving camera: sky in the top ~30%, road in the bottom ~40%.
    """
    sky_end = height * 30 // 100
    road_start = height * 60 // 100

    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:sky_end] = (120, 180, 240)
    pixels[sky_end:road_start] = (150, 110, 90)
    # Facade variation so blur and desaturation have structure to act on.
    for x in range(0, width, 8):
        pixels[sky_end:road_start, x : x + 4] = (170, 130, 100)
    pixels[road_start:] = (95, 95, 100)
    lane_x = width // 2
    pixels[road_start:, lane_x - 1 : lane_x + 1] = (200, 200, 190)

    class_ids = np.full((height, width), 2, dtype=np.uint16)
    class_ids[:sky_end] = 10
    class_ids[road_start:] = 0

    depth = np.empty((height, width), dtype=np.float64)
    depth[:sky_end] = 1.0
    depth[sky_end:road_start] = 0.75
    road_rows = height - road_start
    ramp = np.linspace(0.7, 0.05, road_rows)[:, None]
    depth[road_start:] = np.repeat(ramp, width, axis=1)

    # One car straddling the building/road boundary.
    bx1, by1 = width * 40 // 100, road_start - height * 15 // 100
    bx2, by2 = width * 55 // 100, road_start + height * 8 // 100
    pixels[by1:by2, bx1:bx2] = (160, 40, 40)
    class_ids[by1:by2, bx1:bx2] = 13
    depth[by1:by2, bx1:bx2] = 0.45

    img = ImageRgb(pixels)
    seg = SegMap(class_ids, dict(ROLES))
    dpt = DepthMap(depth, max_range_m=200.0)
    boxes = [BBox(bx1, by1, bx2, by2, "car")]
    return img, dpt, seg, boxes
