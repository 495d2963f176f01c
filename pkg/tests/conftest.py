import json

import numpy as np
import pytest
from PIL import Image

from wxforge.imagecore import save_image, save_seg
from wxforge.scenes import synthetic_road_scene


@pytest.fixture(scope="session")
def scene():
    """(image, depth, seg, boxes) synthetic road scene shared by tests."""
    return synthetic_road_scene(64, 64)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def write_scene_dataset(root, image_ids=("img_a", "img_b", "img_c")):
    """On-disk dataset of synthetic scenes: images, seg, depth, detections."""
    img, depth, seg, boxes = synthetic_road_scene(64, 64)
    img_dir = root / "images"
    seg_dir = root / "seg"
    depth_dir = root / "depth"
    for d in (img_dir, seg_dir, depth_dir):
        d.mkdir(parents=True, exist_ok=True)
    entries = []
    for image_id in image_ids:
        save_image(img, img_dir / f"{image_id}.png")
        save_seg(seg, seg_dir / f"{image_id}.png")
        stored = np.floor((1.0 - depth.depth) * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(stored, mode="L").save(depth_dir / f"{image_id}.png")
        entries.append({
            "name": f"{image_id}.png",
            "attributes": {"weather": "clear", "timeofday": "daytime"},
            "labels": [
                {"category": b.category,
                 "box2d": {"x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2}}
                for b in boxes
            ],
        })
    attr_file = root / "det.json"
    attr_file.write_text(json.dumps(entries))
    return {"attributes": attr_file, "seg_dir": seg_dir, "image_dir": img_dir,
            "depth_dir": depth_dir}


@pytest.fixture()
def scene_dataset(tmp_path):
    return write_scene_dataset(tmp_path)
