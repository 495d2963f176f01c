"""
Seven weather families on one synthetic scene
=============================================

Renders every augmentation family at intensity levels 1, 3, and 5 on the
bundled synthetic road scene and tiles the results into a contact sheet.
Every output is a pure function of (image, rasters, family, level, seed):
run the script twice and the sheet is byte-identical.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from wxforge.augment import apply_augmentation, spec_for_level
from wxforge.params import FAMILIES
from wxforge.scenes import synthetic_road_scene

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

img, depth, seg, boxes = synthetic_road_scene(128, 128)
levels = (1, 3, 5)

# one row per family: original followed by the chosen levels
tiles = []
for family in FAMILIES:
    row = [img.pixels]
    for level in levels:
        spec = spec_for_level(family, level, seed=7)
        row.append(apply_augmentation(spec, img, depth, seg, boxes).pixels)
    tiles.append(np.hstack(row))
sheet = np.vstack(tiles)

path = OUT / "family_contact_sheet.png"
Image.fromarray(sheet).save(path)
print(f"wrote {path} ({sheet.shape[1]}x{sheet.shape[0]})")
print("rows:", ", ".join(FAMILIES))
print("columns: original, level 1, level 3, level 5")
