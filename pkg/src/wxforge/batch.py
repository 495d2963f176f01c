"""Batch execution of augmentation manifests.

Entries are independent pure jobs, so a thread pool may run them in any
order; per-entry seeds come from the manifest, making output bytes
identical for any worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .augment import apply_augmentation
from .errors import MissingDepthError
from .imagecore import load_depth, load_image, load_seg, save_image
from .manifest import AugManifest, ManifestEntry, load_boxes, SourceRecord

log = logging.getLogger(__name__)

_NEEDS_DEPTH = {
    "dense_fog",
    "shadow_sunglare",
    "wet_street_lens_droplets",
    "puddles",
    "rain_composition",
}


def run_entry(entry: ManifestEntry, max_range_m: float = 200.0) -> Path:
    """Render one manifest entry to its output path."""
    img = load_image(entry.image_path)
    seg = load_seg(entry.seg_path)
    depth = None
    if entry.depth_path:
        depth = load_depth(entry.depth_path, max_range_m=max_range_m)
    elif entry.spec.family in _NEEDS_DEPTH:
        raise MissingDepthError(
            f"{entry.image_id}: {entry.spec.family} requires a depth map"
        )
    boxes = load_boxes(
        SourceRecord(
            image_id=entry.image_id,
            image_path=entry.image_path,
            seg_path=entry.seg_path,
            boxes_path=entry.boxes_path,
            attributes={},
        )
    )
    out = apply_augmentation(entry.spec, img, depth, seg, boxes)
    save_image(out, entry.output_path)
    return Path(entry.output_path)


def run_manifest(manifest: AugManifest, workers: int = 1,
                 max_range_m: float = 200.0) -> list[Path]:
    """Render every entry; outputs are byte-stable for any worker count."""
    if workers <= 1:
        return [run_entry(e, max_range_m) for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_entry, e, max_range_m) for e in manifest.entries]
        return [f.result() for f in futures]
