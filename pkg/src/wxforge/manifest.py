"""Dataset ingestion and augmentation-run bookkeeping.

Source images enter through a BDD-style detection label file (one JSON
record per image carrying ``attributes.weather`` / ``attributes.timeofday``
and box labels) intersected with a segmentation PNG directory: only images
present in both modalities become source records. A hand-maintained
exclusion list models visual QA rejects.

An augmentation manifest pins one (family, level) run: per-entry seeds are
a stable hash of (seed_base, image_id), so adding or removing images never
reshuffles the augmentations of the others, and label paths are inherited
unchanged from the source records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import EmptyInputError, IoError, ParseError
from .imagecore import BBox
from .params import (
    IntensityTables,
    params_from_dict,
    params_to_dict,
    resolve_intensity,
    subset_name,
)
from .augment import AugSpec

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")


@dataclass(frozen=True)
class SourceRecord:
    image_id: str
    image_path: str
    seg_path: str
    boxes_path: str
    attributes: dict[str, str]
    qa_status: str = "accepted"
    depth_path: str | None = None


@dataclass
class IngestResult:
    records: list[SourceRecord]
    drops: dict[str, int] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _find_image(image_dir: Path, image_id: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = image_dir / f"{image_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def load_exclusions(path) -> dict[str, str]:
    """Exclusion list: one ``image_id[<TAB>reason]`` per line, # comments."""
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t", 1)
        out[parts[0]] = parts[1] if len(parts) > 1 else "excluded"
    return out


def ingest(detection_attr_file, seg_label_dir, image_dir,
           depth_dir=None, exclusions_file=None) -> IngestResult:
    """Intersect detection attributes with segmentation labels.

    Returns accepted records sorted by image id plus per-reason drop
    counts. Duplicate image ids in the attribute file are a parse error.
    """
    attr_path = Path(detection_attr_file)
    seg_dir = Path(seg_label_dir)
    img_dir = Path(image_dir)
    dep_dir = Path(depth_dir) if depth_dir else None
    excluded = load_exclusions(exclusions_file) if exclusions_file else {}

    try:
        text = attr_path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {attr_path}: {exc}") from exc
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{attr_path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(entries, list):
        raise ParseError(f"{attr_path}: expected a top-level JSON list")

    drops: dict[str, int] = {}
    records: list[SourceRecord] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ParseError(f"{attr_path}: record {i} has no 'name' field")
        image_id = Path(str(entry["name"])).stem
        if image_id in seen:
            raise ParseError(f"{attr_path}: duplicate image id {image_id!r}")
        seen.add(image_id)
        attributes = entry.get("attributes", {}) or {}

        if image_id in excluded:
            drops[f"excluded:{excluded[image_id]}"] = (
                drops.get(f"excluded:{excluded[image_id]}", 0) + 1
            )
            continue
        seg_path = seg_dir / f"{image_id}.png"
        if not seg_path.exists():
            drops["no-seg"] = drops.get("no-seg", 0) + 1
            continue
        image_path = _find_image(img_dir, image_id)
        if image_path is None:
            drops["no-image"] = drops.get("no-image", 0) + 1
            continue
        depth_path = None
        if dep_dir is not None:
            cand = dep_dir / f"{image_id}.png"
            depth_path = str(cand) if cand.exists() else None
        records.append(
            SourceRecord(
                image_id=image_id,
                image_path=str(image_path),
                seg_path=str(seg_path),
                boxes_path=str(attr_path),
                attributes={
                    "weather": str(attributes.get("weather", "")),
                    "timeofday": str(attributes.get("timeofday", "")),
                },
                depth_path=depth_path,
            )
        )
    records.sort(key=lambda r: r.image_id)
    return IngestResult(records=records, drops=drops)


def filter_candidates(records, allowed_weather, allowed_timeofday):
    """Keep records whose weather and timeofday are both allowed."""
    allowed_weather = set(allowed_weather)
    allowed_timeofday = set(allowed_timeofday)
    return [
        r
        for r in records
        if r.attributes.get("weather") in allowed_weather
        and r.attributes.get("timeofday") in allowed_timeofday
    ]


def load_boxes(record: SourceRecord) -> list[BBox]:
    """Bounding boxes of one record from its detection label file."""
    entries = json.loads(Path(record.boxes_path).read_text())
    for entry in entries:
        if Path(str(entry.get("name", ""))).stem == record.image_id:
            out = []
            for label in entry.get("labels", []):
                box = label.get("box2d")
                if box:
                    out.append(
                        BBox(box["x1"], box["y1"], box["x2"], box["y2"],
                             label.get("category", ""))
                    )
            return out
    return []


# ---------------------------------------------------------------------------
# Augmentation manifests


def entry_seed(seed_base: int, image_id: str) -> int:
    """Stable 64-bit per-entry seed; independent of the other entries."""
    digest = hashlib.blake2b(
        f"{seed_base}:{image_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    output_path: str
    spec: AugSpec
    image_path: str
    seg_path: str
    boxes_path: str
    depth_path: str | None = None


@dataclass(frozen=True)
class AugManifest:
    subset_name: str
    entries: tuple[ManifestEntry, ...]
    tool_version: str
    table_version: int


def build_manifest(records, family: str, level: int, seed_base: int, out_dir,
                   tables: IntensityTables | None = None,
                   params=None, level_name=None) -> AugManifest:
    """Plan one augmentation subset over the given source records.

    ``params``/``level_name`` switch the run onto a custom preset row
    instead of a built-in intensity level.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no source records to augment")
    if params is None:
        params = resolve_intensity(family, level, tables)
        level_key = level
    else:
        level_key = level_name if level_name is not None else level
    name = subset_name(family, level_key)
    out = Path(out_dir) / name
    entries = []
    for record in records:
        spec = AugSpec(
            family=family,
            level=level_key,
            params=params,
            seed=entry_seed(seed_base, record.image_id),
        )
        entries.append(
            ManifestEntry(
                image_id=record.image_id,
                output_path=str(out / f"{record.image_id}.png"),
                spec=spec,
                image_path=record.image_path,
                seg_path=record.seg_path,
                boxes_path=record.boxes_path,
                depth_path=record.depth_path,
            )
        )
    version = tables.version if tables is not None else 1
    return AugManifest(
        subset_name=name,
        entries=tuple(entries),
        tool_version=__version__,
        table_version=version,
    )


def manifest_to_json(manifest: AugManifest) -> str:
    doc = {
        "subset_name": manifest.subset_name,
        "tool_version": manifest.tool_version,
        "table_version": manifest.table_version,
        "entries": [
            {
                "image_id": e.image_id,
                "output_path": e.output_path,
                "image_path": e.image_path,
                "seg_path": e.seg_path,
                "boxes_path": e.boxes_path,
                "depth_path": e.depth_path,
                "spec": {
                    "family": e.spec.family,
                    "level": e.spec.level,
                    "seed": e.spec.seed,
                    "params": params_to_dict(e.spec.params),
                },
            }
            for e in manifest.entries
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> AugManifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad manifest: line {exc.lineno}: {exc.msg}") from exc
    entries = []
    for e in doc["entries"]:
        spec = AugSpec(
            family=e["spec"]["family"],
            level=e["spec"]["level"],
            params=params_from_dict(e["spec"]["family"], e["spec"]["params"]),
            seed=e["spec"]["seed"],
        )
        entries.append(
            ManifestEntry(
                image_id=e["image_id"],
                output_path=e["output_path"],
                spec=spec,
                image_path=e["image_path"],
                seg_path=e["seg_path"],
                boxes_path=e["boxes_path"],
                depth_path=e.get("depth_path"),
            )
        )
    return AugManifest(
        subset_name=doc["subset_name"],
        entries=tuple(entries),
        tool_version=doc["tool_version"],
        table_version=doc["table_version"],
    )


def save_manifest(manifest: AugManifest, path=None) -> Path:
    """Write the manifest beside its outputs (default) or to ``path``."""
    if path is None:
        first = Path(manifest.entries[0].output_path)
        path = first.parent / "manifest.json"
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(manifest_to_json(manifest))
    return p


def load_manifest(path) -> AugManifest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    return manifest_from_json(text)


def save_records(records, path) -> None:
    doc = [
        {
            "image_id": r.image_id,
            "image_path": r.image_path,
            "seg_path": r.seg_path,
            "boxes_path": r.boxes_path,
            "depth_path": r.depth_path,
            "attributes": r.attributes,
            "qa_status": r.qa_status,
        }
        for r in records
    ]
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_records(path) -> list[SourceRecord]:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read records {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad records file: line {exc.lineno}: {exc.msg}") from exc
    return [
        SourceRecord(
            image_id=r["image_id"],
            image_path=r["image_path"],
            seg_path=r["seg_path"],
            boxes_path=r["boxes_path"],
            attributes=r["attributes"],
            qa_status=r.get("qa_status", "accepted"),
            depth_path=r.get("depth_path"),
        )
        for r in doc
    ]
