"""Local HTTP preview service backing the studio UI.

Serves source-image listings, renders one-off augmentations with arbitrary
parameters, and persists named presets into the intensity tables file so
hand calibration feeds the batch pipeline directly. Previews are pure:
identical requests return identical bytes, exposed via a content-hash
header, and nothing on disk changes.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from .augment import AugSpec, apply_augmentation
from .errors import ParamRangeError, WxforgeError
from .imagecore import DepthMap, ImageRgb, SegMap, load_depth, load_image, load_seg
from .manifest import SourceRecord, load_boxes, load_records
from .params import (
    FAMILIES,
    IntensityTables,
    Preset,
    default_tables,
    dump_tables,
    family_schema,
    load_tables,
    params_from_dict,
    save_tables,
)

PREVIEW_SEED_LABEL = "preview"


class PreviewRequest(BaseModel):
    image_id: str
    family: str
    params: dict
    seed: int = 0


class PresetRequest(BaseModel):
    name: str
    family: str
    params: dict
    note: str = ""


def _downscale(img: ImageRgb, depth: DepthMap | None, seg: SegMap,
               max_edge: int):
    """Resize all rasters so the long edge fits; labels use nearest."""
    long_edge = max(img.width, img.height)
    if long_edge <= max_edge:
        return img, depth, seg
    scale = max_edge / long_edge
    w = max(1, round(img.width * scale))
    h = max(1, round(img.height * scale))
    pil = Image.fromarray(img.pixels).resize((w, h), Image.BILINEAR)
    img2 = ImageRgb(np.asarray(pil, dtype=np.uint8))
    seg_pil = Image.fromarray(seg.class_ids.astype(np.int32), mode="I").resize(
        (w, h), Image.NEAREST
    )
    seg2 = SegMap(np.asarray(seg_pil, dtype=np.uint16), dict(seg.class_roles))
    depth2 = None
    if depth is not None:
        dep_pil = Image.fromarray(depth.depth.astype(np.float32), mode="F").resize(
            (w, h), Image.BILINEAR
        )
        depth2 = DepthMap(
            np.clip(np.asarray(dep_pil, dtype=np.float64), 0.0, 1.0),
            max_range_m=depth.max_range_m,
        )
    return img2, depth2, seg2


def _encode_png(img: ImageRgb) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


class ServiceState:
    def __init__(self, records: list[SourceRecord] | None,
                 tables: IntensityTables, tables_path: Path | None,
                 max_edge: int):
        self.records = {r.image_id: r for r in records} if records else None
        self.order = [r.image_id for r in records] if records else []
        self.tables = tables
        self.tables_path = tables_path
        self.max_edge = max_edge
        self.write_lock = threading.Lock()


def create_app(records_path=None, records=None, tables_path=None,
               static_dir=None, max_edge: int = 960) -> FastAPI:
    if records is None and records_path is not None:
        records = load_records(records_path)
    if tables_path is not None and Path(tables_path).exists():
        tables = load_tables(tables_path)
    else:
        base = default_tables()
        tables = IntensityTables(dict(base.rows), {}, version=base.version)
    state = ServiceState(records, tables,
                         Path(tables_path) if tables_path else None, max_edge)
    app = FastAPI(title="wxforge studio service")
    app.state.wx = state

    def need_record(image_id: str) -> SourceRecord:
        if state.records is None:
            raise HTTPException(status_code=503, detail="no manifest loaded")
        record = state.records.get(image_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        return record

    @app.get("/api/families")
    def families():
        return [family_schema(f) for f in FAMILIES]

    @app.get("/api/images")
    def images(page: int = 1, size: int = 20):
        if state.records is None:
            raise HTTPException(status_code=503, detail="no manifest loaded")
        if page < 1 or size < 1:
            raise HTTPException(status_code=422, detail="page and size must be >= 1")
        start = (page - 1) * size
        ids = state.order[start : start + size]
        return {
            "total": len(state.order),
            "page": page,
            "size": size,
            "items": [
                {
                    "image_id": i,
                    "attributes": state.records[i].attributes,
                    "thumbnail": f"/api/images/{i}/thumbnail",
                }
                for i in ids
            ],
        }

    @app.get("/api/images/{image_id}/thumbnail")
    def thumbnail(image_id: str):
        record = need_record(image_id)
        img = load_image(record.image_path)
        seg = load_seg(record.seg_path)
        small, _, _ = _downscale(img, None, seg, 240)
        return Response(content=_encode_png(small), media_type="image/png")

    def render_preview(req: PreviewRequest) -> bytes:
        record = need_record(req.image_id)
        try:
            params = params_from_dict(req.family, req.params)
            spec = AugSpec(family=req.family, level=1, params=params,
                           seed=req.seed)
        except ParamRangeError as exc:
            raise HTTPException(
                status_code=422,
                detail={"field": exc.field, "reason": exc.reason},
            ) from exc
        except WxforgeError as exc:
            raise HTTPException(
                status_code=422, detail={"field": "family", "reason": str(exc)}
            ) from exc
        img = load_image(record.image_path)
        seg = load_seg(record.seg_path)
        depth = load_depth(record.depth_path) if record.depth_path else None
        boxes = load_boxes(record) if Path(record.boxes_path).exists() else []
        img, depth, seg = _downscale(img, depth, seg, state.max_edge)
        try:
            out = apply_augmentation(spec, img, depth, seg, boxes)
        except WxforgeError as exc:
            raise HTTPException(
                status_code=422, detail={"field": exc.kind, "reason": str(exc)}
            ) from exc
        return _encode_png(out)

    @app.post("/api/preview")
    def preview(req: PreviewRequest):
        blob = render_preview(req)
        digest = hashlib.sha256(blob).hexdigest()
        return Response(content=blob, media_type="image/png",
                        headers={"X-Content-Hash": digest})

    @app.get("/api/images/{image_id}/source")
    def source_png(image_id: str):
        """The preview-pipeline re-encode of the unaltered source."""
        record = need_record(image_id)
        img = load_image(record.image_path)
        seg = load_seg(record.seg_path)
        small, _, _ = _downscale(img, None, seg, state.max_edge)
        blob = _encode_png(small)
        digest = hashlib.sha256(blob).hexdigest()
        return Response(content=blob, media_type="image/png",
                        headers={"X-Content-Hash": digest})

    @app.get("/api/presets")
    def list_presets():
        return [
            {
                "name": p.name,
                "family": p.family,
                "note": p.note,
                "created_at": p.created_at,
                "params": req_params(p),
            }
            for family in sorted(state.tables.presets)
            for p in state.tables.presets[family].values()
        ]

    def req_params(preset: Preset) -> dict:
        from .params import params_to_dict

        return params_to_dict(preset.params)

    @app.post("/api/presets", status_code=201)
    def save_preset(req: PresetRequest):
        try:
            params = params_from_dict(req.family, req.params)
        except ParamRangeError as exc:
            raise HTTPException(
                status_code=422,
                detail={"field": exc.field, "reason": exc.reason},
            ) from exc
        except WxforgeError as exc:
            raise HTTPException(
                status_code=422, detail={"field": "family", "reason": str(exc)}
            ) from exc
        preset = Preset(
            name=req.name,
            family=req.family,
            params=params,
            note=req.note,
            created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        )
        with state.write_lock:
            try:
                state.tables.add_preset(preset)
            except WxforgeError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            if state.tables_path is not None:
                save_tables(state.tables, state.tables_path)
        return {"name": preset.name, "family": preset.family,
                "created_at": preset.created_at}

    @app.get("/api/tables")
    def tables_text():
        return Response(content=dump_tables(state.tables),
                        media_type="text/plain")

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio")
    return app
