"""HTTP service exposing the annotation workflow.

Thin adapters over the session, export, and bench modules: every route
resolves its session from disk, applies one module operation under the
session's mutation lock, and maps module errors onto a closed set of wire
codes. Prompt coordinates arrive as fractions of frame dimensions and are
converted to pixels here, so clients never need the native resolution.
"""

from __future__ import annotations

import base64
import math
import os
import shutil
import threading
import uuid
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np
from fastapi import Body, FastAPI, File, Form, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel, Field

from . import bench as bench_mod
from .errors import ConfigError, NotFoundError, ToolError
from .jobs import JobManager
from .mask import MaskMap, PixelBox, mask_to_bbox, render_overlay
from .segmentation import (
    BoxPrompt,
    ObjectPromptSet,
    PointPrompt,
    list_segmenters,
)
from .session import (
    DEFAULT_FRAME_LIMIT,
    AnnotationSession,
    classes_from_names,
    correct_and_resume,
    create_session,
    load_session,
    prompt_frame,
    session_summary,
    track_segment,
)
from .tracking import list_trackers
from .video_io import Frame, IMAGE_EXTENSIONS, VIDEO_EXTENSIONS, extract_frames, open_video
from .export import export_yolo, package_archive

STATUS_BY_CODE = {
    "open-error": 400,
    "empty-video-error": 400,
    "write-error": 500,
    "range-error": 400,
    "shape-error": 400,
    "empty-object-error": 400,
    "config-error": 400,
    "load-error": 400,
    "state-error": 409,
    "capability-error": 409,
    "seed-error": 409,
    "export-error": 409,
    "not-found": 404,
    "error": 500,
}


@dataclass
class ServiceConfig:
    storage_root: Path
    frame_limit: int = DEFAULT_FRAME_LIMIT
    max_upload_mb: int = 512
    default_backend: str = "region-grow"
    default_tracker: str = "template-ncc"

    @staticmethod
    def from_env() -> "ServiceConfig":
        return ServiceConfig(
            storage_root=Path(os.environ.get("VIDANNOT_STORAGE_ROOT", "vidannot-data")),
            frame_limit=int(os.environ.get("VIDANNOT_FRAME_LIMIT", DEFAULT_FRAME_LIMIT)),
            max_upload_mb=int(os.environ.get("VIDANNOT_MAX_UPLOAD_MB", 512)),
            default_backend=os.environ.get("VIDANNOT_BACKEND", "region-grow"),
            default_tracker=os.environ.get("VIDANNOT_TRACKER", "template-ncc"),
        )


class PointIn(BaseModel):
    x: float = Field(ge=0.0, le=1.0)
    y: float = Field(ge=0.0, le=1.0)
    polarity: str = "positive"


class BoxIn(BaseModel):
    x0: float = Field(ge=0.0, le=1.0)
    y0: float = Field(ge=0.0, le=1.0)
    x1: float = Field(ge=0.0, le=1.0)
    y1: float = Field(ge=0.0, le=1.0)


class ObjectPromptIn(BaseModel):
    object_id: int
    class_id: int | None = None
    points: list[PointIn] = []
    boxes: list[BoxIn] = []


class PromptRequest(BaseModel):
    frame_index: int
    objects: list[ObjectPromptIn]
    backend: str | None = None
    backend_config: dict = {}


class CorrectionRequest(PromptRequest):
    tracker: str | None = None
    tracker_config: dict = {}


class TrackRequest(BaseModel):
    segment_start: int
    tracker: str | None = None
    tracker_config: dict = {}
    max_frames: int | None = None


class ExportRequest(BaseModel):
    stride: int = 1


class BenchRequest(BaseModel):
    backend: str | dict
    repetitions: int = 3
    include_reference: bool = False


def _point_to_pixels(p: PointIn, width: int, height: int) -> PointPrompt:
    x = min(width - 1, int(math.floor(p.x * width)))
    y = min(height - 1, int(math.floor(p.y * height)))
    return PointPrompt(x=x, y=y, polarity=p.polarity)


def _box_to_pixels(b: BoxIn, width: int, height: int) -> BoxPrompt:
    x0 = min(width - 1, max(0, int(math.floor(b.x0 * width))))
    y0 = min(height - 1, max(0, int(math.floor(b.y0 * height))))
    x1 = max(x0 + 1, min(width, int(math.ceil(b.x1 * width))))
    y1 = max(y0 + 1, min(height, int(math.ceil(b.y1 * height))))
    return BoxPrompt(box=PixelBox(x0=x0, y0=y0, x1=x1, y1=y1))


def _to_prompt_sets(
    objects: list[ObjectPromptIn], width: int, height: int
) -> tuple[list[ObjectPromptSet], dict[int, int]]:
    prompt_sets = []
    assignments = {}
    for obj in objects:
        prompt_sets.append(
            ObjectPromptSet(
                object_id=obj.object_id,
                points=tuple(_point_to_pixels(p, width, height) for p in obj.points),
                boxes=tuple(_box_to_pixels(b, width, height) for b in obj.boxes),
            )
        )
        if obj.class_id is not None:
            assignments[obj.object_id] = obj.class_id
    return prompt_sets, assignments


def _encode_png(rgb: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    if not ok:
        raise ToolError("png encoding failed")
    return buf.tobytes()


def _mask_rle(mask: MaskMap, object_id: int) -> dict:
    """Row-major run-length encoding: alternating background/object run lengths,
    starting with background."""
    flat = mask.pixels_of(object_id).ravel()
    counts = []
    run_value = False
    run_length = 0
    for v in flat:
        if v == run_value:
            run_length += 1
        else:
            counts.append(run_length)
            run_value = v
            run_length = 1
    counts.append(run_length)
    h, w = mask.shape
    return {"size": [h, w], "counts": counts}


def _object_payload(mask: MaskMap, session: AnnotationSession) -> list[dict]:
    out = []
    for object_id in sorted(mask.object_ids):
        present = object_id in mask.present_ids()
        box = None
        if present:
            b = mask_to_bbox(mask, object_id)
            box = [b.x0, b.y0, b.x1, b.y1]
        out.append(
            {
                "object_id": object_id,
                "class_id": session.object_classes.get(object_id),
                "box": box,
                "rle": _mask_rle(mask, object_id) if present else None,
            }
        )
    return out


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    config.storage_root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="vidannot", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = JobManager()
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    def get_session(session_id: str) -> AnnotationSession:
        directory = config.storage_root / session_id
        if not (directory / "session.json").is_file():
            raise NotFoundError(f"no such session {session_id}")
        return load_session(directory)

    @app.exception_handler(ToolError)
    async def tool_error_handler(_request, exc: ToolError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={
                "error": {"code": exc.code, "message": exc.message, "details": exc.details}
            },
        )

    @app.post("/videos")
    def upload_video(file: UploadFile = File(...), classes: str = Form(...)):
        import json as _json

        try:
            names = _json.loads(classes)
        except ValueError as exc:
            raise ConfigError(f"classes must be a JSON list of names: {exc}") from exc
        if not isinstance(names, list):
            raise ConfigError("classes must be a JSON list of names")
        label_classes = classes_from_names(names)

        suffix = Path(file.filename or "upload.mp4").suffix.lower()
        incoming = config.storage_root / "incoming"
        incoming.mkdir(parents=True, exist_ok=True)
        limit = config.max_upload_mb * 1024 * 1024

        if suffix == ".zip":
            tmp_zip = incoming / f"{uuid.uuid4().hex}.zip"
            _save_upload(file, tmp_zip, limit)
            tmp_dir = incoming / tmp_zip.stem
            _extract_frame_archive(tmp_zip, tmp_dir)
            tmp_zip.unlink()
            stored = tmp_dir
        elif suffix in VIDEO_EXTENSIONS:
            stored = incoming / f"{uuid.uuid4().hex}{suffix}"
            _save_upload(file, stored, limit)
        else:
            raise ConfigError(f"unsupported upload type {suffix!r}")

        try:
            source = open_video(stored)
        except ToolError:
            if stored.is_dir():
                shutil.rmtree(stored, ignore_errors=True)
            else:
                stored.unlink(missing_ok=True)
            raise

        session = create_session(source, label_classes, config.storage_root)
        final = session.directory / ("source" if stored.is_dir() else f"source{suffix}")
        shutil.move(str(stored), str(final))
        session.source = replace(source, locator=str(final))
        session.save()
        return {
            "session_id": session.session_id,
            "width": source.width,
            "height": source.height,
            "frame_count": source.frame_count,
            "fps": source.fps,
        }

    @app.get("/sessions/{session_id}")
    def get_summary(session_id: str):
        return session_summary(get_session(session_id))

    @app.get("/sessions/{session_id}/frames/{index}")
    def get_frame(session_id: str, index: int):
        session = get_session(session_id)
        frame = extract_frames(session.source, index, index + 1)[0]
        return Response(content=_encode_png(frame.pixels), media_type="image/png")

    @app.get("/sessions/{session_id}/previews/{index}")
    def get_preview(session_id: str, index: int, alpha: float = 0.5):
        session = get_session(session_id)
        mask = session.mask_at(index)
        if mask is None:
            raise NotFoundError(f"frame {index} has no stored mask")
        frame = extract_frames(session.source, index, index + 1)[0]
        overlay = render_overlay(frame, mask, alpha)
        return Response(content=_encode_png(overlay.pixels), media_type="image/png")

    @app.post("/sessions/{session_id}/prompts")
    def post_prompts(session_id: str, req: PromptRequest):
        session = get_session(session_id)
        prompt_sets, assignments = _to_prompt_sets(
            req.objects, session.source.width, session.source.height
        )
        with session_lock(session_id):
            mask = prompt_frame(
                session,
                req.frame_index,
                prompt_sets,
                assignments,
                backend=req.backend or config.default_backend,
                backend_config=req.backend_config,
            )
        frame = extract_frames(session.source, req.frame_index, req.frame_index + 1)[0]
        overlay = render_overlay(frame, mask, 0.5)
        ok, label_png = cv2.imencode(".png", mask.labels)
        if not ok:
            raise ToolError("png encoding failed")
        return {
            "frame_index": req.frame_index,
            "overlay_png": base64.b64encode(_encode_png(overlay.pixels)).decode(),
            "mask_png": base64.b64encode(label_png.tobytes()).decode(),
            "objects": _object_payload(mask, session),
        }

    @app.post("/sessions/{session_id}/track")
    def post_track(session_id: str, req: TrackRequest):
        session = get_session(session_id)
        segment = session.segment_starting_at(req.segment_start)
        if segment is None:
            raise NotFoundError(f"no segment starting at frame {req.segment_start}")
        tracker = req.tracker or config.default_tracker
        max_frames = req.max_frames or config.frame_limit
        key = (session_id, segment.start, segment.end, tracker)

        def work(job):
            def on_progress(done, total):
                job.progress = done / total

            with session_lock(session_id):
                fresh = get_session(session_id)
                seg = fresh.segment_starting_at(req.segment_start)
                run = track_segment(
                    fresh,
                    seg,
                    tracker=tracker,
                    tracker_config=req.tracker_config,
                    max_frames=max_frames,
                    progress=on_progress,
                    cancel=job.cancel_event.is_set,
                )
            return {
                "start": run.start,
                "end": run.end,
                "processed": run.processed,
                "truncated": run.truncated,
                "cancelled": run.cancelled,
            }

        job = jobs.submit(key, work)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return jobs.get(job_id).to_doc()

    @app.post("/jobs/{job_id}/cancel")
    def cancel_job(job_id: str):
        return jobs.cancel(job_id).to_doc()

    @app.post("/sessions/{session_id}/corrections")
    def post_correction(session_id: str, req: CorrectionRequest):
        session = get_session(session_id)
        prompt_sets, assignments = _to_prompt_sets(
            req.objects, session.source.width, session.source.height
        )
        with session_lock(session_id):
            correct_and_resume(
                session,
                req.frame_index,
                prompt_sets,
                assignments,
                backend=req.backend or config.default_backend,
                backend_config=req.backend_config,
                tracker=req.tracker or config.default_tracker,
                tracker_config=req.tracker_config,
            )
        segment = session.segment_containing(req.frame_index)
        return {
            "frame_index": req.frame_index,
            "resumed_through": segment.end if segment else req.frame_index + 1,
        }

    @app.post("/sessions/{session_id}/export")
    def post_export(session_id: str, req: ExportRequest | None = Body(default=None)):
        req = req or ExportRequest()
        session = get_session(session_id)
        with session_lock(session_id):
            exports_root = session.directory / "exports"
            exports_root.mkdir(exist_ok=True)
            n = len(list(exports_root.glob("dataset-*"))) + 1
            dest = exports_root / f"dataset-{n:03d}"
            export_yolo(session, dest, stride=req.stride)
            archive = package_archive(dest)
        return FileResponse(
            archive, media_type="application/zip", filename=f"{session_id}-dataset.zip"
        )

    @app.get("/backends")
    def get_backends():
        return {
            "segmenters": [
                {"name": d.name, "supported_prompts": sorted(d.supported_prompts)}
                for d in list_segmenters()
            ],
            "trackers": [
                {"name": d.name, "supports_reseed": d.supports_reseed}
                for d in list_trackers()
            ],
        }

    @app.post("/bench")
    def post_bench(req: BenchRequest):
        fixture = _bench_fixture()
        report = bench_mod.run_benchmark(
            req.backend, fixture, bench_mod.default_bench_prompt(), req.repetitions
        )
        reports = [report]
        if req.include_reference:
            reports = list(bench_mod.REFERENCE_REPORTS) + reports
        table = bench_mod.render_report(reports)
        return {"report": report.to_doc(), "table": table.to_doc(), "text": table.text}

    return app


def _bench_fixture() -> Frame:
    rgb = np.full((256, 256, 3), (16, 16, 16), np.uint8)
    rgb[96:160, 96:160] = (220, 40, 40)
    return Frame(index=0, timestamp=0.0, pixels=rgb)


def _save_upload(file: UploadFile, path: Path, limit: int) -> None:
    written = 0
    with path.open("wb") as out:
        while True:
            chunk = file.file.read(1 << 20)
            if not chunk:
                break
            written += len(chunk)
            if written > limit:
                out.close()
                path.unlink(missing_ok=True)
                raise ConfigError(f"upload exceeds {limit // (1024 * 1024)} MiB limit")
            out.write(chunk)


def _extract_frame_archive(zip_path: Path, dest: Path) -> None:
    """Unpack a zip of images into a flat frame directory (names sanitized)."""
    dest.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(zip_path) as zf:
        members = [
            m
            for m in zf.namelist()
            if Path(m).suffix.lower() in IMAGE_EXTENSIONS and not m.endswith("/")
        ]
        if not members:
            raise ConfigError("zip upload contains no image frames")
        for member in sorted(members):
            name = Path(member).name  # flatten; ignores any archive paths
            with zf.open(member) as src, (dest / name).open("wb") as out:
                shutil.copyfileobj(src, out)
