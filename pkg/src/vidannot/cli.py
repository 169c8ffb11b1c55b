"""Command-line interface: fixture, annotate, export, validate, bench, serve.

End-to-end scripting example:

    vidannot fixture --out clip_frames
    vidannot annotate clip_frames prompts.json --out sessions
    vidannot export sessions/<id> --out dataset --archive
    vidannot validate dataset

The prompts file is JSON:

    {
      "classes": ["square"],
      "tracker": "template-ncc",
      "segments": [{"start": 0, "end": 32}],
      "prompts": [
        {"frame": 0, "objects": [
          {"object_id": 1, "class_id": 0,
           "points": [{"x": 20, "y": 15, "polarity": "positive"}],
           "boxes": []}
        ]}
      ]
    }

Point and box coordinates in the file are native pixels.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .errors import ToolError
from .export import export_yolo, package_archive, validate_yolo
from .session import (
    DEFAULT_FRAME_LIMIT,
    classes_from_names,
    create_session,
    declare_segment,
    load_session,
    prompt_frame,
    session_summary,
    track_segment,
)
from .video_io import open_video, synthetic_square_video


def _parse_pair(text: str) -> tuple[int, int]:
    a, b = text.split(",")
    return int(a), int(b)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidannot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="generate the synthetic moving-square test video")
    p.add_argument("--out", required=True, help="output video file or frame directory")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--size", default="128,128", help="width,height")
    p.add_argument("--square", type=int, default=20)
    p.add_argument("--start", default="10,10", help="x,y of the square at frame 0")
    p.add_argument("--velocity", default="2,1", help="dx,dy per frame")
    p.add_argument("--fps", type=float, default=30.0)

    p = sub.add_parser("annotate", help="apply a prompts file to a video and track")
    p.add_argument("video", help="video file or frame directory")
    p.add_argument("prompts", help="JSON prompts file")
    p.add_argument("--out", default="sessions", help="storage root for the session")
    p.add_argument("--backend", default=None, help="segmenter backend override")
    p.add_argument("--tracker", default=None, help="tracker backend override")
    p.add_argument("--max-frames", type=int, default=None, help="frame cap per track run")

    p = sub.add_parser("export", help="export a session as a YOLO dataset")
    p.add_argument("session_dir")
    p.add_argument("--out", required=True, help="destination dataset directory")
    p.add_argument("--stride", type=int, default=1, help="export every Nth tracked frame")
    p.add_argument("--archive", action="store_true", help="also zip the dataset")

    p = sub.add_parser("validate", help="validate a YOLO dataset directory or zip")
    p.add_argument("path")

    p = sub.add_parser("bench", help="benchmark a segmenter backend")
    p.add_argument("--backend", default="region-grow")
    p.add_argument("--config", default="{}", help="backend config as JSON")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--reference", action="store_true", help="include published reference rows")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--storage", default=None, help="storage root (default from env)")

    return parser


def cmd_fixture(args) -> int:
    w, h = _parse_pair(args.size)
    src = synthetic_square_video(
        args.out,
        frame_count=args.frames,
        frame_size=(w, h),
        square_size=args.square,
        start_xy=_parse_pair(args.start),
        velocity=_parse_pair(args.velocity),
        fps=args.fps,
    )
    print(f"wrote {src.frame_count} frames ({src.width}x{src.height}) to {args.out}")
    return 0


def cmd_annotate(args) -> int:
    doc = json.loads(Path(args.prompts).read_text())
    source = open_video(args.video)
    classes = classes_from_names(doc["classes"])
    session = create_session(source, classes, args.out)

    backend = args.backend or doc.get("backend", "region-grow")
    backend_config = doc.get("backend_config", {})
    tracker = args.tracker or doc.get("tracker", "template-ncc")
    tracker_config = doc.get("tracker_config", {})
    max_frames = args.max_frames or doc.get("max_frames", DEFAULT_FRAME_LIMIT)

    for seg in doc.get("segments", []):
        declare_segment(session, seg["start"], seg["end"])

    from .mask import PixelBox
    from .segmentation import BoxPrompt, ObjectPromptSet, PointPrompt

    for entry in doc["prompts"]:
        prompt_sets = []
        assignments = {}
        for obj in entry["objects"]:
            prompt_sets.append(
                ObjectPromptSet(
                    object_id=obj["object_id"],
                    points=tuple(
                        PointPrompt(p["x"], p["y"], p.get("polarity", "positive"))
                        for p in obj.get("points", [])
                    ),
                    boxes=tuple(
                        BoxPrompt(box=PixelBox(b["x0"], b["y0"], b["x1"], b["y1"]))
                        for b in obj.get("boxes", [])
                    ),
                )
            )
            if "class_id" in obj:
                assignments[obj["object_id"]] = obj["class_id"]
        prompt_frame(
            session,
            entry["frame"],
            prompt_sets,
            assignments,
            backend=backend,
            backend_config=backend_config,
        )

    for segment in list(session.segments):
        if segment.status == "pending" and session.seed_at(segment.seed_frame) is not None:
            run = track_segment(
                session,
                segment,
                tracker=tracker,
                tracker_config=tracker_config,
                max_frames=max_frames,
            )
            note = " (truncated)" if run.truncated else ""
            print(f"tracked [{run.start}, {run.end}): {run.processed} frames{note}")

    summary = session_summary(session)
    print(f"session {session.session_id}: {summary['tracked_frames']} tracked frames")
    print(session.directory)
    return 0


def cmd_export(args) -> int:
    session = load_session(args.session_dir)
    manifest = export_yolo(session, args.out, stride=args.stride)
    print(f"exported {manifest.image_count} images, skipped {len(manifest.skipped_frames)}")
    if args.archive:
        archive = package_archive(args.out)
        print(archive)
    else:
        print(args.out)
    return 0


def cmd_validate(args) -> int:
    report = validate_yolo(args.path)
    print(json.dumps(report.to_doc(), indent=2))
    return 0 if report.ok else 1


def cmd_bench(args) -> int:
    config = json.loads(args.config)
    config["name"] = args.backend
    fixture = _bench_frame()
    report = bench_mod.run_benchmark(
        config, fixture, bench_mod.default_bench_prompt(), args.repetitions
    )
    reports = list(bench_mod.REFERENCE_REPORTS) + [report] if args.reference else [report]
    print(bench_mod.render_report(reports).text)
    return 0


def _bench_frame():
    from .api import _bench_fixture

    return _bench_fixture()


def cmd_serve(args) -> int:
    import uvicorn

    from .api import ServiceConfig, create_app

    config = ServiceConfig.from_env()
    if args.storage:
        config.storage_root = Path(args.storage)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


COMMANDS = {
    "fixture": cmd_fixture,
    "annotate": cmd_annotate,
    "export": cmd_export,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ToolError as exc:
        print(json.dumps({"code": exc.code, "message": exc.message}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
