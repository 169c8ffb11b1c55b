"""Annotation sessions: prompt, track, correct, persist, replay.

A session is a directory: a JSON metadata document plus one losslessly
compressed 16-bit label image per tracked frame. The history list inside the
metadata is an append-only event log; replaying it against the same
deterministic backends reproduces every stored mask byte for byte.
"""

from __future__ import annotations

import inspect
import json
import os
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import cv2
import numpy as np

from .errors import (
    CapabilityError,
    ConfigError,
    FrameRangeError,
    SeedError,
    WriteError,
)
from .mask import MaskMap, compose_label_map
from .segmentation import (
    BoxPrompt,
    ObjectPromptSet,
    PointPrompt,
    create_segmenter,
)
from .tracking import (
    PropagationCancelled,
    PropagationRequest,
    create_tracker,
    tracker_descriptor,
)
from .video_io import VideoSource, extract_frames

SESSION_SCHEMA = "annotation-session/v1"

# Ceiling on frames processed by one track call, mirroring the hosted demo's
# 100-frame output; overridable per call and via service configuration.
DEFAULT_FRAME_LIMIT = 100

DEFAULT_SEGMENTER = "region-grow"
DEFAULT_TRACKER = "template-ncc"


@dataclass(frozen=True)
class LabelClass:
    class_id: int
    name: str


@dataclass
class Segment:
    """A disjoint frame range annotated as one piece."""

    start: int
    end: int
    seed_frame: int
    status: str = "pending"

    def contains(self, frame_index: int) -> bool:
        return self.start <= frame_index < self.end


@dataclass(frozen=True)
class TrackRun:
    """Outcome of one track call, for progress reporting and truncation."""

    start: int
    end: int
    processed: int
    truncated: bool
    cancelled: bool = False


def validate_classes(classes: Sequence[LabelClass]) -> None:
    if not classes:
        raise ConfigError("at least one label class is required")
    ids = [c.class_id for c in classes]
    if ids != list(range(len(classes))):
        raise ConfigError(f"class ids must be contiguous from 0, got {ids}")
    names = [c.name for c in classes]
    if any(not n for n in names):
        raise ConfigError("class names must be nonempty")
    if len(set(names)) != len(names):
        raise ConfigError("class names must be unique")


def classes_from_names(names: Sequence[str]) -> list[LabelClass]:
    classes = [LabelClass(class_id=i, name=n) for i, n in enumerate(names)]
    validate_classes(classes)
    return classes


class AnnotationSession:
    """All annotation state for one video, bound to its on-disk directory."""

    def __init__(
        self,
        session_id: str,
        source: VideoSource,
        classes: list[LabelClass],
        directory: Path,
    ):
        self.session_id = session_id
        self.source = source
        self.classes = classes
        self.directory = directory
        self.object_classes: dict[int, int] = {}
        self.segments: list[Segment] = []
        self.history: list[dict] = []

    # ------------------------------------------------------------- storage

    @property
    def masks_dir(self) -> Path:
        return self.directory / "masks"

    @property
    def seeds_dir(self) -> Path:
        return self.directory / "seeds"

    def mask_path(self, frame_index: int) -> Path:
        return self.masks_dir / f"{frame_index:06d}.png"

    def seed_path(self, frame_index: int) -> Path:
        return self.seeds_dir / f"{frame_index:06d}.png"

    def mask_at(self, frame_index: int) -> MaskMap | None:
        return _load_label_png(self.mask_path(frame_index))

    def seed_at(self, frame_index: int) -> MaskMap | None:
        return _load_label_png(self.seed_path(frame_index))

    def tracked_frames(self) -> list[int]:
        if not self.masks_dir.is_dir():
            return []
        return sorted(int(p.stem) for p in self.masks_dir.glob("*.png"))

    def save(self) -> None:
        doc = {
            "schema": SESSION_SCHEMA,
            "session_id": self.session_id,
            "source": asdict(self.source),
            "classes": [asdict(c) for c in self.classes],
            "object_classes": {str(k): v for k, v in sorted(self.object_classes.items())},
            "segments": [asdict(s) for s in self.segments],
            "history": self.history,
        }
        self.directory.mkdir(parents=True, exist_ok=True)
        tmp = self.directory / "session.json.tmp"
        tmp.write_text(json.dumps(doc, indent=2) + "\n")
        os.replace(tmp, self.directory / "session.json")

    # ------------------------------------------------------------- queries

    def segment_containing(self, frame_index: int) -> Segment | None:
        for seg in self.segments:
            if seg.contains(frame_index):
                return seg
        return None

    def segment_starting_at(self, start: int) -> Segment | None:
        for seg in self.segments:
            if seg.start == start:
                return seg
        return None

    def class_ids(self) -> set[int]:
        return {c.class_id for c in self.classes}


def create_session(
    source: VideoSource, classes: Sequence[LabelClass], storage_root: Path | str
) -> AnnotationSession:
    """Create and persist an empty session under a fresh unique directory."""
    validate_classes(classes)
    root = Path(storage_root)
    root.mkdir(parents=True, exist_ok=True)
    while True:
        session_id = uuid.uuid4().hex[:12]
        directory = root / session_id
        if not directory.exists():
            break
    session = AnnotationSession(session_id, source, list(classes), directory)
    session.save()
    return session


def load_session(directory: Path | str) -> AnnotationSession:
    directory = Path(directory)
    doc_path = directory / "session.json"
    if not doc_path.is_file():
        raise ConfigError(f"not a session directory: {directory}")
    doc = json.loads(doc_path.read_text())
    source = VideoSource(**doc["source"])
    classes = [LabelClass(**c) for c in doc["classes"]]
    session = AnnotationSession(doc["session_id"], source, classes, directory)
    session.object_classes = {int(k): v for k, v in doc["object_classes"].items()}
    session.segments = [Segment(**s) for s in doc["segments"]]
    session.history = doc["history"]
    return session


# ---------------------------------------------------------------- operations


def declare_segment(session: AnnotationSession, start: int, end: int) -> Segment:
    """Pre-declare a pending segment so later prompts stay within its bounds."""
    if not (0 <= start < end <= session.source.frame_count):
        raise FrameRangeError(f"segment [{start}, {end}) outside video")
    for seg in session.segments:
        if seg.start < end and start < seg.end:
            raise ConfigError(f"segment [{start}, {end}) overlaps [{seg.start}, {seg.end})")
    segment = Segment(start=start, end=end, seed_frame=start)
    session.segments.append(segment)
    session.segments.sort(key=lambda s: s.start)
    session.history.append({"type": "declare_segment", "start": start, "end": end})
    session.save()
    return segment


def prompt_frame(
    session: AnnotationSession,
    frame_index: int,
    prompt_sets: Sequence[ObjectPromptSet],
    assignments: Mapping[int, int],
    backend: str = DEFAULT_SEGMENTER,
    backend_config: Mapping | None = None,
) -> MaskMap:
    """Run the segmenter on one frame and store the result as a segment seed.

    Prompting a frame outside every existing segment opens a new pending
    segment reaching to the next segment boundary or the end of the video.
    Re-prompting replaces the segment's seed; on an already-tracked segment it
    also discards that segment's masks and returns it to pending.
    """
    if not (0 <= frame_index < session.source.frame_count):
        raise FrameRangeError(f"frame {frame_index} outside video")
    for object_id, class_id in assignments.items():
        if class_id not in session.class_ids():
            raise ConfigError(f"object {object_id} assigned to unknown class {class_id}")
    for ps in prompt_sets:
        if ps.object_id not in assignments and ps.object_id not in session.object_classes:
            raise ConfigError(f"object {ps.object_id} has no class assignment")

    segment = session.segment_containing(frame_index)
    if segment is None:
        later = [s.start for s in session.segments if s.start > frame_index]
        end = min(later) if later else session.source.frame_count
        segment = Segment(start=frame_index, end=end, seed_frame=frame_index)
        session.segments.append(segment)
        session.segments.sort(key=lambda s: s.start)
    else:
        if segment.status == "tracked":
            _clear_segment_masks(session, segment)
            segment.status = "pending"
        old_seed = session.seed_path(segment.seed_frame)
        if segment.seed_frame != frame_index and old_seed.exists():
            old_seed.unlink()
        segment.seed_frame = frame_index

    frame = extract_frames(session.source, frame_index, frame_index + 1)[0]
    config = dict(backend_config or {})
    config["name"] = backend
    segmenter = create_segmenter(config)
    segmenter.set_image(frame)
    mask = segmenter.predict(list(prompt_sets))

    session.object_classes.update(assignments)
    _save_label_png(session.seed_path(frame_index), mask)
    session.history.append(
        {
            "type": "prompt",
            "frame": frame_index,
            "objects": [_prompt_set_to_doc(ps) for ps in prompt_sets],
            "assignments": {str(k): v for k, v in assignments.items()},
            "backend": {"name": backend, "config": dict(backend_config or {})},
        }
    )
    session.save()
    return mask


def track_segment(
    session: AnnotationSession,
    segment: Segment,
    tracker: str = DEFAULT_TRACKER,
    tracker_config: Mapping | None = None,
    max_frames: int = DEFAULT_FRAME_LIMIT,
    progress: Callable[[int, int], None] | None = None,
    cancel: Callable[[], bool] | None = None,
) -> TrackRun:
    """Propagate a segment's seed mask across its frames and store the results.

    Processing is capped at ``max_frames``; a longer segment is split, the
    tracked head keeping the seed and the remainder staying pending. Masks are
    committed atomically: a cancelled run leaves no partial state.
    """
    if segment not in session.segments:
        raise ConfigError("segment does not belong to this session")
    if max_frames < 1:
        raise ConfigError(f"max_frames must be >= 1, got {max_frames}")
    seed = session.seed_at(segment.seed_frame)
    if seed is None:
        raise SeedError(f"segment at {segment.start} has no seed mask")

    original_end = segment.end
    truncated = segment.end - segment.start > max_frames
    end = min(segment.end, segment.start + max_frames)
    if segment.seed_frame >= end:
        raise ConfigError(
            f"seed frame {segment.seed_frame} falls outside the {max_frames}-frame window"
        )

    frames = extract_frames(session.source, segment.start, end)
    config = dict(tracker_config or {})
    config["name"] = tracker
    handle = create_tracker(config)
    request = PropagationRequest(
        frames=tuple(frames),
        seed_index=segment.seed_frame - segment.start,
        seed_mask=seed,
    )
    try:
        outputs = _propagate(handle, request, progress, cancel)
    except PropagationCancelled:
        session.history.append(
            {"type": "track_cancelled", "start": segment.start, "tracker": {"name": tracker}}
        )
        session.save()
        return TrackRun(segment.start, end, processed=0, truncated=truncated, cancelled=True)

    for offset, mask in enumerate(outputs):
        _save_label_png(session.mask_path(segment.start + offset), mask)
    if truncated:
        segment.end = end
        remainder = Segment(start=end, end=original_end, seed_frame=end)
        session.segments.append(remainder)
        session.segments.sort(key=lambda s: s.start)
    segment.status = "tracked"
    session.history.append(
        {
            "type": "track",
            "start": segment.start,
            "tracker": {"name": tracker, "config": dict(tracker_config or {})},
            "max_frames": max_frames,
        }
    )
    session.save()
    return TrackRun(segment.start, end, processed=len(outputs), truncated=truncated)


def correct_and_resume(
    session: AnnotationSession,
    frame_index: int,
    prompt_sets: Sequence[ObjectPromptSet],
    assignments: Mapping[int, int] | None = None,
    backend: str = DEFAULT_SEGMENTER,
    backend_config: Mapping | None = None,
    tracker: str = DEFAULT_TRACKER,
    tracker_config: Mapping | None = None,
) -> None:
    """Re-prompt one tracked frame and re-propagate the rest of its segment.

    Frames before the corrected one are left untouched. Objects not mentioned
    in the correction keep their existing pixels at the corrected frame and
    are re-propagated alongside the corrected ones.
    """
    assignments = dict(assignments or {})
    segment = session.segment_containing(frame_index)
    if segment is None or segment.status != "tracked":
        raise FrameRangeError(f"frame {frame_index} is not inside a tracked segment")
    descriptor = tracker_descriptor(tracker)
    if not descriptor.supports_reseed:
        raise CapabilityError(f"tracker {tracker!r} does not support reseeding")
    for object_id, class_id in assignments.items():
        if class_id not in session.class_ids():
            raise ConfigError(f"object {object_id} assigned to unknown class {class_id}")
    for ps in prompt_sets:
        if ps.object_id not in assignments and ps.object_id not in session.object_classes:
            raise ConfigError(f"object {ps.object_id} has no class assignment")

    frame = extract_frames(session.source, frame_index, frame_index + 1)[0]
    config = dict(backend_config or {})
    config["name"] = backend
    segmenter = create_segmenter(config)
    segmenter.set_image(frame)
    corrected = segmenter.predict(list(prompt_sets))

    existing = session.mask_at(frame_index)
    per_object: dict[int, np.ndarray] = {}
    if existing is not None:
        for object_id in existing.present_ids():
            if object_id not in corrected.object_ids:
                per_object[object_id] = existing.pixels_of(object_id)
    for object_id in corrected.object_ids:
        per_object[object_id] = corrected.pixels_of(object_id)
    merged = compose_label_map(per_object, corrected.shape)

    frames = extract_frames(session.source, frame_index, segment.end)
    handle = create_tracker({"name": tracker, **dict(tracker_config or {})})
    outputs = handle.propagate(
        PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=merged)
    )
    for offset, mask in enumerate(outputs):
        _save_label_png(session.mask_path(frame_index + offset), mask)

    session.object_classes.update(assignments)
    session.history.append(
        {
            "type": "correct",
            "frame": frame_index,
            "objects": [_prompt_set_to_doc(ps) for ps in prompt_sets],
            "assignments": {str(k): v for k, v in assignments.items()},
            "backend": {"name": backend, "config": dict(backend_config or {})},
            "tracker": {"name": tracker, "config": dict(tracker_config or {})},
        }
    )
    session.save()


def session_summary(session: AnnotationSession) -> dict:
    per_class: dict[int, int] = {c.class_id: 0 for c in session.classes}
    for class_id in session.object_classes.values():
        per_class[class_id] += 1
    return {
        "session_id": session.session_id,
        "source": asdict(session.source),
        "classes": [asdict(c) for c in session.classes],
        "segment_count": len(session.segments),
        "segments": [asdict(s) for s in session.segments],
        "tracked_frames": len(session.tracked_frames()),
        "objects_per_class": per_class,
    }


def replay_session(
    session: AnnotationSession, storage_root: Path | str
) -> AnnotationSession:
    """Re-run a session's event history from scratch into a new directory."""
    replayed = create_session(session.source, session.classes, storage_root)
    for event in session.history:
        _apply_event(replayed, event)
    return replayed


def _apply_event(session: AnnotationSession, event: dict) -> None:
    kind = event["type"]
    if kind == "prompt":
        prompt_frame(
            session,
            event["frame"],
            [_prompt_set_from_doc(d) for d in event["objects"]],
            {int(k): v for k, v in event["assignments"].items()},
            backend=event["backend"]["name"],
            backend_config=event["backend"]["config"],
        )
    elif kind == "track":
        segment = session.segment_starting_at(event["start"])
        if segment is None:
            raise ConfigError(f"history references unknown segment at {event['start']}")
        track_segment(
            session,
            segment,
            tracker=event["tracker"]["name"],
            tracker_config=event["tracker"]["config"],
            max_frames=event["max_frames"],
        )
    elif kind == "correct":
        correct_and_resume(
            session,
            event["frame"],
            [_prompt_set_from_doc(d) for d in event["objects"]],
            {int(k): v for k, v in event["assignments"].items()},
            backend=event["backend"]["name"],
            backend_config=event["backend"]["config"],
            tracker=event["tracker"]["name"],
            tracker_config=event["tracker"]["config"],
        )
    elif kind == "declare_segment":
        declare_segment(session, event["start"], event["end"])
    elif kind == "track_cancelled":
        pass  # cancelled runs left no state behind
    else:
        raise ConfigError(f"unknown history event type {kind!r}")


# ------------------------------------------------------------------ helpers


def _propagate(handle, request, progress, cancel):
    """Call propagate with per-frame callbacks when the backend accepts them."""
    params = inspect.signature(handle.propagate).parameters
    if "on_frame" in params:
        return handle.propagate(request, on_frame=progress, cancel=cancel)
    if cancel and cancel():
        raise PropagationCancelled()
    outputs = handle.propagate(request)
    if progress:
        progress(len(outputs), len(outputs))
    return outputs


def _clear_segment_masks(session: AnnotationSession, segment: Segment) -> None:
    for index in range(segment.start, segment.end):
        path = session.mask_path(index)
        if path.exists():
            path.unlink()


def _save_label_png(path: Path, mask: MaskMap) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), mask.labels):
        raise WriteError(f"cannot write label image {path}")


def _load_label_png(path: Path) -> MaskMap | None:
    if not path.is_file():
        return None
    labels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if labels is None:
        raise WriteError(f"unreadable label image {path}")
    return MaskMap.from_labels(labels.astype(np.uint16))


def _prompt_set_to_doc(ps: ObjectPromptSet) -> dict:
    return {
        "object_id": ps.object_id,
        "points": [{"x": p.x, "y": p.y, "polarity": p.polarity} for p in ps.points],
        "boxes": [
            {"x0": b.box.x0, "y0": b.box.y0, "x1": b.box.x1, "y1": b.box.y1}
            for b in ps.boxes
        ],
    }


def _prompt_set_from_doc(doc: dict) -> ObjectPromptSet:
    from .mask import PixelBox

    return ObjectPromptSet(
        object_id=doc["object_id"],
        points=tuple(PointPrompt(**p) for p in doc["points"]),
        boxes=tuple(BoxPrompt(box=PixelBox(**b)) for b in doc["boxes"]),
    )
