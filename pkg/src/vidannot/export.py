"""YOLO-format dataset export, archive packaging, and layout validation.

Layout written by export_yolo:

    classes.txt            one class name per line, line i = class id i
    images/<stem>_<frame, 6 digits>.jpg
    labels/<stem>_<frame, 6 digits>.txt   lines: "class cx cy w h", 6 decimals
    manifest.json          counts, classes, skipped frames

Frames whose masks hold no objects are skipped entirely and listed in the
manifest rather than producing empty label files.
"""

from __future__ import annotations

import json
import re
import tempfile
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2

from .errors import ExportError, WriteError
from .mask import YOLO_EPS, bbox_to_yolo, format_yolo_line, mask_to_bbox
from .session import AnnotationSession, LabelClass
from .video_io import extract_frames

JPEG_QUALITY = 95


@dataclass(frozen=True)
class ExportManifest:
    image_count: int
    label_count: int
    classes: list[LabelClass]
    skipped_frames: list[dict]
    stem: str

    def to_doc(self) -> dict:
        return {
            "image_count": self.image_count,
            "label_count": self.label_count,
            "classes": [asdict(c) for c in self.classes],
            "skipped_frames": self.skipped_frames,
            "stem": self.stem,
        }


def _stem_for(session: AnnotationSession) -> str:
    stem = Path(session.source.locator).stem or "frames"
    return re.sub(r"[^A-Za-z0-9_-]+", "_", stem)


def export_yolo(
    session: AnnotationSession,
    destination: str | Path,
    stride: int = 1,
    jpeg_quality: int = JPEG_QUALITY,
) -> ExportManifest:
    """Write the session's tracked frames as a YOLO detection dataset."""
    tracked = session.tracked_frames()[::stride] if stride > 1 else session.tracked_frames()
    if not tracked:
        raise ExportError("session has no tracked frames to export")

    dest = Path(destination)
    try:
        (dest / "images").mkdir(parents=True, exist_ok=True)
        (dest / "labels").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(f"cannot create export layout at {destination}: {exc}") from exc

    stem = _stem_for(session)
    width, height = session.source.width, session.source.height
    skipped: list[dict] = []
    written = 0

    for frame_index in tracked:
        mask = session.mask_at(frame_index)
        assert mask is not None
        object_ids = sorted(mask.present_ids())
        if not object_ids:
            skipped.append({"frame": frame_index, "reason": "no visible objects"})
            continue

        frame = extract_frames(session.source, frame_index, frame_index + 1)[0]
        name = f"{stem}_{frame_index:06d}"
        bgr = cv2.cvtColor(frame.pixels, cv2.COLOR_RGB2BGR)
        ok = cv2.imwrite(
            str(dest / "images" / f"{name}.jpg"),
            bgr,
            [cv2.IMWRITE_JPEG_QUALITY, jpeg_quality],
        )
        if not ok:
            raise WriteError(f"cannot write image for frame {frame_index}")

        lines = []
        for object_id in object_ids:
            class_id = session.object_classes[object_id]
            box = mask_to_bbox(mask, object_id)
            lines.append(format_yolo_line(bbox_to_yolo(box, width, height, class_id)))
        (dest / "labels" / f"{name}.txt").write_text("\n".join(lines) + "\n")
        written += 1

    (dest / "classes.txt").write_text(
        "\n".join(c.name for c in session.classes) + "\n"
    )
    manifest = ExportManifest(
        image_count=written,
        label_count=written,
        classes=list(session.classes),
        skipped_frames=skipped,
        stem=stem,
    )
    (dest / "manifest.json").write_text(json.dumps(manifest.to_doc(), indent=2) + "\n")
    return manifest


def _check_layout(root: Path) -> None:
    classes = root / "classes.txt"
    if not classes.is_file() or not classes.read_text().strip():
        raise ExportError(f"missing or empty classes.txt at {root}")
    for sub in ("images", "labels"):
        d = root / sub
        if not d.is_dir() or not any(d.iterdir()):
            raise ExportError(f"missing or empty {sub}/ at {root}")


def package_archive(exported: str | Path) -> Path:
    """Zip a validated export layout, preserving relative paths."""
    root = Path(exported)
    _check_layout(root)
    archive = root.with_suffix(".zip")
    with zipfile.ZipFile(archive, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in sorted(root.rglob("*")):
            if path.is_file():
                zf.write(path, path.relative_to(root).as_posix())
    return archive


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    image_count: int = 0
    label_count: int = 0
    class_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_doc(self) -> dict:
        return {
            "ok": self.ok,
            "violations": self.violations,
            "image_count": self.image_count,
            "label_count": self.label_count,
            "class_count": self.class_count,
        }


_LABEL_LINE = re.compile(r"^(\d+) (\S+) (\S+) (\S+) (\S+)$")


def validate_yolo(locator: str | Path) -> ValidationReport:
    """Check a dataset layout; every problem becomes a report entry, not an error."""
    path = Path(locator)
    if path.is_file() and path.suffix == ".zip":
        with tempfile.TemporaryDirectory() as tmp:
            with zipfile.ZipFile(path) as zf:
                zf.extractall(tmp)
            return validate_yolo(tmp)

    report = ValidationReport()
    classes_file = path / "classes.txt"
    class_count = 0
    if not classes_file.is_file():
        report.violations.append("classes.txt missing")
    else:
        names = [ln for ln in classes_file.read_text().splitlines() if ln.strip()]
        class_count = len(names)
        if not names:
            report.violations.append("classes.txt is empty")
    report.class_count = class_count

    images = path / "images"
    labels = path / "labels"
    image_stems = {p.stem for p in images.glob("*") if p.is_file()} if images.is_dir() else set()
    label_stems = {p.stem for p in labels.glob("*.txt")} if labels.is_dir() else set()
    report.image_count = len(image_stems)
    report.label_count = len(label_stems)
    for stem in sorted(image_stems - label_stems):
        report.violations.append(f"image {stem} has no label file")
    for stem in sorted(label_stems - image_stems):
        report.violations.append(f"label {stem} has no image file")

    if labels.is_dir():
        for label_file in sorted(labels.glob("*.txt")):
            for line_no, line in enumerate(label_file.read_text().splitlines(), 1):
                where = f"{label_file.name}:{line_no}"
                m = _LABEL_LINE.match(line)
                if not m:
                    report.violations.append(f"{where}: malformed line {line!r}")
                    continue
                class_id = int(m.group(1))
                if class_id >= class_count:
                    report.violations.append(
                        f"{where}: class id {class_id} >= class count {class_count}"
                    )
                for token in m.groups()[1:]:
                    try:
                        value = float(token)
                    except ValueError:
                        report.violations.append(f"{where}: non-numeric value {token!r}")
                        continue
                    if not (-YOLO_EPS <= value <= 1.0 + YOLO_EPS):
                        report.violations.append(
                            f"{where}: value {token} outside [0, 1]"
                        )
    return report
