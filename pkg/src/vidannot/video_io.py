"""Video decoding, frame sampling, and preview encoding.

Two kinds of locator are supported: a video container readable by OpenCV, or
a directory of images (sorted lexicographically) used as a container-free,
lossless source for tests and fixtures. Frames are always decoded to 8-bit
RGB and addressed by decode ordinal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .errors import EmptyVideoError, FrameRangeError, OpenError, ShapeError, WriteError

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}
VIDEO_EXTENSIONS = {".mp4", ".avi", ".mkv", ".mov", ".webm"}

DEFAULT_SEQUENCE_FPS = 30.0


@dataclass(frozen=True)
class VideoSource:
    """Metadata for an opened video or image sequence."""

    locator: str
    width: int
    height: int
    frame_count: int
    fps: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise OpenError(f"invalid dimensions {self.width}x{self.height}")
        if self.frame_count < 1:
            raise EmptyVideoError(f"no frames in {self.locator}")
        if self.fps <= 0:
            raise OpenError(f"invalid fps {self.fps}")


@dataclass(frozen=True, eq=False)
class Frame:
    """One decoded frame: 8-bit RGB pixels plus its decode ordinal."""

    index: int
    timestamp: float
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3 or self.pixels.dtype != np.uint8:
            raise ShapeError("frame pixels must be HxWx3 uint8")
        self.pixels.setflags(write=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _is_image_dir(path: Path) -> bool:
    return path.is_dir()


def _list_sequence(path: Path) -> list[Path]:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    return files


def open_video(locator: str | Path) -> VideoSource:
    """Open a video file or image-sequence directory and read its metadata.

    No frames are decoded beyond what is needed to establish dimensions.
    """
    path = Path(locator)
    if not path.exists():
        raise OpenError(f"no such file or directory: {locator}")

    if _is_image_dir(path):
        files = _list_sequence(path)
        if not files:
            raise EmptyVideoError(f"no images in directory {locator}")
        first = cv2.imread(str(files[0]), cv2.IMREAD_COLOR)
        if first is None:
            raise OpenError(f"unreadable image {files[0]}")
        h, w = first.shape[:2]
        return VideoSource(str(path), w, h, len(files), DEFAULT_SEQUENCE_FPS)

    cap = cv2.VideoCapture(str(path))
    try:
        if not cap.isOpened():
            raise OpenError(f"unreadable video {locator}")
        width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
        height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
        fps = float(cap.get(cv2.CAP_PROP_FPS)) or DEFAULT_SEQUENCE_FPS
        count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        if count <= 0:
            # Some containers misreport; fall back to counting decoded frames.
            count = 0
            while cap.grab():
                count += 1
        if count < 1:
            raise EmptyVideoError(f"no frames in {locator}")
        if width <= 0 or height <= 0:
            ok, probe = cv2.VideoCapture(str(path)).read()
            if not ok:
                raise OpenError(f"unreadable video {locator}")
            height, width = probe.shape[:2]
        return VideoSource(str(path), width, height, count, fps)
    finally:
        cap.release()


def extract_frames(
    src: VideoSource, start: int, end: int, stride: int = 1
) -> list[Frame]:
    """Decode frames at indices start, start+stride, ... below end.

    Decoding is sequential from the container start so that repeated calls
    produce byte-identical pixel buffers regardless of codec seek behavior.
    """
    if stride < 1:
        raise FrameRangeError(f"stride must be >= 1, got {stride}")
    if not (0 <= start < end <= src.frame_count):
        raise FrameRangeError(
            f"range [{start}, {end}) invalid for {src.frame_count} frames"
        )

    wanted = list(range(start, end, stride))
    path = Path(src.locator)
    if _is_image_dir(path):
        files = _list_sequence(path)
        frames = []
        for idx in wanted:
            bgr = cv2.imread(str(files[idx]), cv2.IMREAD_COLOR)
            if bgr is None:
                raise OpenError(f"unreadable image {files[idx]}")
            frames.append(_make_frame(idx, idx / src.fps, bgr, src))
        return frames

    cap = cv2.VideoCapture(str(path))
    try:
        if not cap.isOpened():
            raise OpenError(f"unreadable video {src.locator}")
        frames = []
        wanted_set = set(wanted)
        for idx in range(0, wanted[-1] + 1):
            ts_ms = cap.get(cv2.CAP_PROP_POS_MSEC)
            ok, bgr = cap.read()
            if not ok:
                raise OpenError(f"decode failed at frame {idx} of {src.locator}")
            if idx in wanted_set:
                timestamp = ts_ms / 1000.0 if ts_ms > 0 or idx == 0 else idx / src.fps
                frames.append(_make_frame(idx, timestamp, bgr, src))
        return frames
    finally:
        cap.release()


def _make_frame(index: int, timestamp: float, bgr: np.ndarray, src: VideoSource) -> Frame:
    if bgr.shape[0] != src.height or bgr.shape[1] != src.width:
        raise ShapeError(
            f"frame {index} is {bgr.shape[1]}x{bgr.shape[0]}, "
            f"source is {src.width}x{src.height}"
        )
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    return Frame(index=index, timestamp=timestamp, pixels=rgb)


def write_preview(frames: Sequence[Frame], locator: str | Path, fps: float = DEFAULT_SEQUENCE_FPS) -> None:
    """Write overlaid frames as a playable video or an image sequence.

    A locator with a known video extension produces a video file; anything
    else is treated as a directory and receives one PNG per frame.
    """
    if not frames:
        raise WriteError("nothing to encode: empty frame sequence")
    h, w = frames[0].pixels.shape[:2]
    for f in frames:
        if f.pixels.shape[:2] != (h, w):
            raise ShapeError("preview frames must share dimensions")

    path = Path(locator)
    if path.suffix.lower() in VIDEO_EXTENSIONS:
        path.parent.mkdir(parents=True, exist_ok=True)
        fourcc = cv2.VideoWriter_fourcc(*"mp4v")
        writer = cv2.VideoWriter(str(path), fourcc, fps, (w, h))
        if not writer.isOpened():
            raise WriteError(f"cannot open video writer for {locator}")
        try:
            for f in frames:
                writer.write(cv2.cvtColor(f.pixels, cv2.COLOR_RGB2BGR))
        finally:
            writer.release()
        return

    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(f"cannot create directory {locator}: {exc}") from exc
    for pos, f in enumerate(frames):
        out = path / f"{pos:06d}.png"
        if not cv2.imwrite(str(out), cv2.cvtColor(f.pixels, cv2.COLOR_RGB2BGR)):
            raise WriteError(f"cannot write {out}")


def frame_count_for_range(start: int, end: int, stride: int) -> int:
    """Number of frames extract_frames yields for the given range."""
    return math.ceil((end - start) / stride)


def square_region(
    frame_index: int,
    start_xy: tuple[int, int],
    velocity: tuple[int, int],
    square_size: int,
    frame_size: tuple[int, int],
) -> tuple[int, int, int, int] | None:
    """Visible (x0, y0, x1, y1) of the moving square at a frame, or None.

    This is the analytic scene description for the synthetic fixture: the
    square translates rigidly by ``velocity`` per frame and is clipped to the
    frame. Tests use it as ground truth.
    """
    w, h = frame_size
    x = start_xy[0] + velocity[0] * frame_index
    y = start_xy[1] + velocity[1] * frame_index
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + square_size, w), min(y + square_size, h)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, y0, x1, y1


def synthetic_square_video(
    locator: str | Path,
    frame_count: int = 32,
    frame_size: tuple[int, int] = (128, 128),
    square_size: int = 20,
    start_xy: tuple[int, int] = (10, 10),
    velocity: tuple[int, int] = (2, 1),
    square_color: tuple[int, int, int] = (220, 40, 40),
    background: tuple[int, int, int] = (16, 16, 16),
    fps: float = DEFAULT_SEQUENCE_FPS,
) -> VideoSource:
    """Generate the moving-square test fixture and return its source.

    A locator with a video extension is encoded as a video file (lossy);
    anything else becomes a directory of PNGs, which preserves colors exactly
    and is what color-sensitive tests should use.
    """
    frames = []
    w, h = frame_size
    for i in range(frame_count):
        rgb = np.empty((h, w, 3), np.uint8)
        rgb[:] = background
        region = square_region(i, start_xy, velocity, square_size, frame_size)
        if region is not None:
            x0, y0, x1, y1 = region
            rgb[y0:y1, x0:x1] = square_color
        frames.append(Frame(index=i, timestamp=i / fps, pixels=rgb))
    write_preview(frames, locator, fps=fps)
    return open_video(locator)
