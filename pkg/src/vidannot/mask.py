"""Mask representation and geometry: label maps, boxes, IoU, overlays.

Boxes use the half-open convention [x0, x1) x [y0, y1), which makes
normalized widths exact fractions and the full frame equal to (0, 0, W, H).
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyObjectError, FrameRangeError, ShapeError
from .video_io import Frame

LABEL_DTYPE = np.uint16
YOLO_EPS = 1e-9
# Derived bounds (cx - w/2 and friends) must tolerate 6-decimal serialization:
# quantizing cx and w independently can push an exact 0 down to about -7.5e-7.
YOLO_QUANT_EPS = 2e-6

# Hue step in degrees between consecutive object ids; coprime with 360 so the
# palette cycles through all hues before repeating.
PALETTE_HUE_STEP = 47


@dataclass(frozen=True, eq=False)
class MaskMap:
    """Per-frame integer label image: 0 is background, k is object k.

    ``object_ids`` is the declared id set; an id may be declared yet have no
    pixels (an empty object is reported, never silently dropped).
    """

    labels: np.ndarray = field(repr=False)
    object_ids: frozenset[int]

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise ShapeError("label map must be 2-D")
        if self.labels.dtype != LABEL_DTYPE:
            object.__setattr__(self, "labels", self.labels.astype(LABEL_DTYPE))
        if any(i <= 0 for i in self.object_ids):
            raise FrameRangeError("object ids must be positive")
        present = set(np.unique(self.labels).tolist()) - {0}
        if not present <= set(self.object_ids):
            raise FrameRangeError(
                f"labels contain undeclared ids {sorted(present - set(self.object_ids))}"
            )
        self.labels.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape  # (H, W)

    def pixels_of(self, object_id: int) -> np.ndarray:
        """Boolean view of one object's pixels."""
        return self.labels == object_id

    def present_ids(self) -> frozenset[int]:
        """Ids that actually have at least one pixel."""
        return frozenset(int(v) for v in np.unique(self.labels) if v != 0)

    def equals(self, other: "MaskMap") -> bool:
        return self.object_ids == other.object_ids and np.array_equal(
            self.labels, other.labels
        )

    @staticmethod
    def from_labels(labels: np.ndarray, object_ids: Iterable[int] | None = None) -> "MaskMap":
        arr = np.asarray(labels)
        if object_ids is None:
            object_ids = (int(v) for v in np.unique(arr) if v != 0)
        return MaskMap(labels=arr.astype(LABEL_DTYPE), object_ids=frozenset(object_ids))

    @staticmethod
    def empty(height: int, width: int, object_ids: Iterable[int] = ()) -> "MaskMap":
        return MaskMap(
            labels=np.zeros((height, width), LABEL_DTYPE),
            object_ids=frozenset(object_ids),
        )


def compose_label_map(
    object_masks: Mapping[int, np.ndarray], shape: tuple[int, int]
) -> MaskMap:
    """Composite per-object boolean masks into one label map.

    Where objects overlap, the higher object id wins.
    """
    labels = np.zeros(shape, LABEL_DTYPE)
    for object_id in sorted(object_masks):
        sel = object_masks[object_id]
        if sel.shape != shape:
            raise ShapeError(f"object {object_id} mask shape {sel.shape} != {shape}")
        labels[sel] = object_id
    return MaskMap(labels=labels, object_ids=frozenset(object_masks))


@dataclass(frozen=True)
class PixelBox:
    """Half-open pixel box: top-left inclusive, bottom-right exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise FrameRangeError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def fits(self, width: int, height: int) -> bool:
        return self.x1 <= width and self.y1 <= height


@dataclass(frozen=True)
class YoloBox:
    """Normalized detection box: center and size as fractions of the image."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.class_id < 0:
            raise FrameRangeError(f"negative class id {self.class_id}")
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0 + YOLO_EPS):
                raise FrameRangeError(f"{name}={v} outside (0, 1]")
        eps = YOLO_QUANT_EPS
        if self.cx - self.w / 2 < -eps or self.cx + self.w / 2 > 1 + eps:
            raise FrameRangeError("box extends past horizontal image bounds")
        if self.cy - self.h / 2 < -eps or self.cy + self.h / 2 > 1 + eps:
            raise FrameRangeError("box extends past vertical image bounds")


def mask_to_bbox(mask: MaskMap, object_id: int) -> PixelBox:
    """Tightest half-open box containing every pixel of one object.

    Disconnected components share the one box; there is no splitting.
    """
    sel = mask.pixels_of(object_id)
    ys, xs = np.nonzero(sel)
    if len(xs) == 0:
        raise EmptyObjectError(f"object {object_id} absent or empty")
    return PixelBox(
        x0=int(xs.min()), y0=int(ys.min()), x1=int(xs.max()) + 1, y1=int(ys.max()) + 1
    )


def bbox_to_yolo(box: PixelBox, width: int, height: int, class_id: int) -> YoloBox:
    """Normalize a pixel box: cx=(x0+x1)/2W, cy=(y0+y1)/2H, w=(x1-x0)/W, h=(y1-y0)/H."""
    if not box.fits(width, height):
        raise FrameRangeError(f"{box} does not fit {width}x{height}")
    return YoloBox(
        class_id=class_id,
        cx=(box.x0 + box.x1) / (2 * width),
        cy=(box.y0 + box.y1) / (2 * height),
        w=(box.x1 - box.x0) / width,
        h=(box.y1 - box.y0) / height,
    )


def yolo_to_bbox(y: YoloBox, width: int, height: int) -> PixelBox:
    """Nearest-integer inverse of bbox_to_yolo.

    Exact for boxes that came from integer pixel boxes, including after
    6-decimal serialization on grids up to 4096 px.
    """
    x0 = round((y.cx - y.w / 2) * width)
    x1 = round((y.cx + y.w / 2) * width)
    y0 = round((y.cy - y.h / 2) * height)
    y1 = round((y.cy + y.h / 2) * height)
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise FrameRangeError(f"normalized box maps outside {width}x{height} grid")
    return PixelBox(x0=x0, y0=y0, x1=x1, y1=y1)


def format_yolo_line(y: YoloBox) -> str:
    """One label-file line: class then 4 fractions at 6 decimals, space-separated."""
    return f"{y.class_id} {y.cx:.6f} {y.cy:.6f} {y.w:.6f} {y.h:.6f}"


def parse_yolo_line(line: str) -> YoloBox:
    parts = line.split(" ")
    if len(parts) != 5:
        raise FrameRangeError(f"malformed label line: {line!r}")
    return YoloBox(
        class_id=int(parts[0]),
        cx=float(parts[1]),
        cy=float(parts[2]),
        w=float(parts[3]),
        h=float(parts[4]),
    )


def mask_iou(a: MaskMap, b: MaskMap, object_id: int) -> float:
    """Intersection-over-union of one object's pixel sets; 1.0 when both empty."""
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    sa = a.pixels_of(object_id)
    sb = b.pixels_of(object_id)
    union = int(np.count_nonzero(sa | sb))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(sa & sb))
    return inter / union


def object_color(object_id: int) -> tuple[int, int, int]:
    """Deterministic palette: object k gets hue (k * 47) mod 360, full S and V."""
    hue = (object_id * PALETTE_HUE_STEP) % 360
    r, g, b = colorsys.hsv_to_rgb(hue / 360.0, 1.0, 1.0)
    return round(r * 255), round(g * 255), round(b * 255)


def render_overlay(frame: Frame, mask: MaskMap, alpha: float) -> Frame:
    """Blend object pixels toward their palette color; background untouched.

    Blending rounds half-down so the rule is bit-exact testable.
    """
    if frame.pixels.shape[:2] != mask.shape:
        raise ShapeError(
            f"frame {frame.pixels.shape[:2]} vs mask {mask.shape}"
        )
    if not (0.0 <= alpha <= 1.0):
        raise FrameRangeError(f"alpha {alpha} outside [0, 1]")
    out = frame.pixels.astype(np.float64)
    for object_id in sorted(mask.present_ids()):
        sel = mask.pixels_of(object_id)
        color = np.array(object_color(object_id), np.float64)
        out[sel] = (1.0 - alpha) * out[sel] + alpha * color
    blended = np.ceil(out - 0.5).clip(0, 255).astype(np.uint8)
    return Frame(index=frame.index, timestamp=frame.timestamp, pixels=blended)
