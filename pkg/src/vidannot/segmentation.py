"""Prompt model, segmenter backend contract, and the region-grow reference backend.

Backends register under a name; a configuration mapping selects one. The
reference backend is fully deterministic so the rest of the pipeline can be
tested without neural weights. Neural models plug in through the same
three-call contract (init / set_image / predict) via the ``plugin`` entry.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import cv2
import numpy as np

from .errors import (
    CapabilityError,
    ConfigError,
    FrameRangeError,
    LoadError,
    StateError,
)
from .mask import MaskMap, PixelBox, compose_label_map
from .video_io import Frame

PROMPT_KINDS = ("point", "box", "both")


@dataclass(frozen=True)
class PointPrompt:
    """A labeled click: positive points select, negative points carve away."""

    x: int
    y: int
    polarity: str = "positive"

    def __post_init__(self):
        if self.polarity not in ("positive", "negative"):
            raise ConfigError(f"unknown polarity {self.polarity!r}")

    @property
    def positive(self) -> bool:
        return self.polarity == "positive"


@dataclass(frozen=True)
class BoxPrompt:
    box: PixelBox


@dataclass(frozen=True)
class ObjectPromptSet:
    """All hints for one object on one frame."""

    object_id: int
    points: tuple[PointPrompt, ...] = ()
    boxes: tuple[BoxPrompt, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.object_id <= 0:
            raise FrameRangeError(f"object id must be positive, got {self.object_id}")
        if not self.points and not self.boxes:
            raise ConfigError(f"object {self.object_id}: at least one point or box required")

    @property
    def kind(self) -> str:
        if self.points and self.boxes:
            return "both"
        return "point" if self.points else "box"


@dataclass(frozen=True)
class SegmenterDescriptor:
    name: str
    supported_prompts: frozenset[str]

    def __post_init__(self):
        if not self.supported_prompts:
            raise ConfigError("supported_prompts must be nonempty")
        unknown = set(self.supported_prompts) - set(PROMPT_KINDS)
        if unknown:
            raise ConfigError(f"unknown prompt kinds {sorted(unknown)}")


class Segmenter(Protocol):
    """Stateful promptable-segmenter contract: one image at a time."""

    def describe(self) -> SegmenterDescriptor: ...

    def set_image(self, frame: Frame) -> None: ...

    def predict(self, prompts: Sequence[ObjectPromptSet]) -> MaskMap: ...


_REGISTRY: dict[str, tuple[Callable[[Mapping], Segmenter], SegmenterDescriptor]] = {}


def register_segmenter(
    descriptor: SegmenterDescriptor, factory: Callable[[Mapping], Segmenter]
) -> None:
    _REGISTRY[descriptor.name] = (factory, descriptor)


def list_segmenters() -> list[SegmenterDescriptor]:
    return [desc for _, desc in _REGISTRY.values()]


def create_segmenter(config: Mapping | str) -> Segmenter:
    """Instantiate a registered backend from a name or a config mapping."""
    if isinstance(config, str):
        config = {"name": config}
    name = config.get("name")
    if name not in _REGISTRY:
        raise ConfigError(f"unknown segmenter backend {name!r}")
    factory, _ = _REGISTRY[name]
    return factory(config)


def _validate_point(p: PointPrompt, width: int, height: int) -> None:
    if not (0 <= p.x < width and 0 <= p.y < height):
        raise FrameRangeError(f"point ({p.x}, {p.y}) outside {width}x{height} frame")


def _validate_box(b: BoxPrompt, width: int, height: int) -> None:
    if not b.box.fits(width, height):
        raise FrameRangeError(f"{b.box} outside {width}x{height} frame")


class RegionGrowSegmenter:
    """Deterministic reference backend built on color flood fill.

    A positive point grows a 4-connected region of pixels within ``tolerance``
    per channel of the seed pixel. A lone box selects the largest same-color
    connected component inside it. When points and boxes are combined, the
    boxes restrict the fill domain and the points act within it. Negative
    points remove the connected component of the current selection they land on.
    """

    def __init__(self, tolerance: int = 0):
        if tolerance < 0:
            raise ConfigError(f"tolerance must be >= 0, got {tolerance}")
        self.tolerance = tolerance
        self._frame: Frame | None = None
        self._scratch: np.ndarray | None = None  # writable copy for cv2 calls

    def describe(self) -> SegmenterDescriptor:
        return SegmenterDescriptor(
            name="region-grow", supported_prompts=frozenset(PROMPT_KINDS)
        )

    def set_image(self, frame: Frame) -> None:
        self._frame = frame
        self._scratch = np.ascontiguousarray(frame.pixels).copy()

    def predict(self, prompts: Sequence[ObjectPromptSet]) -> MaskMap:
        if self._frame is None:
            raise StateError("set_image must be called before predict")
        ids = [p.object_id for p in prompts]
        if len(set(ids)) != len(ids):
            raise ConfigError("object ids must be unique within a request")
        h, w = self._frame.pixels.shape[:2]
        supported = self.describe().supported_prompts
        per_object: dict[int, np.ndarray] = {}
        for prompt_set in prompts:
            if prompt_set.kind not in supported:
                raise CapabilityError(f"prompt kind {prompt_set.kind!r} unsupported")
            for p in prompt_set.points:
                _validate_point(p, w, h)
            for b in prompt_set.boxes:
                _validate_box(b, w, h)
            per_object[prompt_set.object_id] = self._select(prompt_set)
        return compose_label_map(per_object, (h, w))

    # Selection machinery. All fills are 4-connected with a fixed range
    # relative to the seed pixel, so results do not depend on fill order.

    def _select(self, prompt_set: ObjectPromptSet) -> np.ndarray:
        assert self._frame is not None
        h, w = self._frame.pixels.shape[:2]
        domain = None
        if prompt_set.boxes:
            domain = np.zeros((h, w), bool)
            for b in prompt_set.boxes:
                domain[b.box.y0 : b.box.y1, b.box.x0 : b.box.x1] = True

        positives = [p for p in prompt_set.points if p.positive]
        negatives = [p for p in prompt_set.points if not p.positive]

        selected = np.zeros((h, w), bool)
        if positives:
            for p in positives:
                selected |= self._flood(p.x, p.y, domain)
        elif prompt_set.boxes:
            for b in prompt_set.boxes:
                selected |= self._largest_component_in_box(b.box)

        for p in negatives:
            if selected[p.y, p.x]:
                selected &= ~_component_of(selected, p.x, p.y)
        return selected

    def _flood(self, x: int, y: int, domain: np.ndarray | None) -> np.ndarray:
        assert self._scratch is not None
        h, w = self._scratch.shape[:2]
        if domain is not None and not domain[y, x]:
            return np.zeros((h, w), bool)
        fill_mask = np.zeros((h + 2, w + 2), np.uint8)
        if domain is not None:
            fill_mask[1:-1, 1:-1][~domain] = 1  # nonzero mask pixels block the fill
        t = self.tolerance
        flags = 4 | cv2.FLOODFILL_MASK_ONLY | cv2.FLOODFILL_FIXED_RANGE | (255 << 8)
        cv2.floodFill(
            self._scratch,
            fill_mask,
            (int(x), int(y)),
            0,
            loDiff=(t, t, t),
            upDiff=(t, t, t),
            flags=flags,
        )
        return fill_mask[1:-1, 1:-1] == 255

    def _largest_component_in_box(self, box: PixelBox) -> np.ndarray:
        """Largest same-color connected component within one box.

        Ties break toward the component seeded first in row-major order.
        """
        assert self._frame is not None
        h, w = self._frame.pixels.shape[:2]
        domain = np.zeros((h, w), bool)
        domain[box.y0 : box.y1, box.x0 : box.x1] = True
        visited = np.zeros((h, w), bool)
        best: np.ndarray | None = None
        best_size = 0
        for yy in range(box.y0, box.y1):
            for xx in range(box.x0, box.x1):
                if visited[yy, xx]:
                    continue
                comp = self._flood(xx, yy, domain)
                visited |= comp
                size = int(np.count_nonzero(comp))
                if size > best_size:
                    best, best_size = comp, size
        return best if best is not None else np.zeros((h, w), bool)


def _component_of(selection: np.ndarray, x: int, y: int) -> np.ndarray:
    _, labels = cv2.connectedComponents(selection.astype(np.uint8), connectivity=4)
    return labels == labels[y, x]


class PluginSegmenter:
    """Adapter that loads an external promptable model as a backend.

    The plugin is addressed as ``module:factory``; the factory receives the
    full config (weight locator, device, and any model-specific keys) and must
    return an object satisfying the Segmenter contract. Weights are always
    user-supplied; nothing is bundled or downloaded.
    """

    def __init__(self, config: Mapping):
        if not config.get("weights"):
            raise LoadError("plugin segmenter requires a 'weights' locator")
        target = config.get("module")
        if not target or ":" not in target:
            raise LoadError("plugin segmenter requires 'module' as 'pkg.mod:factory'")
        mod_name, attr = target.split(":", 1)
        try:
            module = importlib.import_module(mod_name)
            factory = getattr(module, attr)
        except (ImportError, AttributeError) as exc:
            raise LoadError(f"cannot load plugin {target!r}: {exc}") from exc
        self._inner: Segmenter = factory(config)

    def describe(self) -> SegmenterDescriptor:
        return self._inner.describe()

    def set_image(self, frame: Frame) -> None:
        self._inner.set_image(frame)

    def predict(self, prompts: Sequence[ObjectPromptSet]) -> MaskMap:
        return self._inner.predict(prompts)


def _make_region_grow(config: Mapping) -> Segmenter:
    return RegionGrowSegmenter(tolerance=int(config.get("tolerance", 0)))


register_segmenter(
    SegmenterDescriptor(name="region-grow", supported_prompts=frozenset(PROMPT_KINDS)),
    _make_region_grow,
)
register_segmenter(
    SegmenterDescriptor(name="plugin", supported_prompts=frozenset(PROMPT_KINDS)),
    PluginSegmenter,
)
