"""Mask propagation: backend contract plus a deterministic template tracker.

The baseline tracker turns a seed mask into a per-object pixel template and
locates it in neighboring frames by exhaustive normalized cross-correlation
inside a small search window, translating the seed mask rigidly to the best
match. It is exactly predictable on rigid-motion fixtures, which makes it the
desk-scale oracle backend for the whole pipeline. Memory-based neural models
plug in through the same propagate/reseed contract; their permanent-memory
feature corresponds to the set of reseeded frames they retain.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, LoadError, SeedError, ShapeError, StateError
from .mask import MaskMap, compose_label_map, mask_to_bbox
from .video_io import Frame

DEFAULT_SEARCH_WINDOW = 16
DEFAULT_LOSS_THRESHOLD = 0.5


class PropagationCancelled(Exception):
    """Raised inside propagate when the caller's cancel check fires."""


@dataclass(frozen=True)
class TrackerDescriptor:
    name: str
    supports_reseed: bool


@dataclass(frozen=True, eq=False)
class PropagationRequest:
    """Frames to annotate plus the seed mask anchoring the propagation."""

    frames: tuple[Frame, ...]
    seed_index: int
    seed_mask: MaskMap

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise SeedError("propagation request needs at least one frame")
        if not (0 <= self.seed_index < len(self.frames)):
            raise SeedError(f"seed index {self.seed_index} outside frame range")
        shape = self.seed_mask.shape
        for f in self.frames:
            if f.pixels.shape[:2] != shape:
                raise ShapeError(
                    f"frame {f.index} is {f.pixels.shape[:2]}, seed mask is {shape}"
                )
        if not self.seed_mask.present_ids():
            raise SeedError("seed mask has no object pixels")


class Tracker(Protocol):
    """Stateful propagation session: propagate once, then optionally reseed.

    Adapters may additionally expose ``suggest_frames() -> list[int]``
    (frames most worth human correction); no built-in backend implements it,
    so callers must feature-test with hasattr.
    """

    def describe(self) -> TrackerDescriptor: ...

    def propagate(self, request: PropagationRequest) -> list[MaskMap]: ...

    def reseed(self, frame_index: int, mask: MaskMap) -> None: ...


_REGISTRY: dict[str, tuple[Callable[[Mapping], Tracker], TrackerDescriptor]] = {}


def register_tracker(
    descriptor: TrackerDescriptor, factory: Callable[[Mapping], Tracker]
) -> None:
    _REGISTRY[descriptor.name] = (factory, descriptor)


def list_trackers() -> list[TrackerDescriptor]:
    return [desc for _, desc in _REGISTRY.values()]


def tracker_descriptor(name: str) -> TrackerDescriptor:
    if name not in _REGISTRY:
        raise ConfigError(f"unknown tracker backend {name!r}")
    return _REGISTRY[name][1]


def create_tracker(config: Mapping | str) -> Tracker:
    if isinstance(config, str):
        config = {"name": config}
    name = config.get("name")
    if name not in _REGISTRY:
        raise ConfigError(f"unknown tracker backend {name!r}")
    factory, _ = _REGISTRY[name]
    return factory(config)


@dataclass
class _ObjectTrack:
    template: np.ndarray  # float64 patch cut at the seed bbox
    rel_mask: np.ndarray  # bool, object pixels within the bbox
    pos: tuple[int, int]  # current top-left estimate


class TemplateMatchTracker:
    """Classical baseline: per-object NCC template search, rigid translation.

    The template is cut once from the seed frame and never updated unless
    ``refresh_template`` is set, so there is no drift accumulation by default.
    An object whose best correlation falls below ``loss_threshold`` emits an
    empty mask for that frame while the search stays anchored at the last
    known position.
    """

    def __init__(
        self,
        window: int = DEFAULT_SEARCH_WINDOW,
        loss_threshold: float = DEFAULT_LOSS_THRESHOLD,
        refresh_template: bool = False,
    ):
        if window < 1:
            raise ConfigError(f"search window must be >= 1, got {window}")
        self.window = window
        self.loss_threshold = loss_threshold
        self.refresh_template = refresh_template
        self._frames: tuple[Frame, ...] | None = None
        self._outputs: list[MaskMap] = []
        self._declared_ids: frozenset[int] = frozenset()

    def describe(self) -> TrackerDescriptor:
        return TrackerDescriptor(name="template-ncc", supports_reseed=True)

    @property
    def masks(self) -> tuple[MaskMap, ...]:
        """Outputs of the current session, updated in place by reseed."""
        return tuple(self._outputs)

    def propagate(
        self,
        request: PropagationRequest,
        on_frame: Callable[[int, int], None] | None = None,
        cancel: Callable[[], bool] | None = None,
    ) -> list[MaskMap]:
        self._frames = request.frames
        self._declared_ids = request.seed_mask.object_ids
        n = len(request.frames)
        outputs: list[MaskMap | None] = [None] * n
        outputs[request.seed_index] = request.seed_mask
        done = 1
        if on_frame:
            on_frame(done, n)

        tracks = self._init_tracks(request.seed_mask, request.frames[request.seed_index])
        for i in range(request.seed_index + 1, n):
            if cancel and cancel():
                raise PropagationCancelled()
            outputs[i] = self._step(tracks, request.frames[i])
            done += 1
            if on_frame:
                on_frame(done, n)
        # The backward pass restarts from the seed state so both directions
        # step away from the anchor symmetrically.
        tracks = self._init_tracks(request.seed_mask, request.frames[request.seed_index])
        for i in range(request.seed_index - 1, -1, -1):
            if cancel and cancel():
                raise PropagationCancelled()
            outputs[i] = self._step(tracks, request.frames[i])
            done += 1
            if on_frame:
                on_frame(done, n)

        self._outputs = [m for m in outputs if m is not None]
        assert len(self._outputs) == n
        return list(self._outputs)

    def reseed(self, frame_index: int, mask: MaskMap) -> None:
        """Replace session state at a frame and re-propagate everything after it."""
        if self._frames is None:
            raise StateError("reseed requires an active propagation session")
        if not (0 <= frame_index < len(self._frames)):
            raise SeedError(f"frame index {frame_index} outside session")
        if mask.shape != self._frames[0].pixels.shape[:2]:
            raise ShapeError("reseed mask dimensions do not match session frames")
        if not mask.present_ids():
            raise SeedError("reseed mask has no object pixels")
        self._declared_ids = mask.object_ids
        self._outputs[frame_index] = mask
        tracks = self._init_tracks(mask, self._frames[frame_index])
        for i in range(frame_index + 1, len(self._frames)):
            self._outputs[i] = self._step(tracks, self._frames[i])

    def _init_tracks(self, mask: MaskMap, frame: Frame) -> dict[int, _ObjectTrack]:
        tracks = {}
        for object_id in sorted(mask.present_ids()):
            box = mask_to_bbox(mask, object_id)
            patch = frame.pixels[box.y0 : box.y1, box.x0 : box.x1]
            rel = mask.pixels_of(object_id)[box.y0 : box.y1, box.x0 : box.x1]
            tracks[object_id] = _ObjectTrack(
                template=patch.astype(np.float64),
                rel_mask=rel.copy(),
                pos=(box.x0, box.y0),
            )
        return tracks

    def _step(self, tracks: dict[int, _ObjectTrack], frame: Frame) -> MaskMap:
        h, w = frame.pixels.shape[:2]
        per_object: dict[int, np.ndarray] = {
            object_id: np.zeros((h, w), bool) for object_id in self._declared_ids
        }
        for object_id in sorted(tracks):
            track = tracks[object_id]
            score, (bx, by) = _best_match(
                frame.pixels, track.template, track.pos, self.window
            )
            if score < self.loss_threshold:
                continue  # lost this frame; keep last position as search anchor
            track.pos = (bx, by)
            th, tw = track.template.shape[:2]
            sel = np.zeros((h, w), bool)
            y1, x1 = min(by + th, h), min(bx + tw, w)
            sel[by:y1, bx:x1] = track.rel_mask[: y1 - by, : x1 - bx]
            per_object[object_id] = sel
            if self.refresh_template and by + th <= h and bx + tw <= w:
                track.template = frame.pixels[by : by + th, bx : bx + tw].astype(
                    np.float64
                )
        return compose_label_map(per_object, (h, w))


def _best_match(
    pixels: np.ndarray,
    template: np.ndarray,
    pos: tuple[int, int],
    window: int,
) -> tuple[float, tuple[int, int]]:
    """Exhaustive normalized cross-correlation within +/-window of pos.

    The correlation is normalized by the larger of the two patch energies,
    so it reaches 1.0 only on an exact match and stays low when the window
    holds unrelated content (a plain cosine would still score a uniform
    window highly, hiding object loss). Returns (score, top-left); ties break
    toward the smallest (y, x). When the window cannot contain the template,
    the position is held with full score.
    """
    th, tw = template.shape[:2]
    height, width = pixels.shape[:2]
    x_lo, y_lo = max(0, pos[0] - window), max(0, pos[1] - window)
    x_hi, y_hi = min(width, pos[0] + window + tw), min(height, pos[1] + window + th)
    crop = pixels[y_lo:y_hi, x_lo:x_hi].astype(np.float64)
    if crop.shape[0] < th or crop.shape[1] < tw:
        return 1.0, pos

    windows = sliding_window_view(crop, (th, tw), axis=(0, 1))
    num = np.einsum("ijkmn,mnk->ij", windows, template)
    window_sq = np.einsum("ijkmn,ijkmn->ij", windows, windows)
    template_sq = float(np.einsum("mnk,mnk->", template, template))
    denom = np.maximum(window_sq, template_sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    flat = int(np.argmax(scores))
    dy, dx = divmod(flat, scores.shape[1])
    return float(scores[dy, dx]), (x_lo + dx, y_lo + dy)


class PluginTracker:
    """Adapter loading an external propagation model as a tracker backend."""

    def __init__(self, config: Mapping):
        if not config.get("weights"):
            raise LoadError("plugin tracker requires a 'weights' locator")
        target = config.get("module")
        if not target or ":" not in target:
            raise LoadError("plugin tracker requires 'module' as 'pkg.mod:factory'")
        mod_name, attr = target.split(":", 1)
        try:
            module = importlib.import_module(mod_name)
            factory = getattr(module, attr)
        except (ImportError, AttributeError) as exc:
            raise LoadError(f"cannot load plugin {target!r}: {exc}") from exc
        self._inner: Tracker = factory(config)

    def describe(self) -> TrackerDescriptor:
        return self._inner.describe()

    def propagate(self, request: PropagationRequest) -> list[MaskMap]:
        return self._inner.propagate(request)

    def reseed(self, frame_index: int, mask: MaskMap) -> None:
        self._inner.reseed(frame_index, mask)


def _make_template_tracker(config: Mapping) -> Tracker:
    return TemplateMatchTracker(
        window=int(config.get("window", DEFAULT_SEARCH_WINDOW)),
        loss_threshold=float(config.get("loss_threshold", DEFAULT_LOSS_THRESHOLD)),
        refresh_template=bool(config.get("refresh_template", False)),
    )


register_tracker(
    TrackerDescriptor(name="template-ncc", supports_reseed=True),
    _make_template_tracker,
)
register_tracker(
    TrackerDescriptor(name="plugin", supports_reseed=True),
    PluginTracker,
)
