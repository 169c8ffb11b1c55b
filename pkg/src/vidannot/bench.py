"""Segmenter benchmark harness: timing, memory, and capability reporting.

Model initialization is timed once, cold. Image initialization and mask
prediction are timed over repetitions after one discarded warm-up iteration
and summarized by the median, which resists scheduler noise. Memory comes
from the backend's own probe when it provides one (accelerator-aware
backends know their usage best), falling back to a process-level allocation
peak, or is reported as unavailable, never as zero. Each report embeds the
measurement policy so numbers stay interpretable.
"""

from __future__ import annotations

import statistics
import threading
import time
import tracemalloc
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, StateError
from .mask import MaskMap
from .segmentation import (
    ObjectPromptSet,
    PointPrompt,
    SegmenterDescriptor,
    create_segmenter,
    register_segmenter,
    _REGISTRY,
)
from .video_io import Frame

# Column headers for the comparison table, in canonical order.
TABLE_COLUMNS = (
    "Initializing model (ms)",
    "Image Initialization (ms)",
    "Mask prediction (ms)",
    "VRAM (MB)",
    "Prompts",
)

_PROMPT_ORDER = {"box": 0, "point": 1, "both": 2}


@dataclass(frozen=True)
class BenchmarkReport:
    backend: str
    model_init_ms: float
    image_init_ms: float
    mask_predict_ms: float
    peak_memory_mb: float | None
    prompts: frozenset[str]
    repetitions: int
    dispersion: dict[str, float] = field(default_factory=dict)
    memory_source: str = "unavailable"
    policy: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        for name in ("model_init_ms", "image_init_ms", "mask_predict_ms"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def to_doc(self) -> dict:
        doc = asdict(self)
        doc["prompts"] = prompts_label(self.prompts)
        return doc

    @staticmethod
    def from_doc(doc: Mapping) -> "BenchmarkReport":
        data = dict(doc)
        data["prompts"] = frozenset(
            p.strip() for p in data["prompts"].split(",") if p.strip()
        )
        return BenchmarkReport(**data)


def prompts_label(prompts: frozenset[str]) -> str:
    return ", ".join(sorted(prompts, key=_PROMPT_ORDER.__getitem__))


# Reference measurements for the two hosted neural backends (RTX 2060 Super),
# kept as comparison rows for report rendering.
REFERENCE_REPORTS = (
    BenchmarkReport(
        backend="FastSAM",
        model_init_ms=1357,
        image_init_ms=379,
        mask_predict_ms=15,
        peak_memory_mb=607,
        prompts=frozenset({"box", "point"}),
        repetitions=1,
        memory_source="backend",
        policy={"statistic": "reference"},
    ),
    BenchmarkReport(
        backend="SAM2",
        model_init_ms=2722,
        image_init_ms=660,
        mask_predict_ms=50,
        peak_memory_mb=1476,
        prompts=frozenset({"box", "point", "both"}),
        repetitions=1,
        memory_source="backend",
        policy={"statistic": "reference"},
    ),
)

# Benchmarks are serialized process-wide: concurrent timing runs would
# contaminate each other.
_bench_lock = threading.Lock()


def _iqr(samples: Sequence[float]) -> float:
    if len(samples) < 2:
        return 0.0
    q1, q3 = np.percentile(samples, [25, 75])
    return float(q3 - q1)


def run_benchmark(
    backend: str | Mapping,
    fixture: Frame,
    prompts: ObjectPromptSet | Sequence[ObjectPromptSet],
    repetitions: int,
) -> BenchmarkReport:
    """Measure one backend on one frame and prompt set."""
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")
    config = {"name": backend} if isinstance(backend, str) else dict(backend)
    prompt_sets = [prompts] if isinstance(prompts, ObjectPromptSet) else list(prompts)

    if not _bench_lock.acquire(blocking=False):
        raise StateError("another benchmark is already running in this process")
    try:
        t0 = time.perf_counter()
        handle = create_segmenter(config)
        model_init_ms = (time.perf_counter() - t0) * 1000.0

        image_samples: list[float] = []
        predict_samples: list[float] = []
        for _ in range(repetitions + 1):  # first iteration is the warm-up
            t0 = time.perf_counter()
            handle.set_image(fixture)
            image_samples.append((time.perf_counter() - t0) * 1000.0)
            t0 = time.perf_counter()
            handle.predict(prompt_sets)
            predict_samples.append((time.perf_counter() - t0) * 1000.0)
        image_samples = image_samples[1:]
        predict_samples = predict_samples[1:]

        peak_mb, memory_source = _measure_memory(handle, fixture, prompt_sets)
        return BenchmarkReport(
            backend=config["name"],
            model_init_ms=model_init_ms,
            image_init_ms=statistics.median(image_samples),
            mask_predict_ms=statistics.median(predict_samples),
            peak_memory_mb=peak_mb,
            prompts=handle.describe().supported_prompts,
            repetitions=repetitions,
            dispersion={
                "image_init_ms": _iqr(image_samples),
                "mask_predict_ms": _iqr(predict_samples),
            },
            memory_source=memory_source,
            policy={"statistic": "median", "warmup_discarded": 1},
        )
    finally:
        _bench_lock.release()


def _measure_memory(handle, fixture, prompt_sets) -> tuple[float | None, str]:
    probe = getattr(handle, "peak_memory_mb", None)
    if callable(probe):
        value = probe()
        if value is not None:
            return float(value), "backend"
        return None, "unavailable"
    # Untimed extra pass under tracemalloc; kept out of the timing loop
    # because tracing slows allocations.
    tracemalloc.start()
    try:
        handle.set_image(fixture)
        handle.predict(prompt_sets)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return peak / (1024 * 1024), "process"


@dataclass(frozen=True)
class ReportTable:
    """Comparison table: structured rows plus an aligned text rendering."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]
    text: str

    def to_doc(self) -> dict:
        return {"columns": list(self.columns), "rows": [dict(r) for r in self.rows]}


def _cell(value: float | None) -> str:
    if value is None:
        return "n/a"
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.1f}"


def render_report(reports: Sequence[BenchmarkReport]) -> ReportTable:
    """Build the comparison table for one or more benchmark reports."""
    if not reports:
        raise ConfigError("render_report needs at least one report")
    columns = ("Method",) + TABLE_COLUMNS + ("Repetitions", "Dispersion (ms)")
    rows = []
    for r in reports:
        dispersion = ", ".join(
            f"{k.removesuffix('_ms')} {v:.2f}" for k, v in sorted(r.dispersion.items())
        )
        rows.append(
            {
                "Method": r.backend,
                TABLE_COLUMNS[0]: _cell(r.model_init_ms),
                TABLE_COLUMNS[1]: _cell(r.image_init_ms),
                TABLE_COLUMNS[2]: _cell(r.mask_predict_ms),
                TABLE_COLUMNS[3]: _cell(r.peak_memory_mb),
                TABLE_COLUMNS[4]: prompts_label(r.prompts),
                "Repetitions": str(r.repetitions),
                "Dispersion (ms)": dispersion or "n/a",
            }
        )
    widths = [
        max(len(col), *(len(row[col]) for row in rows)) for col in columns
    ]
    header = " | ".join(col.ljust(w) for col, w in zip(columns, widths))
    rule = "-+-".join("-" * w for w in widths)
    body = [
        " | ".join(row[col].ljust(w) for col, w in zip(columns, widths))
        for row in rows
    ]
    text = "\n".join([header, rule, *body])
    return ReportTable(columns=columns, rows=tuple(rows), text=text)


class MockDelaySegmenter:
    """Benchmark test double: configurable sleeps per contract call.

    predict returns a single-pixel mask per requested object so the harness
    exercises the full contract without real work.
    """

    def __init__(
        self,
        init_ms: float = 0.0,
        image_ms: float = 0.0,
        predict_ms: float = 0.0,
        memory_mb: float | None = None,
    ):
        time.sleep(init_ms / 1000.0)
        self.image_ms = image_ms
        self.predict_ms = predict_ms
        self.memory_mb = memory_mb
        self._frame: Frame | None = None

    def describe(self) -> SegmenterDescriptor:
        return SegmenterDescriptor(
            name="mock-delay", supported_prompts=frozenset({"point", "box", "both"})
        )

    def set_image(self, frame: Frame) -> None:
        time.sleep(self.image_ms / 1000.0)
        self._frame = frame

    def predict(self, prompts: Sequence[ObjectPromptSet]) -> MaskMap:
        if self._frame is None:
            raise StateError("set_image must be called before predict")
        time.sleep(self.predict_ms / 1000.0)
        h, w = self._frame.pixels.shape[:2]
        labels = np.zeros((h, w), np.uint16)
        for ps in prompts:
            if ps.points:
                p = ps.points[0]
                labels[p.y, p.x] = ps.object_id
            else:
                b = ps.boxes[0].box
                labels[b.y0, b.x0] = ps.object_id
        return MaskMap(labels=labels, object_ids=frozenset(p.object_id for p in prompts))

    def peak_memory_mb(self) -> float | None:
        return self.memory_mb


def _make_mock(config: Mapping) -> MockDelaySegmenter:
    return MockDelaySegmenter(
        init_ms=float(config.get("init_ms", 0.0)),
        image_ms=float(config.get("image_ms", 0.0)),
        predict_ms=float(config.get("predict_ms", 0.0)),
        memory_mb=config.get("memory_mb"),
    )


if "mock-delay" not in _REGISTRY:
    register_segmenter(
        SegmenterDescriptor(
            name="mock-delay", supported_prompts=frozenset({"point", "box", "both"})
        ),
        _make_mock,
    )


def default_bench_prompt() -> ObjectPromptSet:
    """Standard prompt used by the CLI and service bench entry points."""
    return ObjectPromptSet(object_id=1, points=(PointPrompt(x=8, y=8),))
