from __future__ import annotations

import numpy as np
import pytest

from vidannot.bench import (
    REFERENCE_REPORTS,
    TABLE_COLUMNS,
    BenchmarkReport,
    _bench_lock,
    prompts_label,
    render_report,
    run_benchmark,
)
from vidannot.errors import ConfigError, StateError
from vidannot.segmentation import ObjectPromptSet, PointPrompt

from conftest import flat_scene, make_frame


def fixture_frame():
    pixels = flat_scene(64, 64)
    pixels[20:44, 20:44] = (220, 40, 40)
    return make_frame(pixels)


def prompt():
    return ObjectPromptSet(object_id=1, points=(PointPrompt(32, 32),))


class TestHarness:
    def test_injected_delays_measured_within_tolerance(self):
        report = run_benchmark(
            {"name": "mock-delay", "init_ms": 50, "image_ms": 20, "predict_ms": 15},
            fixture_frame(),
            prompt(),
            repetitions=5,
        )
        assert report.model_init_ms == pytest.approx(50, abs=10)
        assert report.image_init_ms == pytest.approx(20, abs=10)
        assert report.mask_predict_ms == pytest.approx(15, abs=10)
        assert report.repetitions == 5

    def test_zero_repetitions_rejected(self):
        with pytest.raises(ConfigError):
            run_benchmark("mock-delay", fixture_frame(), prompt(), repetitions=0)

    def test_medians_monotone_in_injected_delay(self):
        medians = []
        for predict_ms in (0, 10, 25):
            report = run_benchmark(
                {"name": "mock-delay", "predict_ms": predict_ms},
                fixture_frame(),
                prompt(),
                repetitions=3,
            )
            medians.append(report.mask_predict_ms)
        assert medians == sorted(medians)

    def test_harness_overhead_below_one_ms(self):
        report = run_benchmark(
            {"name": "mock-delay"}, fixture_frame(), prompt(), repetitions=7
        )
        assert report.image_init_ms < 1.0
        assert report.mask_predict_ms < 1.0

    def test_backend_memory_probe_preferred(self):
        report = run_benchmark(
            {"name": "mock-delay", "memory_mb": 123.0},
            fixture_frame(),
            prompt(),
            repetitions=1,
        )
        assert report.peak_memory_mb == 123.0
        assert report.memory_source == "backend"

    def test_backend_probe_returning_none_is_unavailable(self):
        report = run_benchmark(
            {"name": "mock-delay"}, fixture_frame(), prompt(), repetitions=1
        )
        assert report.peak_memory_mb is None
        assert report.memory_source == "unavailable"

    def test_process_fallback_for_probeless_backend(self):
        report = run_benchmark("region-grow", fixture_frame(), prompt(), repetitions=2)
        assert report.memory_source == "process"
        assert report.peak_memory_mb is not None and report.peak_memory_mb > 0

    def test_capabilities_mirror_descriptor(self):
        report = run_benchmark("region-grow", fixture_frame(), prompt(), repetitions=1)
        assert report.prompts == frozenset({"point", "box", "both"})

    def test_policy_recorded_in_report(self):
        report = run_benchmark("mock-delay", fixture_frame(), prompt(), repetitions=2)
        assert report.policy == {"statistic": "median", "warmup_discarded": 1}

    def test_concurrent_benchmarks_refused(self):
        assert _bench_lock.acquire(blocking=False)
        try:
            with pytest.raises(StateError):
                run_benchmark("mock-delay", fixture_frame(), prompt(), repetitions=1)
        finally:
            _bench_lock.release()

    def test_report_serialization_round_trips(self):
        report = run_benchmark(
            {"name": "mock-delay", "memory_mb": 64.0},
            fixture_frame(),
            prompt(),
            repetitions=3,
        )
        assert BenchmarkReport.from_doc(report.to_doc()) == report


class TestReferenceRows:
    def test_reference_values(self):
        by_name = {r.backend: r for r in REFERENCE_REPORTS}
        fast = by_name["FastSAM"]
        assert (
            fast.model_init_ms,
            fast.image_init_ms,
            fast.mask_predict_ms,
            fast.peak_memory_mb,
        ) == (1357, 379, 15, 607)
        assert fast.prompts == frozenset({"box", "point"})
        sam2 = by_name["SAM2"]
        assert (
            sam2.model_init_ms,
            sam2.image_init_ms,
            sam2.mask_predict_ms,
            sam2.peak_memory_mb,
        ) == (2722, 660, 50, 1476)
        assert sam2.prompts == frozenset({"box", "point", "both"})


class TestRenderReport:
    def test_columns_in_canonical_order(self):
        table = render_report(list(REFERENCE_REPORTS))
        assert table.columns[0] == "Method"
        assert table.columns[1:6] == TABLE_COLUMNS
        assert TABLE_COLUMNS == (
            "Initializing model (ms)",
            "Image Initialization (ms)",
            "Mask prediction (ms)",
            "VRAM (MB)",
            "Prompts",
        )

    def test_two_reference_rows(self):
        table = render_report(list(REFERENCE_REPORTS))
        assert len(table.rows) == 2
        assert table.rows[0]["Method"] == "FastSAM"
        assert table.rows[0]["Initializing model (ms)"] == "1357"
        assert table.rows[0]["Prompts"] == "box, point"
        assert table.rows[1]["Method"] == "SAM2"
        assert table.rows[1]["VRAM (MB)"] == "1476"
        assert table.rows[1]["Prompts"] == "box, point, both"

    def test_single_report_single_row(self):
        table = render_report([REFERENCE_REPORTS[0]])
        assert len(table.rows) == 1

    def test_unavailable_memory_rendered_as_na(self):
        report = BenchmarkReport(
            backend="probeless",
            model_init_ms=1,
            image_init_ms=1,
            mask_predict_ms=1,
            peak_memory_mb=None,
            prompts=frozenset({"point"}),
            repetitions=1,
        )
        table = render_report([report])
        assert table.rows[0]["VRAM (MB)"] == "n/a"
        assert "n/a" in table.text

    def test_empty_report_list_rejected(self):
        with pytest.raises(ConfigError):
            render_report([])

    def test_text_table_is_aligned(self):
        table = render_report(list(REFERENCE_REPORTS))
        lines = table.text.splitlines()
        assert len({len(line) for line in lines}) == 1

    def test_prompts_label_ordering(self):
        assert prompts_label(frozenset({"both", "point", "box"})) == "box, point, both"
