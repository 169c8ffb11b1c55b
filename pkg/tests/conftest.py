from __future__ import annotations

import numpy as np
import pytest

from vidannot.video_io import Frame, open_video, synthetic_square_video

# Default synthetic-scene parameters shared by fixtures and oracles.
CLIP_FRAMES = 32
CLIP_SIZE = (128, 128)
SQUARE = 20
START = (10, 10)
VELOCITY = (2, 1)
SQUARE_COLOR = (220, 40, 40)
BACKGROUND = (16, 16, 16)


@pytest.fixture(scope="session")
def square_clip(tmp_path_factory):
    """Moving-square fixture as a lossless frame directory."""
    path = tmp_path_factory.mktemp("fixtures") / "clip"
    return synthetic_square_video(
        path,
        frame_count=CLIP_FRAMES,
        frame_size=CLIP_SIZE,
        square_size=SQUARE,
        start_xy=START,
        velocity=VELOCITY,
        square_color=SQUARE_COLOR,
        background=BACKGROUND,
    )


@pytest.fixture(scope="session")
def static_clip(tmp_path_factory):
    """Zero-velocity variant: every frame identical."""
    path = tmp_path_factory.mktemp("fixtures") / "static"
    return synthetic_square_video(
        path,
        frame_count=CLIP_FRAMES,
        frame_size=CLIP_SIZE,
        square_size=SQUARE,
        start_xy=START,
        velocity=(0, 0),
        square_color=SQUARE_COLOR,
        background=BACKGROUND,
    )


@pytest.fixture(scope="session")
def square_clip_mp4(tmp_path_factory):
    """Same scene as a real (lossy) video container, for metadata tests."""
    path = tmp_path_factory.mktemp("fixtures") / "clip.mp4"
    return synthetic_square_video(path, frame_count=CLIP_FRAMES, frame_size=CLIP_SIZE)


def make_frame(pixels: np.ndarray, index: int = 0) -> Frame:
    return Frame(index=index, timestamp=index / 30.0, pixels=pixels)


def flat_scene(
    height: int = 48,
    width: int = 48,
    background: tuple[int, int, int] = BACKGROUND,
) -> np.ndarray:
    scene = np.empty((height, width, 3), np.uint8)
    scene[:] = background
    return scene


# Acceptance reporting: one PASS/FAIL line per criterion in the summary.

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.failed):
            _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance_outcomes.items()):
        name = nodeid.split("::")[-1]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
