from __future__ import annotations

import numpy as np
import pytest

from vidannot.errors import CapabilityError, ConfigError, SeedError, ShapeError, StateError
from vidannot.mask import MaskMap, mask_iou
from vidannot.tracking import (
    PropagationRequest,
    TrackerDescriptor,
    create_tracker,
    list_trackers,
    register_tracker,
    tracker_descriptor,
)
from vidannot.video_io import extract_frames

from conftest import CLIP_FRAMES, CLIP_SIZE, SQUARE, START, VELOCITY, make_frame
from oracles import analytic_square_mask

SEED0 = lambda: analytic_square_mask(0, START, VELOCITY, SQUARE, CLIP_SIZE)


def truth(i, velocity=VELOCITY):
    return analytic_square_mask(i, START, velocity, SQUARE, CLIP_SIZE)


class TestPropagation:
    def test_translating_square_tracks_exactly(self, square_clip):
        frames = extract_frames(square_clip, 0, CLIP_FRAMES)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=SEED0())
        )
        assert len(outputs) == CLIP_FRAMES
        for i, mask in enumerate(outputs):
            assert mask_iou(mask, truth(i), 1) == 1.0

    def test_backward_pass_from_last_frame(self, square_clip):
        frames = extract_frames(square_clip, 0, CLIP_FRAMES)
        seed = truth(CLIP_FRAMES - 1)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(
                frames=tuple(frames), seed_index=CLIP_FRAMES - 1, seed_mask=seed
            )
        )
        assert outputs[-1] is seed
        for i, mask in enumerate(outputs):
            assert mask_iou(mask, truth(i), 1) == 1.0

    def test_static_scene_reproduces_seed_bytes(self, static_clip):
        frames = extract_frames(static_clip, 0, CLIP_FRAMES)
        seed = truth(0, velocity=(0, 0))
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=seed)
        )
        for mask in outputs:
            assert mask.labels.tobytes() == seed.labels.tobytes()
            assert mask.object_ids == seed.object_ids

    def test_seed_output_is_identical_object(self, square_clip):
        frames = extract_frames(square_clip, 0, 8)
        seed = SEED0()
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=seed)
        )
        assert outputs[0] is seed

    def test_deterministic(self, square_clip):
        frames = tuple(extract_frames(square_clip, 0, 16))
        runs = []
        for _ in range(2):
            tracker = create_tracker("template-ncc")
            outputs = tracker.propagate(
                PropagationRequest(frames=frames, seed_index=0, seed_mask=SEED0())
            )
            runs.append(b"".join(m.labels.tobytes() for m in outputs))
        assert runs[0] == runs[1]

    def test_output_ids_subset_of_seed_ids(self, square_clip):
        frames = extract_frames(square_clip, 0, 16)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=SEED0())
        )
        for mask in outputs:
            assert mask.object_ids <= SEED0().object_ids

    def test_lost_object_goes_empty_then_recovers(self):
        h, w = 64, 64
        visible = np.full((h, w, 3), (16, 16, 16), np.uint8)
        visible[20:32, 20:32] = (220, 40, 40)
        blank = np.full((h, w, 3), (16, 16, 16), np.uint8)
        sequence = [visible] * 3 + [blank] * 2 + [visible] * 2
        frames = tuple(make_frame(p, index=i) for i, p in enumerate(sequence))
        labels = np.zeros((h, w), np.uint16)
        labels[20:32, 20:32] = 1
        seed = MaskMap.from_labels(labels)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=frames, seed_index=0, seed_mask=seed)
        )
        assert outputs[3].present_ids() == frozenset()
        assert outputs[4].present_ids() == frozenset()
        assert mask_iou(outputs[5], seed, 1) == 1.0
        assert mask_iou(outputs[6], seed, 1) == 1.0

    def test_multi_object_propagation(self, tmp_path):
        from vidannot.video_io import open_video, write_preview

        h, w = 96, 96
        frames = []
        for i in range(12):
            pixels = np.full((h, w, 3), (16, 16, 16), np.uint8)
            pixels[10 + i : 22 + i, 10 + i : 22 + i] = (220, 40, 40)
            pixels[60 - i : 72 - i, 60:72] = (40, 220, 40)
            frames.append(make_frame(pixels, index=i))
        labels = np.zeros((h, w), np.uint16)
        labels[10:22, 10:22] = 1
        labels[60:72, 60:72] = 2
        seed = MaskMap.from_labels(labels)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=seed)
        )
        for i, mask in enumerate(outputs):
            a = np.zeros((h, w), np.uint16)
            a[10 + i : 22 + i, 10 + i : 22 + i] = 1
            b = np.zeros((h, w), np.uint16)
            b[60 - i : 72 - i, 60:72] = 2
            assert mask_iou(mask, MaskMap.from_labels(a, [1]), 1) == 1.0
            assert mask_iou(mask, MaskMap.from_labels(b, [2]), 2) == 1.0


class TestReseed:
    def test_reseed_restores_accuracy_after_drift(self, square_clip):
        frames = extract_frames(square_clip, 0, CLIP_FRAMES)
        # Deliberately misaligned seed: 3 px off in x.
        drifted_labels = np.zeros(CLIP_SIZE[::-1], np.uint16)
        drifted_labels[
            START[1] : START[1] + SQUARE, START[0] + 3 : START[0] + 3 + SQUARE
        ] = 1
        drifted = MaskMap.from_labels(drifted_labels)
        tracker = create_tracker("template-ncc")
        outputs = tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=drifted)
        )
        k = 12
        assert all(mask_iou(outputs[i], truth(i), 1) < 1.0 for i in range(1, k))

        before = [m.labels.tobytes() for m in tracker.masks]
        tracker.reseed(k, truth(k))
        after = tracker.masks
        for i in range(k):
            assert after[i].labels.tobytes() == before[i]
        for i in range(k, CLIP_FRAMES):
            assert mask_iou(after[i], truth(i), 1) == 1.0

    def test_reseed_without_session(self):
        tracker = create_tracker("template-ncc")
        with pytest.raises(StateError):
            tracker.reseed(0, SEED0())

    def test_baseline_declares_reseed_support(self):
        assert tracker_descriptor("template-ncc").supports_reseed is True

    def test_adapter_without_reseed_raises_capability_error(self, square_clip):
        class FrozenTracker:
            def describe(self):
                return TrackerDescriptor(name="frozen", supports_reseed=False)

            def propagate(self, request):
                return [request.seed_mask for _ in request.frames]

            def reseed(self, frame_index, mask):
                raise CapabilityError("frozen tracker cannot reseed")

        register_tracker(
            TrackerDescriptor(name="frozen", supports_reseed=False),
            lambda config: FrozenTracker(),
        )
        tracker = create_tracker("frozen")
        frames = extract_frames(square_clip, 0, 4)
        tracker.propagate(
            PropagationRequest(frames=tuple(frames), seed_index=0, seed_mask=SEED0())
        )
        with pytest.raises(CapabilityError):
            tracker.reseed(1, SEED0())


class TestRequestValidation:
    def test_empty_seed_rejected(self, square_clip):
        frames = extract_frames(square_clip, 0, 4)
        with pytest.raises(SeedError):
            PropagationRequest(
                frames=tuple(frames), seed_index=0, seed_mask=MaskMap.empty(128, 128, {1})
            )

    def test_dimension_mismatch_rejected(self, square_clip):
        frames = extract_frames(square_clip, 0, 4)
        labels = np.zeros((64, 64), np.uint16)
        labels[1, 1] = 1
        with pytest.raises(ShapeError):
            PropagationRequest(
                frames=tuple(frames), seed_index=0, seed_mask=MaskMap.from_labels(labels)
            )

    def test_seed_index_bounds(self, square_clip):
        frames = extract_frames(square_clip, 0, 4)
        with pytest.raises(SeedError):
            PropagationRequest(frames=tuple(frames), seed_index=4, seed_mask=SEED0())

    def test_unknown_tracker(self):
        with pytest.raises(ConfigError):
            create_tracker("no-such-tracker")

    def test_listing_includes_baseline(self):
        assert "template-ncc" in {d.name for d in list_trackers()}
