from __future__ import annotations

import io
import time
import zipfile
from pathlib import Path

import cv2
import numpy as np
import pytest
from fastapi.testclient import TestClient

from vidannot.api import ServiceConfig, create_app
from vidannot.export import validate_yolo
from vidannot.mask import MaskMap, mask_iou
from vidannot.session import load_session
from vidannot.tracking import (
    TemplateMatchTracker,
    TrackerDescriptor,
    register_tracker,
)

from conftest import CLIP_FRAMES, CLIP_SIZE, SQUARE, START, VELOCITY
from oracles import analytic_square_mask


class SlowTracker(TemplateMatchTracker):
    """Baseline tracker with an artificial per-frame delay, for job tests."""

    def describe(self):
        return TrackerDescriptor(name="slow-ncc", supports_reseed=True)

    def _step(self, tracks, frame):
        time.sleep(0.05)
        return super()._step(tracks, frame)


register_tracker(
    TrackerDescriptor(name="slow-ncc", supports_reseed=True),
    lambda config: SlowTracker(),
)


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(storage_root=tmp_path / "service", frame_limit=100)
    app = create_app(config)
    with TestClient(app) as c:
        c.storage_root = config.storage_root
        yield c


def clip_zip_bytes(square_clip) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for png in sorted(Path(square_clip.locator).glob("*.png")):
            zf.write(png, png.name)
    return buf.getvalue()


def upload(client, square_clip, classes='["square"]'):
    response = client.post(
        "/videos",
        files={"file": ("frames.zip", clip_zip_bytes(square_clip), "application/zip")},
        data={"classes": classes},
    )
    assert response.status_code == 200, response.text
    return response.json()


def center_prompt_body(frame_index=0, object_id=1, class_id=0):
    # Pixel center of the square at that frame, as fractions.
    cx = (START[0] + VELOCITY[0] * frame_index + SQUARE // 2 + 0.5) / CLIP_SIZE[0]
    cy = (START[1] + VELOCITY[1] * frame_index + SQUARE // 2 + 0.5) / CLIP_SIZE[1]
    return {
        "frame_index": frame_index,
        "objects": [
            {
                "object_id": object_id,
                "class_id": class_id,
                "points": [{"x": cx, "y": cy, "polarity": "positive"}],
            }
        ],
    }


def rle_to_bool(rle) -> np.ndarray:
    h, w = rle["size"]
    flat = np.zeros(h * w, bool)
    pos = 0
    value = False
    for count in rle["counts"]:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    return flat.reshape(h, w)


def truth(i):
    return analytic_square_mask(i, START, VELOCITY, SQUARE, CLIP_SIZE)


class TestUploadAndFrames:
    def test_upload_zip_creates_session(self, client, square_clip):
        doc = upload(client, square_clip)
        assert doc["frame_count"] == CLIP_FRAMES
        assert (doc["width"], doc["height"]) == CLIP_SIZE

    def test_upload_mp4_creates_session(self, client, square_clip_mp4):
        data = Path(square_clip_mp4.locator).read_bytes()
        response = client.post(
            "/videos",
            files={"file": ("clip.mp4", data, "video/mp4")},
            data={"classes": '["square"]'},
        )
        assert response.status_code == 200
        assert response.json()["frame_count"] == CLIP_FRAMES

    def test_upload_bad_classes(self, client, square_clip):
        response = client.post(
            "/videos",
            files={"file": ("frames.zip", clip_zip_bytes(square_clip), "application/zip")},
            data={"classes": '"not-a-list"'},
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "config-error"

    def test_upload_unknown_type(self, client):
        response = client.post(
            "/videos",
            files={"file": ("notes.txt", b"hello", "text/plain")},
            data={"classes": '["x"]'},
        )
        assert response.status_code == 400

    def test_fetch_frame_png(self, client, square_clip):
        doc = upload(client, square_clip)
        response = client.get(f"/sessions/{doc['session_id']}/frames/0")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        decoded = cv2.imdecode(
            np.frombuffer(response.content, np.uint8), cv2.IMREAD_COLOR
        )
        assert decoded.shape[:2] == CLIP_SIZE[::-1]

    def test_unknown_session_404(self, client):
        response = client.get("/sessions/nope/frames/0")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "not-found"

    def test_summary_route(self, client, square_clip):
        doc = upload(client, square_clip)
        summary = client.get(f"/sessions/{doc['session_id']}").json()
        assert summary["tracked_frames"] == 0
        assert summary["classes"] == [{"class_id": 0, "name": "square"}]


class TestPrompts:
    def test_prompt_returns_oracle_mask(self, client, square_clip):
        doc = upload(client, square_clip)
        response = client.post(
            f"/sessions/{doc['session_id']}/prompts", json=center_prompt_body()
        )
        assert response.status_code == 200, response.text
        payload = response.json()
        objects = payload["objects"]
        assert len(objects) == 1
        assert objects[0]["object_id"] == 1
        x0, y0, x1, y1 = objects[0]["box"]
        assert (x0, y0, x1, y1) == (START[0], START[1], START[0] + SQUARE, START[1] + SQUARE)
        decoded = rle_to_bool(objects[0]["rle"])
        assert np.array_equal(decoded, truth(0).pixels_of(1))

    def test_prompt_unknown_backend(self, client, square_clip):
        doc = upload(client, square_clip)
        body = center_prompt_body()
        body["backend"] = "nonexistent"
        response = client.post(f"/sessions/{doc['session_id']}/prompts", json=body)
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "config-error"

    def test_overlay_is_valid_png(self, client, square_clip):
        doc = upload(client, square_clip)
        payload = client.post(
            f"/sessions/{doc['session_id']}/prompts", json=center_prompt_body()
        ).json()
        import base64

        raw = base64.b64decode(payload["overlay_png"])
        decoded = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_COLOR)
        assert decoded.shape[:2] == CLIP_SIZE[::-1]


class TestTrackJobs:
    def run_track(self, client, session_id, **body):
        response = client.post(f"/sessions/{session_id}/track", json={"segment_start": 0, **body})
        assert response.status_code == 200, response.text
        return response.json()["job_id"]

    def wait(self, client, job_id, timeout=30.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            doc = client.get(f"/jobs/{job_id}").json()
            if doc["status"] not in ("queued", "running"):
                return doc
            time.sleep(0.02)
        raise TimeoutError(job_id)

    def test_track_whole_fixture(self, client, square_clip):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
        job = self.wait(client, self.run_track(client, sid))
        assert job["status"] == "done"
        assert job["result"]["processed"] == CLIP_FRAMES
        assert job["progress"] == 1.0
        summary = client.get(f"/sessions/{sid}").json()
        assert summary["tracked_frames"] == CLIP_FRAMES

    def test_frame_limit_enforced_with_truncation(self, tmp_path, square_clip):
        config = ServiceConfig(storage_root=tmp_path / "svc", frame_limit=10)
        with TestClient(create_app(config)) as client:
            doc = upload(client, square_clip)
            sid = doc["session_id"]
            client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
            job = self.wait(client, self.run_track(client, sid))
            assert job["result"]["processed"] == 10
            assert job["result"]["truncated"] is True

    def test_duplicate_track_returns_same_job(self, client, square_clip):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
        first = self.run_track(client, sid, tracker="slow-ncc")
        second = self.run_track(client, sid, tracker="slow-ncc")
        assert first == second
        self.wait(client, first)

    def test_cancel_leaves_segment_pending(self, client, square_clip):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
        job_id = self.run_track(client, sid, tracker="slow-ncc")
        time.sleep(0.15)  # let a few frames process
        client.post(f"/jobs/{job_id}/cancel")
        job = self.wait(client, job_id)
        assert job["status"] == "cancelled"
        summary = client.get(f"/sessions/{sid}").json()
        assert summary["tracked_frames"] == 0
        assert summary["segments"][0]["status"] == "pending"

    def test_track_without_seed(self, client, square_clip):
        doc = upload(client, square_clip)
        response = client.post(
            f"/sessions/{doc['session_id']}/track", json={"segment_start": 0}
        )
        assert response.status_code == 404  # no segment exists yet

    def test_unknown_job_404(self, client):
        assert client.get("/jobs/missing").status_code == 404


class TestCorrections:
    def test_correction_route(self, client, square_clip):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
        job_id = client.post(
            f"/sessions/{sid}/track", json={"segment_start": 0}
        ).json()["job_id"]
        TestTrackJobs().wait(client, job_id)
        k = 10
        response = client.post(
            f"/sessions/{sid}/corrections", json=center_prompt_body(frame_index=k)
        )
        assert response.status_code == 200
        assert response.json() == {"frame_index": k, "resumed_through": CLIP_FRAMES}
        session = load_session(client.storage_root / sid)
        assert mask_iou(session.mask_at(k), truth(k), 1) == 1.0

    def test_correction_before_tracking(self, client, square_clip):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        response = client.post(
            f"/sessions/{sid}/corrections", json=center_prompt_body(frame_index=3)
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "range-error"


class TestExportRoute:
    def test_export_download_validates(self, client, square_clip, tmp_path):
        doc = upload(client, square_clip)
        sid = doc["session_id"]
        client.post(f"/sessions/{sid}/prompts", json=center_prompt_body())
        job_id = client.post(
            f"/sessions/{sid}/track", json={"segment_start": 0}
        ).json()["job_id"]
        TestTrackJobs().wait(client, job_id)
        response = client.post(f"/sessions/{sid}/export", json={})
        assert response.status_code == 200
        assert response.headers["content-type"] == "application/zip"
        archive = tmp_path / "download.zip"
        archive.write_bytes(response.content)
        assert validate_yolo(archive).ok

    def test_export_empty_session(self, client, square_clip):
        doc = upload(client, square_clip)
        response = client.post(f"/sessions/{doc['session_id']}/export", json={})
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "export-error"


class TestBackendsAndBench:
    def test_backend_listing(self, client):
        doc = client.get("/backends").json()
        segmenters = {d["name"]: d for d in doc["segmenters"]}
        trackers = {d["name"]: d for d in doc["trackers"]}
        assert segmenters["region-grow"]["supported_prompts"] == ["both", "box", "point"]
        assert trackers["template-ncc"]["supports_reseed"] is True

    def test_bench_route_with_mock(self, client):
        response = client.post(
            "/bench",
            json={
                "backend": {"name": "mock-delay", "predict_ms": 5},
                "repetitions": 2,
                "include_reference": True,
            },
        )
        assert response.status_code == 200
        doc = response.json()
        assert doc["report"]["backend"] == "mock-delay"
        assert [r["Method"] for r in doc["table"]["rows"]] == [
            "FastSAM",
            "SAM2",
            "mock-delay",
        ]
        assert "Initializing model (ms)" in doc["text"]
