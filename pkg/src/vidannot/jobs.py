"""In-process job registry for long-running tracking work.

Jobs run on daemon threads and are idempotent per key while active: submitting
the same key again returns the existing job instead of spawning a duplicate.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Callable

from .errors import NotFoundError, ToolError


@dataclass
class Job:
    job_id: str
    key: tuple
    status: str = "queued"  # queued | running | done | error | cancelled
    progress: float = 0.0
    result: dict | None = None
    error: dict | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)

    def to_doc(self) -> dict:
        return {
            "job_id": self.job_id,
            "status": self.status,
            "progress": round(self.progress, 4),
            "result": self.result,
            "error": self.error,
        }


class JobManager:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, key: tuple, work: Callable[[Job], dict]) -> Job:
        """Start work on a thread, or return the live job already keyed to it."""
        with self._lock:
            for job in self._jobs.values():
                if job.key == key and job.status in ("queued", "running"):
                    return job
            job = Job(job_id=uuid.uuid4().hex[:12], key=key)
            self._jobs[job.job_id] = job

        def runner():
            job.status = "running"
            try:
                result = work(job)
                if job.cancel_event.is_set():
                    job.status = "cancelled"
                    job.result = result
                else:
                    job.status = "done"
                    job.progress = 1.0
                    job.result = result
            except ToolError as exc:
                job.status = "error"
                job.error = {"code": exc.code, "message": exc.message}
            except Exception as exc:  # pragma: no cover - defensive
                job.status = "error"
                job.error = {"code": "error", "message": str(exc)}

        threading.Thread(target=runner, daemon=True).start()
        return job

    def get(self, job_id: str) -> Job:
        job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"no such job {job_id}")
        return job

    def cancel(self, job_id: str) -> Job:
        job = self.get(job_id)
        job.cancel_event.set()
        return job

    def wait(self, job_id: str, timeout: float = 30.0) -> Job:
        """Test helper: block until a job settles."""
        import time

        job = self.get(job_id)
        deadline = time.monotonic() + timeout
        while job.status in ("queued", "running"):
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {job.status}")
            time.sleep(0.01)
        return job
