"""Thread-backed job registry for long-running training work."""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class Job:
    job_id: str
    kind: str
    state: str = "pending"  # pending | running | done | failed
    progress: dict = field(default_factory=dict)
    result: dict | None = None
    error: str | None = None


class JobRegistry:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def submit(self, kind: str, work: Callable[[Job], dict]) -> Job:
        """Run `work(job)` on a daemon thread; its return value becomes job.result."""
        with self._lock:
            self._counter += 1
            job = Job(job_id=f"{kind}-{self._counter:04d}", kind=kind)
            self._jobs[job.job_id] = job

        def runner():
            job.state = "running"
            try:
                job.result = work(job)
                job.state = "done"
            except Exception as exc:  # surfaced through the status endpoint
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = "failed"
                job.result = {"traceback": traceback.format_exc()}

        threading.Thread(target=runner, daemon=True).start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def run_sync(self, kind: str, work: Callable[[Job], dict]) -> Job:
        """Execute in the calling thread; used by tests and one-shot scripts."""
        with self._lock:
            self._counter += 1
            job = Job(job_id=f"{kind}-{self._counter:04d}", kind=kind, state="running")
            self._jobs[job.job_id] = job
        try:
            job.result = work(job)
            job.state = "done"
        except Exception as exc:
            job.error = f"{type(exc).__name__}: {exc}"
            job.state = "failed"
        return job
