"""Durable asynchronous jobs for the HTTP service.

Job records persist to a JSON file on every transition, so queued,
done and failed jobs survive a restart; a job caught mid-run is
re-queued on load. One worker thread drains the queue in creation
order, which also guarantees at most one running job per dataset and
kind. State transitions are restricted to queued -> running ->
(done | failed), and result_ref is present exactly on done.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .errors import NotFoundError, ValidationError

JOB_KINDS = ("extract", "cluster", "train")
JOB_STATES = ("queued", "running", "done", "failed")

JobHandler = Callable[["JobRecord", "JobStore"], str]


@dataclass
class JobRecord:
    id: str
    kind: str
    state: str
    progress: float
    dataset_id: str
    params: dict
    result_ref: str | None = None
    error: str | None = None
    created_at: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def _new_job_id() -> str:
    return f"job-{uuid.uuid4().hex[:12]}"


class JobStore:
    """Thread-safe persistent job table."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.RLock()
        self._jobs: dict[str, JobRecord] = {}
        self._order: list[str] = []
        if self._path.exists():
            raw = json.loads(self._path.read_text(encoding="utf-8"))
            for entry in raw.get("jobs", []):
                record = JobRecord(**entry)
                if record.state == "running":  # interrupted by a restart
                    record.state = "queued"
                    record.progress = 0.0
                self._jobs[record.id] = record
                self._order.append(record.id)
            self._save_locked()

    def create(self, kind: str, dataset_id: str, params: dict) -> JobRecord:
        if kind not in JOB_KINDS:
            raise ValidationError(f"job kind must be one of {JOB_KINDS}, got {kind!r}")
        record = JobRecord(
            id=_new_job_id(),
            kind=kind,
            state="queued",
            progress=0.0,
            dataset_id=dataset_id,
            params=dict(params),
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        with self._lock:
            self._jobs[record.id] = record
            self._order.append(record.id)
            self._save_locked()
        return self._copy(record)

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            record = self._jobs.get(job_id)
            if record is None:
                raise NotFoundError(f"no such job: {job_id!r}")
            return self._copy(record)

    def claim_next(self) -> JobRecord | None:
        """Move the oldest queued job to running and return it."""
        with self._lock:
            for job_id in self._order:
                record = self._jobs[job_id]
                if record.state == "queued":
                    record.state = "running"
                    self._save_locked()
                    return self._copy(record)
        return None

    def set_progress(self, job_id: str, progress: float) -> None:
        with self._lock:
            record = self._require_running(job_id)
            record.progress = min(max(float(progress), 0.0), 1.0)
            self._save_locked()

    def finish(self, job_id: str, result_ref: str) -> None:
        if not result_ref:
            raise ValidationError("a finished job must carry a result_ref")
        with self._lock:
            record = self._require_running(job_id)
            record.state = "done"
            record.progress = 1.0
            record.result_ref = result_ref
            self._save_locked()

    def fail(self, job_id: str, error: str) -> None:
        with self._lock:
            record = self._require_running(job_id)
            record.state = "failed"
            record.error = error
            self._save_locked()

    def _require_running(self, job_id: str) -> JobRecord:
        record = self._jobs.get(job_id)
        if record is None:
            raise NotFoundError(f"no such job: {job_id!r}")
        if record.state != "running":
            raise ValidationError(f"job {job_id!r} is {record.state}, not running")
        return record

    @staticmethod
    def _copy(record: JobRecord) -> JobRecord:
        return JobRecord(**asdict(record))

    def _save_locked(self) -> None:
        payload = {"jobs": [self._jobs[job_id].to_json() for job_id in self._order]}
        tmp = self._path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        tmp.replace(self._path)


def run_job(record: JobRecord, store: JobStore, handlers: Mapping[str, JobHandler]) -> None:
    """Execute one claimed job; any handler exception fails the job."""
    handler = handlers.get(record.kind)
    if handler is None:
        store.fail(record.id, f"no handler registered for kind {record.kind!r}")
        return
    try:
        result_ref = handler(record, store)
    except Exception as exc:  # job isolation: a failed job must not kill the worker
        store.fail(record.id, str(exc) or exc.__class__.__name__)
    else:
        store.finish(record.id, result_ref)


def run_next(store: JobStore, handlers: Mapping[str, JobHandler]) -> bool:
    """Claim and run one queued job; False when the queue is empty."""
    record = store.claim_next()
    if record is None:
        return False
    run_job(record, store, handlers)
    return True


class JobWorker:
    """Single background thread draining the queue in creation order."""

    def __init__(self, store: JobStore, handlers: Mapping[str, JobHandler]):
        self._store = store
        self._handlers = dict(handlers)
        self._wake = threading.Event()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, name="reviewlens-jobs", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def notify(self) -> None:
        self._wake.set()

    def stop(self) -> None:
        self._stopped = True
        self._wake.set()

    def _run(self) -> None:
        while not self._stopped:
            if not run_next(self._store, self._handlers):
                self._wake.wait(timeout=0.05)
                self._wake.clear()
