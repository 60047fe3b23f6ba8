"""Crash-safe persistence: content-addressed blobs plus an append-only log.

Archives are stored once under their digest; every state change is one
NDJSON line appended to records.log with an fsync.  Reports are written
to a temp file and atomically renamed before the done event is logged,
so a record is either fully present after a crash or re-queued.  Replay
tolerates a truncated final line.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

STATES = ("queued", "running", "done", "failed")


@dataclass
class SubmissionRecord:
    id: str
    method: str
    ensembling: bool
    state: str
    received: float
    failure: str | None = None
    warnings: list[str] = field(default_factory=list)

    def to_json(self, report: str | None = None) -> dict:
        doc = {
            "id": self.id,
            "method": self.method,
            "ensembling": self.ensembling,
            "state": self.state,
            "received": self.received,
            "warnings": list(self.warnings),
        }
        if self.failure is not None:
            doc["failure"] = self.failure
        if report is not None:
            doc["report"] = report
        return doc


class RecordStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.blob_dir = self.root / "blobs"
        self.report_dir = self.root / "reports"
        self.log_path = self.root / "records.log"
        for d in (self.root, self.blob_dir, self.report_dir):
            d.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict[str, SubmissionRecord] = {}
        self._order: list[str] = []
        self._replay()

    # -- log plumbing ------------------------------------------------------

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def _replay(self) -> None:
        if not self.log_path.is_file():
            return
        raw = self.log_path.read_bytes().decode("utf-8", errors="replace")
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail from a crash mid-append
            self._apply(event)
        # Anything that was in flight when we died goes back in the queue.
        for rec in self._records.values():
            if rec.state == "running":
                rec.state = "queued"

    def _apply(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "received":
            rec = SubmissionRecord(
                id=event["id"],
                method=event["method"],
                ensembling=bool(event["ensembling"]),
                state="queued",
                received=float(event["received"]),
                warnings=list(event.get("warnings", [])),
            )
            if rec.id not in self._records:
                self._order.append(rec.id)
            self._records[rec.id] = rec
        elif kind == "state":
            rec = self._records.get(event["id"])
            if rec is None:
                return
            state = event["state"]
            if state in STATES:
                rec.state = state
                rec.failure = event.get("failure")

    # -- public API --------------------------------------------------------

    def blob_path(self, digest: str) -> Path:
        return self.blob_dir / f"{digest}.zip"

    def put_blob(self, digest: str, data: bytes) -> Path:
        path = self.blob_path(digest)
        if path.exists():
            return path  # content-addressed: write-once
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        return path

    def report_path(self, digest: str) -> Path:
        return self.report_dir / f"{digest}.txt"

    def put_report(self, digest: str, text: str) -> None:
        path = self.report_path(digest)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        with open(tmp, "r+", encoding="utf-8") as fh:
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def get_report(self, digest: str) -> str | None:
        path = self.report_path(digest)
        return path.read_text(encoding="utf-8") if path.is_file() else None

    def add_record(self, rec: SubmissionRecord) -> None:
        self._append(
            {
                "event": "received",
                "id": rec.id,
                "method": rec.method,
                "ensembling": rec.ensembling,
                "received": rec.received,
                "warnings": rec.warnings,
            }
        )
        with self._lock:
            if rec.id not in self._records:
                self._order.append(rec.id)
            self._records[rec.id] = rec

    def set_state(self, digest: str, state: str, failure: str | None = None) -> None:
        if state not in STATES:
            raise ValueError(f"unknown state {state}")
        self._append({"event": "state", "id": digest, "state": state, "failure": failure})
        with self._lock:
            rec = self._records[digest]
            rec.state = state
            rec.failure = failure

    def get(self, digest: str) -> SubmissionRecord | None:
        with self._lock:
            return self._records.get(digest)

    def all_records(self) -> list[SubmissionRecord]:
        with self._lock:
            return [self._records[d] for d in self._order]

    def pending(self) -> list[str]:
        with self._lock:
            return [d for d in self._order if self._records[d].state == "queued"]


def now() -> float:
    return time.time()
