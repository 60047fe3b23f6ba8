"""HTTP submission service.

Endpoints (versioned JSON bodies unless noted)::

    POST /api/v1/submissions              multipart: archive (+ metadata)
    GET  /api/v1/submissions/{id}         record; embeds the report when done
    GET  /api/v1/submissions/{id}/latex   LaTeX table body (409 until done)
    GET  /api/v1/leaderboard?tier=1k      ranked entries, non-ensembled first
    GET  /api/v1/leaderboard/latex        LaTeX rendering of the board

Evaluation runs on a single background worker against the same harness
code path as the CLI, so server reports are byte-identical to local
evaluation of the same payload.
"""

from __future__ import annotations

import hashlib
import json
import logging
import queue
import re
import tempfile
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from fibench.harness.dataset import DatasetIndex, load_dataset
from fibench.harness.evaluate import EvaluateOptions, evaluate_submission
from fibench.harness.report import parse_report, render_report
from fibench.harness.submission import SubmissionError, validate_submission
from fibench.server.store import RecordStore, SubmissionRecord, now

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
_SUB_RE = re.compile(rf"^{API_PREFIX}/submissions/([0-9a-f]{{64}})(/latex)?$")


@dataclass
class ServerConfig:
    dataset_root: Path
    storage_root: Path
    host: str = "127.0.0.1"
    port: int = 8080
    size_limit: int = 256 * 1024 * 1024
    default_tier: str = "1k"
    options: EvaluateOptions = field(default_factory=EvaluateOptions)


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    match = re.search(r'boundary="?([^";]+)"?', content_type)
    if not match:
        raise ValueError("multipart body without a boundary")
    boundary = match.group(1).encode("latin1")
    parts: dict[str, bytes] = {}
    for chunk in body.split(b"--" + boundary):
        chunk = chunk.strip(b"\r\n")
        if not chunk or chunk == b"--":
            continue
        header_blob, _, payload = chunk.partition(b"\r\n\r\n")
        name = None
        for line in header_blob.split(b"\r\n"):
            if line.lower().startswith(b"content-disposition"):
                m = re.search(rb'name="([^"]+)"', line)
                if m:
                    name = m.group(1).decode("latin1")
        if name is not None:
            parts[name] = payload
    return parts


class SubmissionServer:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.index: DatasetIndex = load_dataset(config.dataset_root)
        self.store = RecordStore(config.storage_root)
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._worker = threading.Thread(target=self._run_worker, daemon=True)
        self._httpd: ThreadingHTTPServer | None = None
        for digest in self.store.pending():
            self._queue.put(digest)

    # -- evaluation worker ---------------------------------------------------

    def _run_worker(self) -> None:
        while True:
            digest = self._queue.get()
            if digest is None:
                return
            try:
                self._evaluate_one(digest)
            except Exception:
                logger.exception("evaluation of %s failed unexpectedly", digest)
                try:
                    self.store.set_state(digest, "failed", "internal evaluation error")
                except Exception:
                    pass

    def _evaluate_one(self, digest: str) -> None:
        self.store.set_state(digest, "running")
        blob = self.store.blob_path(digest)
        try:
            sub = validate_submission(blob, self.index)
            report = evaluate_submission(sub, self.index, self.config.options)
            text = render_report(report, "plain")
        except Exception as exc:
            self.store.set_state(digest, "failed", str(exc))
            return
        # Report lands on disk before the state flip: a crash in between
        # re-queues the job, which rewrites the identical bytes.
        self.store.put_report(digest, text)
        self.store.set_state(digest, "done")

    # -- request handling ------------------------------------------------------

    def _record_doc(self, rec: SubmissionRecord) -> dict:
        report = self.store.get_report(rec.id) if rec.state == "done" else None
        doc = rec.to_json(report)
        doc["schema_version"] = 1
        return doc

    def handle_submit(self, headers, body: bytes) -> tuple[int, dict]:
        content_type = headers.get("Content-Type", "")
        if not content_type.startswith("multipart/form-data"):
            return 400, {"error": "BAD_REQUEST", "detail": "expected multipart/form-data"}
        try:
            parts = _parse_multipart(content_type, body)
        except ValueError as exc:
            return 400, {"error": "BAD_REQUEST", "detail": str(exc)}
        archive = parts.get("archive")
        if archive is None:
            return 400, {"error": "BAD_REQUEST", "detail": "missing archive part"}
        if len(archive) > self.config.size_limit:
            return 413, {"error": "PAYLOAD_TOO_LARGE", "detail": f"limit {self.config.size_limit}"}

        digest = hashlib.sha256(archive).hexdigest()
        existing = self.store.get(digest)
        if existing is not None:
            return 200, self._record_doc(existing)

        with tempfile.NamedTemporaryFile(suffix=".zip", delete=True) as tmp:
            tmp.write(archive)
            tmp.flush()
            try:
                sub = validate_submission(Path(tmp.name), self.index)
            except SubmissionError as exc:
                return 422, {"error": exc.code, "detail": str(exc)}

        meta_part = parts.get("metadata")
        if meta_part is not None:
            try:
                meta = json.loads(meta_part.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                return 400, {"error": "BAD_REQUEST", "detail": "metadata part is not JSON"}
            if "method" in meta and meta["method"] != sub.method:
                return 422, {
                    "error": "METADATA_MISMATCH",
                    "detail": "metadata method does not match submission.json",
                }
            if "ensembling" in meta and bool(meta["ensembling"]) != sub.ensembling:
                return 422, {
                    "error": "METADATA_MISMATCH",
                    "detail": "metadata ensembling flag does not match submission.json",
                }

        self.store.put_blob(digest, archive)
        rec = SubmissionRecord(
            id=digest,
            method=sub.method,
            ensembling=sub.ensembling,
            state="queued",
            received=now(),
            warnings=list(sub.warnings),
        )
        self.store.add_record(rec)
        self._queue.put(digest)
        return 201, self._record_doc(rec)

    def handle_status(self, digest: str) -> tuple[int, dict]:
        rec = self.store.get(digest)
        if rec is None:
            return 404, {"error": "NOT_FOUND", "detail": digest}
        return 200, self._record_doc(rec)

    def handle_latex(self, digest: str) -> tuple[int, dict | str]:
        rec = self.store.get(digest)
        if rec is None:
            return 404, {"error": "NOT_FOUND", "detail": digest}
        if rec.state != "done":
            return 409, {"error": "CONFLICT", "detail": f"record is {rec.state}, not done"}
        text = self.store.get_report(digest)
        return 200, render_report(parse_report(text), "latex")

    def _board_entries(self, tier: str) -> list[dict]:
        entries = []
        for rec in self.store.all_records():
            if rec.state != "done":
                continue
            text = self.store.get_report(rec.id)
            if text is None:
                continue
            report = parse_report(text)
            score = report.sort_key(tier)
            if score is None:
                continue
            entries.append(
                {
                    "method": rec.method,
                    "ensembling": rec.ensembling,
                    "psnr_star": score,
                    "id": rec.id,
                    "received": rec.received,
                }
            )
        return entries

    def handle_leaderboard(self, tier: str | None) -> tuple[int, dict]:
        tier = tier or self.config.default_tier
        if tier not in self.index.tiers:
            return 400, {"error": "BAD_REQUEST", "detail": f"unknown tier {tier!r}"}
        entries = self._board_entries(tier)
        sections = []
        for ensembling in (False, True):
            rows = [e for e in entries if e["ensembling"] == ensembling]
            rows.sort(key=lambda e: (-e["psnr_star"], e["received"]))
            ranked = []
            for rank, row in enumerate(rows, start=1):
                ranked.append(
                    {
                        "rank": rank,
                        "method": row["method"],
                        "ensembling": row["ensembling"],
                        "psnr_star": row["psnr_star"],
                        "id": row["id"],
                    }
                )
            sections.append({"ensembling": ensembling, "entries": ranked})
        return 200, {"schema_version": 1, "tier": tier, "sections": sections}

    def handle_leaderboard_latex(self, tier: str | None) -> tuple[int, dict | str]:
        status, board = self.handle_leaderboard(tier)
        if status != 200:
            return status, board
        reports = []
        for section in board["sections"]:
            for entry in section["entries"]:
                text = self.store.get_report(entry["id"])
                reports.append(parse_report(text))
        if not reports:
            return 200, ""
        return 200, render_report(reports, "latex")

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        service = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                logger.debug("http: " + fmt, *args)

            def _send_json(self, status: int, doc: dict) -> None:
                data = json.dumps(doc, sort_keys=True).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def _send_text(self, status: int, text: str) -> None:
                data = text.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "text/plain; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if urlparse(self.path).path != f"{API_PREFIX}/submissions":
                    self._send_json(404, {"error": "NOT_FOUND", "detail": self.path})
                    return
                length = int(self.headers.get("Content-Length", "0"))
                if length > service.config.size_limit * 2:
                    self._send_json(413, {"error": "PAYLOAD_TOO_LARGE", "detail": "body"})
                    return
                body = self.rfile.read(length)
                status, doc = service.handle_submit(self.headers, body)
                self._send_json(status, doc)

            def do_GET(self):
                parsed = urlparse(self.path)
                match = _SUB_RE.match(parsed.path)
                if match:
                    digest, latex = match.group(1), match.group(2)
                    if latex:
                        status, doc = service.handle_latex(digest)
                        if isinstance(doc, str):
                            self._send_text(status, doc)
                        else:
                            self._send_json(status, doc)
                    else:
                        status, doc = service.handle_status(digest)
                        self._send_json(status, doc)
                    return
                if parsed.path == f"{API_PREFIX}/leaderboard":
                    tier = parse_qs(parsed.query).get("tier", [None])[0]
                    status, doc = service.handle_leaderboard(tier)
                    self._send_json(status, doc)
                    return
                if parsed.path == f"{API_PREFIX}/leaderboard/latex":
                    tier = parse_qs(parsed.query).get("tier", [None])[0]
                    status, doc = service.handle_leaderboard_latex(tier)
                    if isinstance(doc, str):
                        self._send_text(status, doc)
                    else:
                        self._send_json(status, doc)
                    return
                self._send_json(404, {"error": "NOT_FOUND", "detail": parsed.path})

        self._httpd = ThreadingHTTPServer((self.config.host, self.config.port), Handler)
        self._worker.start()

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def serve_forever(self) -> None:
        if self._httpd is None:
            self.start()
        logger.info("serving on %s:%d", self.config.host, self.port)
        self._httpd.serve_forever()

    def serve_in_background(self) -> threading.Thread:
        if self._httpd is None:
            self.start()
        thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        self._queue.put(None)
