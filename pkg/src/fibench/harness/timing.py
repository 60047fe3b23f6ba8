"""Wall-clock runtime measurement over a long-lived worker process.

The worker is launched once and then fed one job per line on stdin::

    {"frame0": ..., "frame1": ..., "timesteps": [...], "out_dir": ..., "job": k}

It must write its outputs durably and only then print a line starting
with DONE to stdout.  Elapsed time is measured between the job send and
the DONE receipt, so model-load time never pollutes the numbers; jobs
run strictly one at a time with no batching.  Warmup runs are dispatched
and timed out like measured runs but excluded from the statistics.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass


class WorkerError(RuntimeError):
    """Worker crashed, answered garbage, or timed out."""


@dataclass(frozen=True)
class TimingResult:
    median_s: float
    min_s: float
    max_s: float
    times_s: tuple[float, ...]
    warmup: int
    reps: int
    dispatched: int

    def __post_init__(self):
        if self.reps < 3:
            raise ValueError("timing needs at least 3 measured repetitions")
        if not (self.min_s <= self.median_s <= self.max_s):
            raise ValueError("inconsistent order statistics")


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return 0.5 * (ordered[mid - 1] + ordered[mid])


class _LineReader:
    """Background reader so stdout waits can time out cleanly."""

    def __init__(self, stream):
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream):
        for line in stream:
            self._queue.put(line)
        self._queue.put(None)

    def readline(self, timeout: float) -> str | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError


def time_command(
    worker_cmd: str | list[str],
    job: dict,
    *,
    reps: int,
    warmup: int = 1,
    timeout_s: float = 600.0,
) -> TimingResult:
    """Launch the worker and measure ``reps`` runs of one job description.

    Exactly warmup + reps jobs are dispatched.  The reported statistics
    cover only the measured runs.
    """
    if reps < 3:
        raise ValueError("need at least 3 measured repetitions")
    argv = shlex.split(worker_cmd) if isinstance(worker_cmd, str) else list(worker_cmd)
    proc = subprocess.Popen(
        argv,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    reader = _LineReader(proc.stdout)
    times: list[float] = []
    dispatched = 0
    try:
        for k in range(warmup + reps):
            payload = dict(job)
            payload["job"] = k
            line = json.dumps(payload, sort_keys=True)
            started = time.perf_counter()
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise WorkerError(
                    f"worker exited before job {k}: {_diagnostics(proc)}"
                ) from exc
            dispatched += 1
            while True:
                try:
                    answer = reader.readline(timeout=timeout_s)
                except TimeoutError:
                    proc.kill()
                    raise WorkerError(f"job {k} timed out after {timeout_s:g} s") from None
                if answer is None:
                    raise WorkerError(f"worker exited during job {k}: {_diagnostics(proc)}")
                if answer.strip().startswith("DONE"):
                    break
                # Anything else on stdout is worker chatter; ignore it.
            elapsed = time.perf_counter() - started
            if k >= warmup:
                times.append(elapsed)
    finally:
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    return TimingResult(
        median_s=_median(times),
        min_s=min(times),
        max_s=max(times),
        times_s=tuple(times),
        warmup=warmup,
        reps=reps,
        dispatched=dispatched,
    )


def _diagnostics(proc: subprocess.Popen) -> str:
    try:
        stderr = proc.stderr.read() if proc.stderr else ""
    except Exception:
        stderr = ""
    tail = stderr.strip().splitlines()[-5:]
    code = proc.poll()
    return f"exit code {code}; stderr tail: {' | '.join(tail) if tail else '(empty)'}"
