#!/usr/bin/env python3
"""Stub line-protocol worker for timing tests.

Reads one JSON job per line, sleeps STUB_DELAY seconds (plus
STUB_WARMUP_EXTRA for the first STUB_WARMUP_JOBS jobs), writes one
output file per timestep, then prints DONE.  STUB_MODE=crash3 exits
abruptly on the third job; STUB_LOG appends one line per job received.
"""

import json
import os
import sys
import time


def main() -> None:
    delay = float(os.environ.get("STUB_DELAY", "0.1"))
    warmup_extra = float(os.environ.get("STUB_WARMUP_EXTRA", "0.0"))
    warmup_jobs = int(os.environ.get("STUB_WARMUP_JOBS", "0"))
    mode = os.environ.get("STUB_MODE", "ok")
    log_path = os.environ.get("STUB_LOG")
    count = 0
    for line in sys.stdin:
        if not line.strip():
            continue
        job = json.loads(line)
        count += 1
        if log_path:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(f"job {job.get('job')}\n")
                fh.flush()
                os.fsync(fh.fileno())
        if mode == "crash3" and count == 3:
            print("synthetic failure on purpose", file=sys.stderr, flush=True)
            sys.exit(3)
        time.sleep(delay + (warmup_extra if count <= warmup_jobs else 0.0))
        out_dir = job.get("out_dir")
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            for i in job.get("timesteps", []):
                path = os.path.join(out_dir, f"pred_t{i}.bin")
                with open(path, "wb") as fh:
                    fh.write(b"stub")
                    fh.flush()
                    os.fsync(fh.fileno())
        print(f"DONE {job.get('job')}", flush=True)


if __name__ == "__main__":
    main()
