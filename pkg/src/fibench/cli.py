"""Command-line interface.

Exit codes: 0 success, 2 validation failure, 3 dataset error, 4 worker
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from fibench.harness.dataset import DatasetError, load_dataset
from fibench.harness.baselines import MODES, make_baseline_submission
from fibench.harness.evaluate import ConfigurationError, EvaluateOptions, evaluate_submission
from fibench.harness.report import FORMATS, render_report
from fibench.harness.submission import SubmissionError, validate_submission
from fibench.harness.timing import WorkerError, time_command
from fibench.synth.scene import GeneratorConfig, desk_config, mini_config, paper_scale_config
from fibench.synth.sequence import export_public, generate_dataset

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATASET = 3
EXIT_WORKER = 4

PRESETS = {
    "paper": paper_scale_config,
    "desk": desk_config,
    "mini": mini_config,
}


def _config_from_args(args) -> GeneratorConfig:
    if args.config:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        return GeneratorConfig(**payload)
    factory = PRESETS[args.preset]
    return factory()


def cmd_generate(args) -> int:
    config = _config_from_args(args)
    count = args.count if args.count is not None else config.sequence_count
    bundles = generate_dataset(config, args.seed, Path(args.out), count=count)
    print(f"generated {len(bundles)} sequences under {args.out}")
    if args.public_export:
        export_public(Path(args.out), Path(args.public_export))
        print(f"participant export written to {args.public_export}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    index = load_dataset(Path(args.dataset))
    tiers = None if args.tier == "all" else (args.tier,)
    sub = validate_submission(Path(args.submission), index, tiers=tiers)
    for warning in sub.warnings:
        print(warning, file=sys.stderr)
    options = EvaluateOptions(tiers=tiers, multi_frame_tier=args.multi_tier)
    report = evaluate_submission(sub, index, options)
    fmt = args.format
    if fmt is None:
        suffix = Path(args.out).suffix.lower() if args.out else ".txt"
        fmt = {".txt": "plain", ".csv": "csv", ".tex": "latex"}.get(suffix, "plain")
    text = render_report(report, fmt)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_baseline(args) -> int:
    index = load_dataset(Path(args.dataset))
    tiers = None if args.tier == "all" else (args.tier,)
    timesteps = tuple(args.timesteps) if args.timesteps else None
    make_baseline_submission(index, args.mode, Path(args.out), tiers=tiers, timesteps=timesteps)
    print(f"baseline '{args.mode}' submission written to {args.out}")
    return EXIT_OK


def cmd_time(args) -> int:
    index = load_dataset(Path(args.dataset))
    if args.tier not in index.tiers:
        raise DatasetError(f"tier {args.tier!r} not in dataset")
    seq = index.sequences[0]
    timesteps = [4] if args.frames == 1 else list(range(1, 8))
    out_dir = Path(args.out or "timing_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    job = {
        "frame0": str(index.frame_path(seq, args.tier, 0)),
        "frame1": str(index.frame_path(seq, args.tier, 8)),
        "timesteps": timesteps,
        "out_dir": str(out_dir),
    }
    result = time_command(
        args.worker, job, reps=args.reps, warmup=args.warmup, timeout_s=args.timeout
    )
    print(
        f"tier {args.tier}, {args.frames} frame(s): median {result.median_s:.4f} s "
        f"(min {result.min_s:.4f}, max {result.max_s:.4f}, "
        f"reps {result.reps}, warmup {result.warmup})"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from fibench.server.service import ServerConfig, SubmissionServer

    config = ServerConfig(
        dataset_root=Path(args.dataset),
        storage_root=Path(args.storage),
        host=args.host,
        port=args.port,
        size_limit=args.size_limit,
        default_tier=args.sort_tier,
    )
    server = SubmissionServer(config)
    server.start()
    print(f"listening on {config.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibench")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    g.add_argument("--config", help="JSON file of generator parameters")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=None)
    g.add_argument("--public-export", default=None)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="evaluate a submission against a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--submission", required=True)
    e.add_argument("--tier", default="all")
    e.add_argument("--multi-tier", default="1k")
    e.add_argument("--out", default=None, help="report path (.txt/.csv/.tex)")
    e.add_argument("--format", choices=FORMATS, default=None)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", help="produce a baseline submission")
    b.add_argument("--mode", choices=MODES, required=True)
    b.add_argument("--dataset", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--tier", default="all")
    b.add_argument("--timesteps", type=int, nargs="*", default=None)
    b.set_defaults(func=cmd_baseline)

    t = sub.add_parser("time", help="measure worker runtime over the line protocol")
    t.add_argument("--worker", required=True)
    t.add_argument("--dataset", required=True)
    t.add_argument("--tier", default="1k")
    t.add_argument("--frames", type=int, choices=(1, 7), default=1)
    t.add_argument("--reps", type=int, default=5)
    t.add_argument("--warmup", type=int, default=1)
    t.add_argument("--timeout", type=float, default=600.0)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_time)

    s = sub.add_parser("serve", help="run the submission service")
    s.add_argument("--dataset", required=True)
    s.add_argument("--storage", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--size-limit", type=int, default=256 * 1024 * 1024)
    s.add_argument("--sort-tier", default="1k")
    s.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except SubmissionError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except WorkerError as exc:
        print(f"worker error: {exc}", file=sys.stderr)
        return EXIT_WORKER


if __name__ == "__main__":
    sys.exit(main())
