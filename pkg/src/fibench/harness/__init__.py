"""Dataset loading, submission validation, evaluation, baselines, timing."""

from fibench.harness.dataset import DatasetError, DatasetIndex, load_dataset
from fibench.harness.submission import (
    Submission,
    SubmissionError,
    submission_digest,
    validate_submission,
)
from fibench.harness.baselines import baseline_interpolate, make_baseline_submission
from fibench.harness.evaluate import EvaluateOptions, MetricsReport, evaluate_submission
from fibench.harness.report import parse_report, render_report
from fibench.harness.timing import TimingResult, WorkerError, time_command

__all__ = [
    "DatasetError",
    "DatasetIndex",
    "EvaluateOptions",
    "MetricsReport",
    "Submission",
    "SubmissionError",
    "TimingResult",
    "WorkerError",
    "baseline_interpolate",
    "evaluate_submission",
    "load_dataset",
    "make_baseline_submission",
    "parse_report",
    "render_report",
    "submission_digest",
    "time_command",
    "validate_submission",
]
