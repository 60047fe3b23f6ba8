"""Submission service: HTTP API, evaluation queue, leaderboard."""

from fibench.server.store import RecordStore, SubmissionRecord
from fibench.server.service import ServerConfig, SubmissionServer

__all__ = ["RecordStore", "ServerConfig", "SubmissionRecord", "SubmissionServer"]
