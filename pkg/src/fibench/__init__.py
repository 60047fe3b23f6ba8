"""Frame-interpolation benchmarking toolkit.

Synthetic test sequences with strictly linear per-pixel motion and exact
ground truth, pooled per-pixel quality metrics, an evaluation harness
with baselines and a timing protocol, and a submission service with a
leaderboard.
"""

__version__ = "0.1.0"
