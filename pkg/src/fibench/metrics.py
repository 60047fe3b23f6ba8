"""Pixel-wise error metrics and rank statistics.

The pooled metric family takes the logarithm after averaging squared
errors over every evaluated pixel, so masked or unbalanced regions keep
their per-pixel weight; the classic per-frame mean does the opposite and
equals the log of the geometric mean of the frame MSEs.  The deviation
variant scores the sample standard deviation of the squared errors and
punishes spatially concentrated error at matched means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fibench.imaging import MSE_FLOOR, AttributeMap, FlowField, OcclusionMask, RasterImage

DB_CAP = -10.0 * math.log10(MSE_FLOOR)  # 100 dB for perfect predictions

MAGNITUDE_EDGES = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, math.inf)
PHOTOMETRIC_EDGES = (0.0, 0.01, 0.02, 0.04, 0.08, 0.16, math.inf)
ANGLE_BIN_COUNT = 36
ANGLE_BIN_WIDTH_DEG = 10.0


class UndefinedMetricError(ValueError):
    """Metric requested from an accumulator without enough pixels."""


@dataclass(frozen=True)
class ErrorAccumulator:
    """Streaming sums of per-pixel squared error, mergeable componentwise."""

    count: int = 0
    sum_se: float = 0.0
    sum_se_sq: float = 0.0

    def merge(self, other: "ErrorAccumulator") -> "ErrorAccumulator":
        return ErrorAccumulator(
            self.count + other.count,
            self.sum_se + other.sum_se,
            self.sum_se_sq + other.sum_se_sq,
        )

    @classmethod
    def from_values(cls, se: np.ndarray) -> "ErrorAccumulator":
        se = np.asarray(se, dtype=np.float64).ravel()
        return cls(int(se.size), float(se.sum()), float(np.square(se).sum()))


@dataclass(frozen=True)
class FrameErrors:
    """Per-frame mean squared errors for the classic per-frame average."""

    mse: tuple[float, ...]

    def __post_init__(self):
        if any(m < 0.0 or m > 1.0 for m in self.mse):
            raise ValueError("per-frame MSE values must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.mse)


@dataclass
class BinnedReport:
    """Disjoint, exhaustive accumulators keyed by a per-pixel attribute."""

    kind: str  # magnitude | angle | occlusion | photometric
    labels: list[str]
    bins: list[ErrorAccumulator] = field(default_factory=list)

    def total_count(self) -> int:
        return sum(b.count for b in self.bins)


def _db(mean_value: float) -> float:
    return -10.0 * math.log10(max(mean_value, MSE_FLOOR))


def se_map(pred: RasterImage, gt: RasterImage) -> AttributeMap:
    """Per-pixel squared error, averaged over the three channels."""
    p = pred.to_working().data.astype(np.float64)
    g = gt.to_working().data.astype(np.float64)
    if p.shape != g.shape:
        raise ValueError(f"dimension mismatch: pred {p.shape} vs gt {g.shape}")
    se = np.square(p - g).mean(axis=-1)
    return AttributeMap(se, np.ones(se.shape, dtype=bool))


def psnr_mean_frames(errors: FrameErrors) -> float:
    """Classic metric: average of per-frame -10*log10(MSE_i), 100 dB capped."""
    if errors.n < 1:
        raise ValueError("need at least one frame")
    return sum(_db(m) for m in errors.mse) / errors.n


def psnr_star(acc: ErrorAccumulator) -> float:
    """Pooled metric: -10*log10 of the mean squared error over all pixels."""
    if acc.count < 1:
        raise UndefinedMetricError("no evaluated pixels")
    return _db(acc.sum_se / acc.count)


def psnr_star_sigma(acc: ErrorAccumulator) -> float:
    """Deviation metric: -10*log10 of the sample std (n-1) of squared errors.

    Computed from the raw double-precision sums; variance below the
    cancellation noise floor of that subtraction is treated as exactly
    zero so constant error fields hit the cap.
    """
    if acc.count < 2:
        raise UndefinedMetricError("need at least two pixels for a deviation")
    mean = acc.sum_se / acc.count
    var = (acc.sum_se_sq - acc.count * mean * mean) / (acc.count - 1)
    noise_floor = 64.0 * np.finfo(np.float64).eps * acc.sum_se_sq / (acc.count - 1)
    if var <= noise_floor:
        var = 0.0
    return _db(math.sqrt(max(var, 0.0)))


def accumulate(
    acc: ErrorAccumulator, se: AttributeMap, mask: np.ndarray | None = None
) -> ErrorAccumulator:
    """Add the selected valid pixels of an SE map to the accumulator."""
    select = se.valid
    if mask is not None:
        if mask.shape != se.values.shape:
            raise ValueError("mask dimensions do not match the SE map")
        select = select & mask
    return acc.merge(ErrorAccumulator.from_values(se.values[select]))


def split_by_occlusion(se: AttributeMap, occ: OcclusionMask) -> BinnedReport:
    """Three accumulators keyed by visibility class; counts partition valid pixels."""
    if occ.classes.shape != se.values.shape:
        raise ValueError("occlusion mask dimensions do not match the SE map")
    report = BinnedReport(kind="occlusion", labels=["occ0", "occ1", "occ2"])
    valid = se.valid & occ.valid
    for cls in range(3):
        sel = valid & (occ.classes == cls)
        report.bins.append(ErrorAccumulator.from_values(se.values[sel]))
    return report


def _angle_bin_indices(flow: FlowField) -> np.ndarray:
    deg = np.degrees(np.arctan2(flow.vectors[..., 1], flow.vectors[..., 0]))
    # Bins are centered on multiples of 10 degrees: bin k covers
    # [10k - 5, 10k + 5).
    shifted = np.mod(deg + ANGLE_BIN_WIDTH_DEG / 2.0, 360.0)
    return np.floor(shifted / ANGLE_BIN_WIDTH_DEG).astype(np.int64) % ANGLE_BIN_COUNT


def bin_by_attribute(
    se: AttributeMap,
    attribute: FlowField | AttributeMap,
    kind: str,
    edges: tuple[float, ...] | None = None,
) -> BinnedReport:
    """Bin pixels by motion magnitude, motion angle, or a scalar attribute.

    Magnitude uses the flow 2-norm with geometric default edges; angle
    folds atan2(dy, dx) into 36 bins of 10 degrees centered on the bin
    midpoints; photometric uses the scalar map with its own default
    edges.
    """
    if kind == "angle":
        if not isinstance(attribute, FlowField):
            raise ValueError("angle binning requires a flow field")
        valid = se.valid & attribute.valid
        idx = _angle_bin_indices(attribute)
        labels = [f"deg{int(k * ANGLE_BIN_WIDTH_DEG):03d}" for k in range(ANGLE_BIN_COUNT)]
        report = BinnedReport(kind=kind, labels=labels)
        for k in range(ANGLE_BIN_COUNT):
            sel = valid & (idx == k)
            report.bins.append(ErrorAccumulator.from_values(se.values[sel]))
        return report

    if kind == "magnitude":
        if not isinstance(attribute, FlowField):
            raise ValueError("magnitude binning requires a flow field")
        scores = np.linalg.norm(attribute.vectors.astype(np.float64), axis=-1)
        valid = se.valid & attribute.valid
        edges = MAGNITUDE_EDGES if edges is None else edges
    elif kind == "photometric":
        if not isinstance(attribute, AttributeMap):
            raise ValueError("photometric binning requires a scalar attribute map")
        scores = attribute.values
        valid = se.valid & attribute.valid
        edges = PHOTOMETRIC_EDGES if edges is None else edges
    else:
        raise ValueError(f"unknown attribute kind {kind!r}")

    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")
    labels = []
    for lo, hi in zip(edges, edges[1:]):
        hi_txt = "inf" if math.isinf(hi) else f"{hi:g}"
        labels.append(f"{lo:g}to{hi_txt}")
    report = BinnedReport(kind=kind, labels=labels)
    for lo, hi in zip(edges, edges[1:]):
        sel = valid & (scores >= lo) & (scores < hi)
        report.bins.append(ErrorAccumulator.from_values(se.values[sel]))
    return report


def angle_deviations(report: BinnedReport, overall: ErrorAccumulator) -> list[float | None]:
    """Per-bin difference from the overall pooled metric (None for empty bins)."""
    base = psnr_star(overall)
    out: list[float | None] = []
    for acc in report.bins:
        out.append(psnr_star(acc) - base if acc.count > 0 else None)
    return out


def nonlinearity_map(flow_a: FlowField, flow_b: FlowField) -> AttributeMap:
    """2-norm of the summed flows toward the two inputs; zero under linear motion."""
    if flow_a.vectors.shape != flow_b.vectors.shape:
        raise ValueError("flow dimensions do not match")
    valid = flow_a.valid & flow_b.valid
    total = flow_a.vectors.astype(np.float64) + flow_b.vectors.astype(np.float64)
    values = np.where(valid, np.linalg.norm(total, axis=-1), 0.0)
    return AttributeMap(values, valid)


def flow_consistency_occlusion(
    forward: FlowField, backward: FlowField, threshold: float = 1.0
) -> np.ndarray:
    """Estimate occlusion from round-trip flow disagreement.

    A pixel is flagged when following the forward flow and then the
    backward flow sampled at the landing point misses the start by more
    than ``threshold`` pixels.  This is the estimation-based counterpart
    to the exact layer-visibility ground truth; useful on real footage
    where no layer decomposition exists.
    """
    h, w = forward.valid.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + 0.5 + forward.vectors[..., 0].astype(np.float64)
    ty = ys + 0.5 + forward.vectors[..., 1].astype(np.float64)
    in_bounds = (tx >= 0) & (tx <= w) & (ty >= 0) & (ty <= h)

    fx = np.clip(tx - 0.5, 0, w - 1)
    fy = np.clip(ty - 0.5, 0, h - 1)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    back = backward.vectors.astype(np.float64)
    sampled = (
        back[y0, x0] * (1 - wx) * (1 - wy)
        + back[y0, x1] * wx * (1 - wy)
        + back[y1, x0] * (1 - wx) * wy
        + back[y1, x1] * wx * wy
    )
    round_trip = np.linalg.norm(forward.vectors.astype(np.float64) + sampled, axis=-1)
    occluded = ~in_bounds | (round_trip > threshold)
    return occluded & forward.valid


def top_fraction_mask(scores: AttributeMap, fraction: float) -> np.ndarray:
    """Keep-mask excluding exactly floor(fraction * valid) top-scoring pixels.

    Ties break by row-major pixel index: among equal scores the
    index-maximal pixels are excluded first, so the rule is stable.
    """
    if not (0.0 <= fraction < 1.0):
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")
    valid = scores.valid
    n_valid = int(valid.sum())
    n_drop = int(math.floor(fraction * n_valid))
    keep = valid.copy()
    if n_drop == 0:
        return keep
    flat_idx = np.nonzero(valid.ravel())[0]
    flat_scores = scores.values.ravel()[flat_idx]
    order = np.argsort(flat_scores, kind="stable")  # ascending score, ties by index
    drop = flat_idx[order[n_valid - n_drop :]]
    keep.ravel()[drop] = False
    return keep


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mid-rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(xs: dict[str, float], ys: dict[str, float]) -> float:
    """Rank correlation: Pearson correlation of mid-ranks over shared labels.

    Without ties this equals 1 - 6*sum(d^2) / (n*(n^2-1)).
    """
    if set(xs) != set(ys):
        raise ValueError("rank tables must carry the same label set")
    labels = sorted(xs)
    if len(labels) < 2:
        raise ValueError("need at least two entries")
    rx = _midranks(np.array([xs[l] for l in labels], dtype=np.float64))
    ry = _midranks(np.array([ys[l] for l in labels], dtype=np.float64))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx * rx).sum()) * float((ry * ry).sum()))
    if denom == 0.0:
        raise ValueError("rank variance is zero; correlation undefined")
    return float((rx * ry).sum() / denom)


def competition_ranks(scores: list[float]) -> list[int]:
    """Descending competition ranking: ties share the smaller rank, next skipped."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    prev_score: float | None = None
    prev_rank = 0
    for position, idx in enumerate(order, start=1):
        if prev_score is not None and scores[idx] == prev_score:
            ranks[idx] = prev_rank
        else:
            ranks[idx] = position
            prev_rank = position
            prev_score = scores[idx]
    return ranks
