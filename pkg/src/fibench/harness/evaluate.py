"""End-to-end evaluation of a validated submission against ground truth.

Produces a flat, deterministically ordered key/value report: pooled
metrics over all pixels, occlusion splits, attribute-binned metrics, a
masked most-linear variant, and (at one tier) the multi-frame section
with the deviation metric per timestep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import fibench
from fibench import metrics
from fibench.imaging import AttributeMap
from fibench.harness.dataset import GT_TIMESTEPS, SINGLE_FRAME_TIMESTEP, DatasetIndex
from fibench.harness.submission import Submission

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvaluateOptions:
    tiers: tuple[str, ...] | None = None  # None: every tier the submission covers
    multi_frame_tier: str = "1k"
    mask_fraction: float = 0.03
    # Nonlinearity at or below this many pixels counts as exactly linear
    # and is never maskable; matches the generator's linearity guarantee.
    nonlinearity_tolerance: float = 1e-3
    include_bins: bool = True


@dataclass
class MetricsReport:
    method: str
    ensembling: bool
    toolkit_version: str
    schema_version: int
    values: dict[str, float | int] = field(default_factory=dict)

    def sort_key(self, tier: str) -> float | None:
        return self.values.get(f"{tier}.single.all.psnr_star")


class ConfigurationError(RuntimeError):
    """Requested evaluation cannot run against this dataset."""


def _put_acc(values: dict, prefix: str, acc: metrics.ErrorAccumulator, *, sigma: bool = False):
    values[f"{prefix}.count"] = acc.count
    if acc.count > 0:
        values[f"{prefix}.psnr_star"] = metrics.psnr_star(acc)
    if sigma and acc.count > 1:
        values[f"{prefix}.psnr_star_sigma"] = metrics.psnr_star_sigma(acc)


def evaluate_submission(
    sub: Submission, index: DatasetIndex, options: EvaluateOptions | None = None
) -> MetricsReport:
    """Deterministic metrics for a validated submission.

    Single-frame metrics (the centered timestep) run at every requested
    tier; the seven-timestep multi-frame section runs only at the
    configured tier.  The result is a pure function of the submission
    bytes, the dataset bytes, and the options.
    """
    options = options or EvaluateOptions()
    if not index.has_ground_truth:
        raise ConfigurationError("evaluation requires a ground-truth dataset")

    tiers = options.tiers if options.tiers is not None else sub.tiers
    for tier in tiers:
        if tier not in index.tiers:
            raise ConfigurationError(f"tier {tier!r} is not part of the dataset")
        if tier not in sub.tiers:
            raise ConfigurationError(f"tier {tier!r} is not part of the submission")
    # Largest tier first, matching the dataset pyramid order.
    tiers = tuple(sorted(tiers, key=lambda lb: -index.tiers[lb][0]))

    report = MetricsReport(
        method=sub.method,
        ensembling=sub.ensembling,
        toolkit_version=fibench.__version__,
        schema_version=SCHEMA_VERSION,
    )
    values = report.values

    for tier in tiers:
        if SINGLE_FRAME_TIMESTEP not in sub.timesteps:
            continue
        i = SINGLE_FRAME_TIMESTEP
        overall = metrics.ErrorAccumulator()
        masked = metrics.ErrorAccumulator()
        occ_bins = [metrics.ErrorAccumulator() for _ in range(3)]
        mag_report: metrics.BinnedReport | None = None
        angle_report: metrics.BinnedReport | None = None
        phot_report: metrics.BinnedReport | None = None

        for seq in sorted(sub.sequences):
            gt = index.load_frame(seq, tier, i)
            pred = sub.load_frame(seq, tier, i)
            if (pred.width, pred.height) != (gt.width, gt.height):
                raise ConfigurationError(f"{seq} t{i} ({tier}): prediction size mismatch")
            se = metrics.se_map(pred, gt)
            flow0 = index.load_flow(seq, tier, i, 0)
            flow1 = index.load_flow(seq, tier, i, 8)
            occ = index.load_occ(seq, tier, i)
            phot = index.load_phot(seq, tier, i)
            gt_valid = occ.valid & flow0.valid & flow1.valid
            se = AttributeMap(se.values, se.valid & gt_valid)

            overall = metrics.accumulate(overall, se)

            # Masked most-linear variant: only pixels whose nonlinearity
            # exceeds the tolerance are candidates for exclusion.
            nl = metrics.nonlinearity_map(flow0, flow1)
            eligible = nl.values > options.nonlinearity_tolerance
            budget = int(np.floor(options.mask_fraction * se.valid.sum()))
            n_drop = min(budget, int((eligible & se.valid).sum()))
            keep = se.valid.copy()
            if n_drop > 0:
                flat = np.nonzero((eligible & se.valid).ravel())[0]
                order = np.argsort(nl.values.ravel()[flat], kind="stable")
                keep.ravel()[flat[order[len(flat) - n_drop :]]] = False
            masked = metrics.accumulate(masked, se, keep)

            occ_split = metrics.split_by_occlusion(se, occ)
            occ_bins = [a.merge(b) for a, b in zip(occ_bins, occ_split.bins)]

            if options.include_bins:
                mag = metrics.bin_by_attribute(se, flow0, "magnitude")
                ang = metrics.bin_by_attribute(se, flow0, "angle")
                pho = metrics.bin_by_attribute(se, phot, "photometric")
                if mag_report is None:
                    mag_report, angle_report, phot_report = mag, ang, pho
                else:
                    mag_report.bins = [a.merge(b) for a, b in zip(mag_report.bins, mag.bins)]
                    angle_report.bins = [a.merge(b) for a, b in zip(angle_report.bins, ang.bins)]
                    phot_report.bins = [a.merge(b) for a, b in zip(phot_report.bins, pho.bins)]

        _put_acc(values, f"{tier}.single.all", overall)
        for cls in range(3):
            _put_acc(values, f"{tier}.single.occ{cls}", occ_bins[cls])
        _put_acc(values, f"{tier}.single.masked{round((1 - options.mask_fraction) * 100)}", masked)
        if options.include_bins and mag_report is not None:
            for label, acc in zip(mag_report.labels, mag_report.bins):
                _put_acc(values, f"{tier}.single.mag.{label}", acc)
            deviations = metrics.angle_deviations(angle_report, overall)
            for label, acc, dev in zip(angle_report.labels, angle_report.bins, deviations):
                _put_acc(values, f"{tier}.single.angle.{label}", acc)
                if dev is not None:
                    values[f"{tier}.single.angle.{label}.deviation"] = dev
            for label, acc in zip(phot_report.labels, phot_report.bins):
                _put_acc(values, f"{tier}.single.phot.{label}", acc)

    multi_tier = options.multi_frame_tier
    if (
        multi_tier in tiers
        and all(i in sub.timesteps for i in GT_TIMESTEPS)
    ):
        for i in GT_TIMESTEPS:
            acc = metrics.ErrorAccumulator()
            for seq in sorted(sub.sequences):
                gt = index.load_frame(seq, multi_tier, i)
                pred = sub.load_frame(seq, multi_tier, i)
                occ = index.load_occ(seq, multi_tier, i)
                se = metrics.se_map(pred, gt)
                se = AttributeMap(se.values, se.valid & occ.valid)
                acc = metrics.accumulate(acc, se)
            _put_acc(values, f"{multi_tier}.multi.t{i}", acc, sigma=True)

    return report
