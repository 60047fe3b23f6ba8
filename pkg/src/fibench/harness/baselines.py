"""Reference interpolators: trivial lower bounds and a ground-truth oracle.

These stand in for real methods when exercising the pipeline.  The
oracle consumes ground-truth flow and occlusion and upper-bounds any
warping-based approach on this data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fibench import imaging
from fibench.imaging import FlowField, OcclusionMask, RasterImage
from fibench.harness.dataset import GT_TIMESTEPS, DatasetIndex

MODES = ("repeat_first", "blend", "oracle")


def _warp_backward(frame: np.ndarray, flow: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear backward warp: sample frame at x + flow(x).

    Returns (warped, in_bounds); out-of-range samples clamp to the edge.
    """
    h, w = flow.valid.shape
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5 + flow.vectors[..., 0].astype(np.float64)
    py = ys + 0.5 + flow.vectors[..., 1].astype(np.float64)
    in_bounds = (px >= 0.0) & (px <= w) & (py >= 0.0) & (py <= h)

    fx = px - 0.5
    fy = py - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    top = frame[y0c, x0c] * (1.0 - wx) + frame[y0c, x1c] * wx
    bot = frame[y1c, x0c] * (1.0 - wx) + frame[y1c, x1c] * wx
    return top * (1.0 - wy) + bot * wy, in_bounds


def _collision_counts(flow: FlowField) -> np.ndarray:
    """Forward-splat multiplicity at each pixel's landing cell.

    A pixel occluded in an input shares its landing cell with the
    occluder's pixels, so a count above one flags the hidden side.
    """
    h, w = flow.valid.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = np.rint(xs + flow.vectors[..., 0].astype(np.float64)).astype(np.int64)
    ty = np.rint(ys + flow.vectors[..., 1].astype(np.float64)).astype(np.int64)
    ok = flow.valid & (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    grid = np.zeros((h, w), dtype=np.int32)
    np.add.at(grid, (ty[ok], tx[ok]), 1)
    counts = np.zeros((h, w), dtype=np.int32)
    counts[ok] = grid[ty[ok], tx[ok]]
    return counts


def baseline_interpolate(
    mode: str,
    frame0: RasterImage,
    frame1: RasterImage,
    t: float,
    gt_aux: dict | None = None,
) -> RasterImage:
    """Predict the frame at time t from the two inputs.

    repeat_first returns the first input; blend mixes the inputs by t;
    oracle backward-warps along the ground-truth flows and resolves the
    source per pixel from the occlusion class (gt_aux must carry
    flow_to_first, flow_to_last, occlusion).
    """
    if mode not in MODES:
        raise ValueError(f"unknown baseline mode {mode!r}, expected one of {MODES}")
    f0 = frame0.to_working().data.astype(np.float64)
    f1 = frame1.to_working().data.astype(np.float64)
    if f0.shape != f1.shape:
        raise ValueError("input frames disagree in size")

    if mode == "repeat_first":
        return RasterImage(f0.astype(np.float32), coded=False)
    if mode == "blend":
        mix = (1.0 - t) * f0 + t * f1
        return RasterImage(mix.astype(np.float32), coded=False)

    if gt_aux is None:
        raise ValueError("oracle mode requires ground-truth flow and occlusion")
    flow0: FlowField = gt_aux["flow_to_first"]
    flow1: FlowField = gt_aux["flow_to_last"]
    occ: OcclusionMask = gt_aux["occlusion"]

    warp0, in0 = _warp_backward(f0, flow0)
    warp1, in1 = _warp_backward(f1, flow1)
    blend = (1.0 - t) * f0 + t * f1
    average = 0.5 * (warp0 + warp1)

    out = blend.copy()
    usable = occ.valid & flow0.valid & flow1.valid
    cls = occ.classes
    sel0 = usable & (cls == 0)
    out[sel0] = average[sel0]

    # Occluded in exactly one input: the class does not say which side,
    # so pick the input whose landing cell is less contested (out of
    # frame counts as maximally contested).
    sel1 = usable & (cls == 1)
    if np.any(sel1):
        score0 = np.where(in0, _collision_counts(flow0) - 1, np.iinfo(np.int32).max)
        score1 = np.where(in1, _collision_counts(flow1) - 1, np.iinfo(np.int32).max)
        use0 = sel1 & (score0 < score1)
        use1 = sel1 & (score1 < score0)
        out[use0] = warp0[use0]
        out[use1] = warp1[use1]
        tied = sel1 & ~use0 & ~use1
        out[tied & in0 & in1] = average[tied & in0 & in1]
    return RasterImage(np.clip(out, 0.0, 1.0).astype(np.float32), coded=False)


def make_baseline_submission(
    index: DatasetIndex,
    mode: str,
    out_dir: Path,
    tiers: tuple[str, ...] | None = None,
    timesteps: tuple[int, ...] | None = None,
    method: str | None = None,
) -> Path:
    """Write a ready-to-validate submission directory for a baseline."""
    if mode == "oracle" and not index.has_ground_truth:
        raise ValueError("oracle baseline needs a ground-truth dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tiers = tuple(index.tiers) if tiers is None else tiers
    timesteps = tuple(GT_TIMESTEPS) if timesteps is None else timesteps
    multi_tier = len(tiers) > 1

    for seq in index.sequences:
        for tier in tiers:
            frame0 = index.load_frame(seq, tier, 0)
            frame1 = index.load_frame(seq, tier, 8)
            if multi_tier:
                w, h = index.tiers[tier]
                dest = out_dir / seq / f"res_{w}x{h}"
            else:
                dest = out_dir / seq
            dest.mkdir(parents=True, exist_ok=True)
            for i in timesteps:
                t = i / 8.0
                gt_aux = None
                if mode == "oracle":
                    gt_aux = {
                        "flow_to_first": index.load_flow(seq, tier, i, 0),
                        "flow_to_last": index.load_flow(seq, tier, i, 8),
                        "occlusion": index.load_occ(seq, tier, i),
                    }
                pred = baseline_interpolate(mode, frame0, frame1, t, gt_aux)
                (dest / f"pred_t{i}.png").write_bytes(imaging.write_image(pred.to_coded()))

    meta = {"method": method or f"baseline-{mode}", "ensembling": False}
    (out_dir / "submission.json").write_text(
        json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir
