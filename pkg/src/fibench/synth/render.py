"""Rendering and exact ground-truth extraction for layered scenes.

Every query works backwards: canvas pixels are pulled through the
inverse of each layer's time-blended warp, sprite color/alpha are
sampled bilinearly, and the topmost layer with alpha >= 0.5 owns the
pixel.  Flow and occlusion are derived from the same ownership, so the
ground truth is a consistent partition by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fibench.imaging import AttributeMap, FlowField, OcclusionMask, RasterImage
from fibench.synth.scene import Layer, SceneSpec
from fibench.synth.transforms import (
    blend_point_map,
    invert_blend_map,
    lerp_photometric,
)

# Layer ownership requires at least this much sprite alpha.
ALPHA_OWNER_THRESHOLD = 0.5


def _grid_points(out_w: int, out_h: int, ratio: float) -> np.ndarray:
    """Pixel centers of an out_w x out_h grid, in canvas coordinates."""
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * ratio
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * ratio
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def _bilinear(arr: np.ndarray, pts: np.ndarray, *, zero_outside: bool) -> np.ndarray:
    """Sample (h, w[, c]) at continuous points with texel centers at i+0.5.

    With zero_outside, taps past the texel grid contribute nothing, so
    values decay to 0 within half a pixel of the sprite rectangle (used
    for alpha).  Otherwise edge texels are extended (used for color,
    where alpha already vanishes at the rim).
    """
    h, w = arr.shape[:2]
    fx = pts[..., 0] - 0.5
    fy = pts[..., 1] - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = fx - x0
    wy = fy - y0
    taps = (
        (y0, x0, (1.0 - wx) * (1.0 - wy)),
        (y0, x0 + 1, wx * (1.0 - wy)),
        (y0 + 1, x0, (1.0 - wx) * wy),
        (y0 + 1, x0 + 1, wx * wy),
    )
    out = np.zeros(pts.shape[:-1] + arr.shape[2:], dtype=np.float64)
    for yy, xx, ww in taps:
        in_range = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        v = arr[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        if arr.ndim == 3:
            ww = ww[..., None]
            if zero_outside:
                in_range = in_range[..., None]
        if zero_outside:
            out += np.where(in_range, v * ww, 0.0)
        else:
            out += v * ww
    return out


def _warped_bbox(
    layer: Layer, t: float, canvas_w: int, canvas_h: int, pad: float = 3.0
) -> tuple[float, float, float, float] | None:
    """Canvas-space bounding box of the warped sprite at time t, or None."""
    w, h = layer.sprite_width, layer.sprite_height
    s = np.linspace(0.0, 1.0, 9)
    zeros = np.zeros_like(s)
    border = np.concatenate(
        [
            np.stack([s * w, zeros], axis=-1),
            np.stack([s * w, zeros + h], axis=-1),
            np.stack([zeros, s * h], axis=-1),
            np.stack([zeros + w, s * h], axis=-1),
        ]
    )
    q = blend_point_map(layer.a, layer.b, t, border)
    x0 = float(q[:, 0].min()) - pad
    x1 = float(q[:, 0].max()) + pad
    y0 = float(q[:, 1].min()) - pad
    y1 = float(q[:, 1].max()) + pad
    if x1 < 0 or y1 < 0 or x0 > canvas_w or y0 > canvas_h:
        return None
    return x0, y0, x1, y1


def _layer_query(
    layer: Layer, t: float, pts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Invert the warp for flat (n, 2) canvas points.

    Returns (sprite points, converged, alpha); alpha is 0 where the
    inversion failed or the point falls outside the sprite.
    """
    p, ok = invert_blend_map(layer.a, layer.b, t, pts)
    alpha = _bilinear(layer.alpha.astype(np.float64), p, zero_outside=True)
    alpha = np.where(ok, alpha, 0.0)
    return p, ok, alpha


@dataclass(frozen=True, eq=False)
class Ownership:
    """Which layer owns each pixel of a query grid at one time."""

    owner: np.ndarray  # (h, w) int16 index into layers_by_z, -1 undetermined
    sprite_points: np.ndarray  # (h, w, 2) float64 sprite coords for the owner
    valid: np.ndarray  # (h, w) bool
    grid: np.ndarray  # (h, w, 2) canvas coordinates
    ratio: float  # canvas px per output px


def resolve_ownership(scene: SceneSpec, t: float, out_size: tuple[int, int] | None = None) -> Ownership:
    """Assign each grid pixel to the topmost layer with alpha >= 0.5."""
    cw, ch = scene.canvas_width, scene.canvas_height
    out_w, out_h = out_size if out_size is not None else (cw, ch)
    ratio = cw / out_w
    grid = _grid_points(out_w, out_h, ratio)
    flat = grid.reshape(-1, 2)
    n = flat.shape[0]

    layers = scene.layers_by_z()
    owner = np.full(n, -1, dtype=np.int16)
    sprite_points = np.zeros((n, 2), dtype=np.float64)
    undecidable = np.zeros(n, dtype=bool)

    for idx in range(len(layers) - 1, -1, -1):
        layer = layers[idx]
        open_px = (owner < 0) & ~undecidable
        if not np.any(open_px):
            break
        bbox = _warped_bbox(layer, t, cw, ch)
        if bbox is None:
            continue
        x0, y0, x1, y1 = bbox
        sel = open_px.copy()
        sel &= (flat[:, 0] >= x0) & (flat[:, 0] <= x1)
        sel &= (flat[:, 1] >= y0) & (flat[:, 1] <= y1)
        if not np.any(sel):
            continue
        p, ok, alpha = _layer_query(layer, t, flat[sel])
        sel_idx = np.nonzero(sel)[0]
        undecidable[sel_idx[~ok]] = True
        hit = ok & (alpha >= ALPHA_OWNER_THRESHOLD)
        hit_idx = sel_idx[hit]
        owner[hit_idx] = idx
        sprite_points[hit_idx] = p[hit]

    valid = (owner >= 0) & ~undecidable
    return Ownership(
        owner=owner.reshape(out_h, out_w),
        sprite_points=sprite_points.reshape(out_h, out_w, 2),
        valid=valid.reshape(out_h, out_w),
        grid=grid,
        ratio=ratio,
    )


def render_frame(
    scene: SceneSpec, t: float, out_size: tuple[int, int] | None = None
) -> tuple[RasterImage, np.ndarray]:
    """Composite all layers at time t; returns (working image, validity).

    Layers are alpha-composited bottom-up with the standard over
    operator after per-layer photometric augmentation lerped to t.
    """
    cw, ch = scene.canvas_width, scene.canvas_height
    out_w, out_h = out_size if out_size is not None else (cw, ch)
    ratio = cw / out_w
    grid = _grid_points(out_w, out_h, ratio)
    flat = grid.reshape(-1, 2)
    n = flat.shape[0]

    out = np.zeros((n, 3), dtype=np.float64)
    valid = np.ones(n, dtype=bool)
    for layer in scene.layers_by_z():
        bbox = _warped_bbox(layer, t, cw, ch)
        if bbox is None:
            continue
        x0, y0, x1, y1 = bbox
        sel = (flat[:, 0] >= x0) & (flat[:, 0] <= x1)
        sel &= (flat[:, 1] >= y0) & (flat[:, 1] <= y1)
        if not np.any(sel):
            continue
        p, ok, alpha = _layer_query(layer, t, flat[sel])
        color = _bilinear(layer.color.astype(np.float64), p, zero_outside=False)
        color = lerp_photometric(layer.phot0, layer.phot1, t).apply(color)
        prev = out[sel]
        blended = color * alpha[:, None] + prev * (1.0 - alpha[:, None])
        out[sel] = blended
        bad = np.nonzero(sel)[0][~ok]
        valid[bad] = False

    img = RasterImage(
        np.clip(out, 0.0, 1.0).astype(np.float32).reshape(out_h, out_w, 3), coded=False
    )
    return img, valid.reshape(out_h, out_w)


def gt_flow(
    scene: SceneSpec,
    t: float,
    t_prime: float,
    out_size: tuple[int, int] | None = None,
    ownership: Ownership | None = None,
) -> FlowField:
    """Exact flow from time t to t_prime, in output-grid pixel units."""
    own = ownership if ownership is not None else resolve_ownership(scene, t, out_size)
    h, w = own.owner.shape
    layers = scene.layers_by_z()
    vectors = np.zeros((h, w, 2), dtype=np.float64)
    for idx, layer in enumerate(layers):
        sel = own.valid & (own.owner == idx)
        if not np.any(sel):
            continue
        p = own.sprite_points[sel]
        target = blend_point_map(layer.a, layer.b, t_prime, p)
        vectors[sel] = (target - own.grid[sel]) / own.ratio
    vectors = np.where(own.valid[..., None], vectors, 0.0)
    return FlowField(vectors.astype(np.float32), own.valid.copy())


def _covered_from_above(
    scene: SceneSpec, layer_idx: int, s: float, points: np.ndarray
) -> np.ndarray:
    """True where any layer stacked above layer_idx covers the points at time s."""
    layers = scene.layers_by_z()
    covered = np.zeros(points.shape[0], dtype=bool)
    for m in range(layer_idx + 1, len(layers)):
        open_px = ~covered
        if not np.any(open_px):
            break
        bbox = _warped_bbox(layers[m], s, scene.canvas_width, scene.canvas_height)
        if bbox is None:
            continue
        x0, y0, x1, y1 = bbox
        sel = open_px & (points[:, 0] >= x0) & (points[:, 0] <= x1)
        sel &= (points[:, 1] >= y0) & (points[:, 1] <= y1)
        if not np.any(sel):
            continue
        _, ok, alpha = _layer_query(layers[m], s, points[sel])
        # A failed inversion here cannot prove coverage; leave uncovered.
        covered[np.nonzero(sel)[0]] = ok & (alpha >= ALPHA_OWNER_THRESHOLD)
    return covered


def occlusion_mask(
    scene: SceneSpec,
    t: float,
    out_size: tuple[int, int] | None = None,
    ownership: Ownership | None = None,
) -> OcclusionMask:
    """Per-pixel count of inputs (t=0, t=1) in which the pixel is not visible.

    A pixel owned by layer L is visible in input s when its linear
    trajectory lands inside the canvas and no layer stacked above L
    covers that landing point at time s.
    """
    own = ownership if ownership is not None else resolve_ownership(scene, t, out_size)
    h, w = own.owner.shape
    layers = scene.layers_by_z()
    cw, ch = scene.canvas_width, scene.canvas_height
    classes = np.zeros((h, w), dtype=np.uint8)
    for idx, layer in enumerate(layers):
        sel = own.valid & (own.owner == idx)
        if not np.any(sel):
            continue
        p = own.sprite_points[sel]
        hidden = np.zeros(p.shape[0], dtype=np.uint8)
        for s in (0.0, 1.0):
            x_s = blend_point_map(layer.a, layer.b, s, p)
            in_bounds = (
                (x_s[:, 0] >= 0.0)
                & (x_s[:, 0] <= cw)
                & (x_s[:, 1] >= 0.0)
                & (x_s[:, 1] <= ch)
            )
            covered = _covered_from_above(scene, idx, s, x_s)
            hidden += (~in_bounds | covered).astype(np.uint8)
        classes[sel] = hidden
    return OcclusionMask(classes, own.valid.copy())


def photometric_attribute(
    scene: SceneSpec,
    t: float,
    out_size: tuple[int, int] | None = None,
    ownership: Ownership | None = None,
) -> AttributeMap:
    """Mean absolute endpoint photometric difference of the owning layer's color."""
    own = ownership if ownership is not None else resolve_ownership(scene, t, out_size)
    h, w = own.owner.shape
    layers = scene.layers_by_z()
    values = np.zeros((h, w), dtype=np.float64)
    for idx, layer in enumerate(layers):
        sel = own.valid & (own.owner == idx)
        if not np.any(sel):
            continue
        color = _bilinear(layer.color.astype(np.float64), own.sprite_points[sel], zero_outside=False)
        diff = np.abs(layer.phot1.apply(color) - layer.phot0.apply(color))
        values[sel] = diff.mean(axis=-1)
    return AttributeMap(values, own.valid.copy())
