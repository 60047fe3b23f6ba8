"""Scene sampling: layered sprites with endpoint transforms.

A scene is a background layer that must cover the canvas at every time
in [0, 1] plus a handful of sprite layers, each with geometric endpoint
transforms, photometric endpoint transforms, and a stacking order.
Sampling is rejection-based and fully determined by (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from fibench.synth import rng
from fibench.synth.transforms import (
    GeometricTransform,
    PhotometricTransform,
    invert_blend_map,
)

# Nine sampling times: inputs at 0 and 1, seven ground truths in between.
TIMESTEPS: tuple[float, ...] = tuple(i / 8.0 for i in range(9))


class GenerationError(RuntimeError):
    """Scene sampling exhausted its rejection budget for a constraint."""


@dataclass(frozen=True, eq=False)
class Layer:
    """One sprite with endpoint warps and photometric endpoints.

    ``a`` and ``b`` map sprite coordinates (pixel centers at integer+0.5)
    to canvas coordinates at t=0 and t=1.  ``z`` is the stacking order;
    z=0 is the background, whose alpha must be 1 everywhere.
    """

    color: np.ndarray  # (h, w, 3) float32 in [0, 1]
    alpha: np.ndarray  # (h, w) float32 in [0, 1]
    a: GeometricTransform
    b: GeometricTransform
    phot0: PhotometricTransform
    phot1: PhotometricTransform
    z: int
    sprite_key: tuple = ()  # regeneration recipe, recorded in the manifest

    def __post_init__(self):
        if self.color.ndim != 3 or self.color.shape[2] != 3:
            raise ValueError("layer color must be (h, w, 3)")
        if self.alpha.shape != self.color.shape[:2]:
            raise ValueError("layer alpha must match the sprite extent")
        if self.z == 0 and (self.alpha.min() < 1.0):
            raise ValueError("background alpha must be 1 everywhere")

    @property
    def sprite_width(self) -> int:
        return self.color.shape[1]

    @property
    def sprite_height(self) -> int:
        return self.color.shape[0]


@dataclass(frozen=True, eq=False)
class SceneSpec:
    seed: int
    sequence_id: int
    canvas_width: int
    canvas_height: int
    layers: tuple[Layer, ...]
    timesteps: tuple[float, ...] = TIMESTEPS

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("a scene needs a background plus at least one sprite")
        zs = [layer.z for layer in self.layers]
        if sorted(zs) != list(range(len(zs))):
            raise ValueError("layer stacking orders must be 0..n-1")
        if self.timesteps != TIMESTEPS:
            raise ValueError("timesteps are fixed to ninths of the unit interval")

    def layers_by_z(self) -> tuple[Layer, ...]:
        return tuple(sorted(self.layers, key=lambda l: l.z))


@dataclass(frozen=True)
class GeneratorConfig:
    """Sampling ranges for scenes; defaults are the full-scale benchmark."""

    canvas_width: int = 4096
    canvas_height: int = 2048
    sequence_count: int = 666
    sprite_count_min: int = 2
    sprite_count_max: int = 5
    sprite_size_min_frac: float = 0.25  # of canvas height
    sprite_size_max_frac: float = 0.7
    translation_max: float = 512.0
    translation_min_frac: float = 0.25  # of translation_max
    rotation_max_deg: float = 10.0
    scale_min: float = 0.9
    scale_max: float = 1.1
    perspective_max: float = 1e-5
    gain_range: tuple[float, float] = (0.7, 1.4)
    gamma_range: tuple[float, float] = (0.8, 1.25)
    offset_range: tuple[float, float] = (-0.05, 0.05)
    background_margin_frac: float = 0.3  # oversize of the bg sprite per side
    background_rotation_max_deg: float = 4.0
    background_scale_min: float = 0.97
    background_scale_max: float = 1.03
    # When set, every sampled layer must displace all of its points by at
    # least this many pixels between the endpoints (rejection-resampled).
    # Keeps the slow-motion bins empty so motion, not occlusion, drives
    # the per-magnitude analysis on small presets.
    min_motion_px: float | None = None
    tier_divisors: tuple[int, ...] = (1, 2, 4)
    rejection_budget: int = 1000
    format_version: int = 1

    def __post_init__(self):
        if self.canvas_width < 8 or self.canvas_height < 8:
            raise ValueError("canvas must be at least 8x8")
        if self.sprite_count_min < 1 or self.sprite_count_max < self.sprite_count_min:
            raise ValueError("bad sprite count range")
        if self.background_margin_frac < 0:
            raise ValueError("background margin must be non-negative")

    def tier_sizes(self) -> dict[str, tuple[int, int]]:
        labels = tier_labels(self.tier_divisors)
        return {
            label: (self.canvas_width // d, self.canvas_height // d)
            for label, d in zip(labels, self.tier_divisors)
        }


def tier_labels(divisors: tuple[int, ...]) -> list[str]:
    """Pyramid level names, largest first: 4k, 2k, 1k (then 0k5, ...)."""
    names = {1: "4k", 2: "2k", 4: "1k"}
    out = []
    for d in divisors:
        out.append(names.get(d, f"d{d}"))
    return out


def paper_scale_config() -> GeneratorConfig:
    return GeneratorConfig()


def desk_config(sequence_count: int = 10) -> GeneratorConfig:
    """Desk-scale preset: the full pipeline in minutes, not hours."""
    return GeneratorConfig(
        canvas_width=512,
        canvas_height=256,
        sequence_count=sequence_count,
        sprite_count_min=2,
        sprite_count_max=4,
        translation_max=64.0,
        min_motion_px=16.5,
    )


def mini_config(
    canvas_width: int = 128,
    canvas_height: int = 64,
    sequence_count: int = 2,
    **overrides,
) -> GeneratorConfig:
    """Tiny preset for unit tests."""
    params = dict(
        canvas_width=canvas_width,
        canvas_height=canvas_height,
        sequence_count=sequence_count,
        sprite_count_min=1,
        sprite_count_max=3,
        translation_max=canvas_width / 8.0,
    )
    params.update(overrides)
    return GeneratorConfig(**params)


# ---------------------------------------------------------------------------
# Procedural sprites
# ---------------------------------------------------------------------------


def _smooth_field(gen: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Random low-frequency RGB field in [0, 1] from a few sinusoids."""
    ys, xs = np.mgrid[0:height, 0:width]
    xs = xs / max(width, 1)
    ys = ys / max(height, 1)
    out = np.full((height, width, 3), 0.5)
    for c in range(3):
        for _ in range(3):
            fx, fy = gen.uniform(-3.0, 3.0, size=2)
            phase = gen.uniform(0.0, 2.0 * np.pi)
            amp = gen.uniform(0.05, 0.22)
            out[:, :, c] += amp * np.sin(2.0 * np.pi * (fx * xs + fy * ys) + phase)
    return np.clip(out, 0.0, 1.0)


def procedural_sprite(seed: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic textured blob with a smooth alpha boundary.

    Color is a random low-frequency field; alpha is a random star-convex
    polygon with a soft edge no wider than 2 px.  The blob fits inside
    size x size.  Returns (color, alpha) as float32.
    """
    if size < 8:
        raise ValueError(f"sprite size must be >= 8, got {size}")
    gen = rng.generator(seed, "sprite")
    color = _smooth_field(gen, size, size)

    center = size / 2.0
    ys, xs = np.mgrid[0:size, 0:size]
    dx = (xs + 0.5) - center
    dy = (ys + 0.5) - center
    rho = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)

    r_base = gen.uniform(0.55, 0.8) * (size / 2.0 - 2.0)
    radius = np.full_like(theta, r_base)
    for harmonic in range(2, 6):
        amp = gen.uniform(0.0, 0.12) * r_base
        phase = gen.uniform(0.0, 2.0 * np.pi)
        radius = radius + amp * np.cos(harmonic * theta + phase)
    radius = np.clip(radius, 0.25 * r_base, size / 2.0 - 1.0)

    edge = 1.5  # transition width in px, keeps the soft rim under 2 px
    alpha = np.clip((radius - rho) / edge + 0.5, 0.0, 1.0)
    return color.astype(np.float32), alpha.astype(np.float32)


def _background_sprite(seed: int, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    gen = rng.generator(seed, "background")
    color = _smooth_field(gen, width, height).astype(np.float32)
    return color, np.ones((height, width), dtype=np.float32)


# ---------------------------------------------------------------------------
# Transform sampling
# ---------------------------------------------------------------------------


def _placement(
    cx: float, cy: float, angle: float, scale: float, qx: float, qy: float,
    sprite_w: int, sprite_h: int,
) -> GeometricTransform:
    """Sprite-center-anchored placement: perspective, then similarity, to canvas."""
    recentre = GeometricTransform.translation(-sprite_w / 2.0, -sprite_h / 2.0)
    persp = GeometricTransform.perspective(qx, qy)
    sim = GeometricTransform.similarity(cx, cy, angle, scale)
    return sim.compose(persp).compose(recentre)


def _sample_photometric(gen: np.random.Generator, cfg: GeneratorConfig) -> PhotometricTransform:
    gain = gen.uniform(*cfg.gain_range, size=3)
    gamma = gen.uniform(*cfg.gamma_range, size=3)
    offset = float(gen.uniform(*cfg.offset_range))
    return PhotometricTransform(gain, gamma, offset)


def _min_displacement(a: GeometricTransform, b: GeometricTransform, sprite_w: int, sprite_h: int) -> float:
    """Smallest endpoint displacement over the sprite rectangle."""
    xs = np.linspace(0.0, sprite_w, 12)
    ys = np.linspace(0.0, sprite_h, 12)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    disp = np.linalg.norm(b.apply(pts) - a.apply(pts), axis=-1)
    return float(disp.min())


def _background_covers_canvas(
    layer: Layer, canvas_w: int, canvas_h: int, *, t_samples: int = 17, edge_samples: int = 9
) -> bool:
    """Corner/edge containment of the canvas in the warped sprite, for all t."""
    xs = np.linspace(0.0, canvas_w, edge_samples)
    ys = np.linspace(0.0, canvas_h, edge_samples)
    border = np.concatenate(
        [
            np.stack([xs, np.zeros_like(xs)], axis=-1),
            np.stack([xs, np.full_like(xs, canvas_h)], axis=-1),
            np.stack([np.zeros_like(ys), ys], axis=-1),
            np.stack([np.full_like(ys, canvas_w), ys], axis=-1),
        ]
    )
    inset = 1.0  # leave room for bilinear support
    for t in np.linspace(0.0, 1.0, t_samples):
        pts, ok = invert_blend_map(layer.a, layer.b, float(t), border)
        if not np.all(ok):
            return False
        if np.any(pts[:, 0] < inset) or np.any(pts[:, 0] > layer.sprite_width - inset):
            return False
        if np.any(pts[:, 1] < inset) or np.any(pts[:, 1] > layer.sprite_height - inset):
            return False
    return True


def sample_scene(config: GeneratorConfig, seed: int, sequence_id: int = 0) -> SceneSpec:
    """Deterministically sample a scene for (config, seed, sequence_id).

    Translation directions are stratified across layers (a jittered fan
    with a random global phase) so the dataset's motion-angle histogram
    stays free of axis bias.  The background is rejection-resampled until
    it covers the canvas for all t.
    """
    cw, ch = config.canvas_width, config.canvas_height
    count_gen = rng.generator(seed, sequence_id, "layout")
    n_sprites = int(count_gen.integers(config.sprite_count_min, config.sprite_count_max + 1))
    n_layers = n_sprites + 1
    # Motion directions follow a golden-ratio progression over
    # (sequence, layer) slots with a small jitter: equidistributed by
    # construction, so even a 100-sequence dataset shows no angular bias
    # while staying fully determined by (config, seed).
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    dataset_phase = float(rng.generator(seed, "fan-phase").uniform(0.0, 2.0 * np.pi))

    layers: list[Layer] = []
    for layer_id in range(n_layers):
        gen = rng.generator(seed, sequence_id, layer_id, "transforms")
        slot = sequence_id * 8 + layer_id
        direction = (
            dataset_phase
            + 2.0 * np.pi * ((slot * golden) % 1.0)
            + float(gen.uniform(-np.pi / 36.0, np.pi / 36.0))
        )
        phot0 = _sample_photometric(rng.generator(seed, sequence_id, layer_id, "phot0"), config)
        phot1 = _sample_photometric(rng.generator(seed, sequence_id, layer_id, "phot1"), config)

        budget = config.rejection_budget
        if layer_id == 0:
            margin = config.background_margin_frac
            bw = int(math.ceil(cw * (1.0 + 2.0 * margin)))
            bh = int(math.ceil(ch * (1.0 + 2.0 * margin)))
            sprite_key = ("background", rng.derive_key(seed, sequence_id, layer_id), bw, bh)
            color, alpha = _background_sprite(sprite_key[1], bw, bh)
            margin_px = min(cw, ch) * margin
            for attempt in range(budget):
                agen = rng.generator(seed, sequence_id, layer_id, "bg-attempt", attempt)
                c0x = cw / 2.0 + agen.uniform(-0.1, 0.1) * margin_px
                c0y = ch / 2.0 + agen.uniform(-0.1, 0.1) * margin_px
                rot0 = math.radians(agen.uniform(-1.0, 1.0) * config.background_rotation_max_deg)
                s0 = agen.uniform(config.background_scale_min, config.background_scale_max)
                dist = agen.uniform(0.4, 1.0) * 0.45 * margin_px
                c1x = c0x + dist * math.cos(direction)
                c1y = c0y + dist * math.sin(direction)
                rot1 = rot0 + math.radians(
                    agen.uniform(-1.0, 1.0) * config.background_rotation_max_deg
                )
                s1 = s0 * agen.uniform(config.background_scale_min, config.background_scale_max)
                a = _placement(c0x, c0y, rot0, s0, 0.0, 0.0, bw, bh)
                b = _placement(c1x, c1y, rot1, s1, 0.0, 0.0, bw, bh)
                if (
                    config.min_motion_px is not None
                    and _min_displacement(a, b, bw, bh) < config.min_motion_px
                ):
                    continue
                layer = Layer(color, alpha, a, b, phot0, phot1, z=0, sprite_key=sprite_key)
                if _background_covers_canvas(layer, cw, ch):
                    layers.append(layer)
                    break
            else:
                raise GenerationError(
                    f"background coverage constraint unsatisfied after {budget} tries "
                    f"(canvas {cw}x{ch}, margin {margin})"
                )
        else:
            size_frac = gen.uniform(config.sprite_size_min_frac, config.sprite_size_max_frac)
            size = max(8, int(round(size_frac * ch)))
            sprite_key = ("procedural", rng.derive_key(seed, sequence_id, layer_id), size)
            color, alpha = procedural_sprite(sprite_key[1], size)
            for attempt in range(budget):
                agen = rng.generator(seed, sequence_id, layer_id, "attempt", attempt)
                c0x = agen.uniform(0.0, cw)
                c0y = agen.uniform(0.0, ch)
                rot0 = math.radians(agen.uniform(-1.0, 1.0) * config.rotation_max_deg)
                s0 = agen.uniform(config.scale_min, config.scale_max)
                q0x, q0y = agen.uniform(-1.0, 1.0, size=2) * config.perspective_max
                dist = agen.uniform(config.translation_min_frac, 1.0) * config.translation_max
                c1x = c0x + dist * math.cos(direction)
                c1y = c0y + dist * math.sin(direction)
                rot1 = rot0 + math.radians(agen.uniform(-1.0, 1.0) * config.rotation_max_deg)
                s1 = s0 * agen.uniform(config.scale_min, config.scale_max)
                q1x, q1y = agen.uniform(-1.0, 1.0, size=2) * config.perspective_max
                a = _placement(c0x, c0y, rot0, s0, q0x, q0y, size, size)
                b = _placement(c1x, c1y, rot1, s1, q1x, q1y, size, size)
                if (
                    config.min_motion_px is not None
                    and _min_displacement(a, b, size, size) < config.min_motion_px
                ):
                    continue
                layers.append(
                    Layer(color, alpha, a, b, phot0, phot1, z=layer_id, sprite_key=sprite_key)
                )
                break
            else:
                raise GenerationError(
                    f"layer {layer_id}: minimum-motion constraint unsatisfied "
                    f"after {budget} tries"
                )

    return SceneSpec(
        seed=seed,
        sequence_id=sequence_id,
        canvas_width=cw,
        canvas_height=ch,
        layers=tuple(layers),
    )
