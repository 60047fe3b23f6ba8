"""Sequence rendering, resolution pyramid, and the on-disk dataset layout.

Layout per sequence::

    seq_<id>/meta.json
    seq_<id>/res_<W>x<H>/frame_<i>.png          i = 0..8
    seq_<id>/res_<W>x<H>/flow_t<i>_to_t0.flo    i = 1..7
    seq_<id>/res_<W>x<H>/flow_t<i>_to_t8.flo
    seq_<id>/res_<W>x<H>/occ_t<i>.png
    seq_<id>/res_<W>x<H>/phot_t<i>.png

plus a dataset.json index at the root.  Participant exports keep only
frames 0 and 8 and strip the transforms from meta.json.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fibench import imaging
from fibench.imaging import AttributeMap, OcclusionMask, RasterImage
from fibench.synth import rng
from fibench.synth.render import (
    gt_flow,
    occlusion_mask,
    photometric_attribute,
    render_frame,
    resolve_ownership,
)
from fibench.synth.scene import (
    GeneratorConfig,
    SceneSpec,
    sample_scene,
    tier_labels,
)

FORMAT_VERSION = 1
GT_TIMESTEP_INDICES = tuple(range(1, 8))


class SequenceRejected(RuntimeError):
    """Too many unresolvable pixels; regenerate with the next seed."""


@dataclass(frozen=True)
class SequenceBundle:
    sequence_id: int
    directory: Path
    tiers: dict[str, tuple[int, int]]
    manifest: dict
    invalid_fraction: float


def _seq_dir_name(sequence_id: int) -> str:
    return f"seq_{sequence_id:04d}"


def _res_dir_name(size: tuple[int, int]) -> str:
    return f"res_{size[0]}x{size[1]}"


def _scene_manifest(scene: SceneSpec, config: GeneratorConfig) -> dict:
    layers = []
    for layer in scene.layers_by_z():
        layers.append(
            {
                "z": layer.z,
                "sprite": list(layer.sprite_key),
                "a": [float(v) for v in layer.a.matrix.ravel()],
                "b": [float(v) for v in layer.b.matrix.ravel()],
                "phot0": [float(v) for v in layer.phot0.params()],
                "phot1": [float(v) for v in layer.phot1.params()],
            }
        )
    return {
        "format_version": FORMAT_VERSION,
        "seed": scene.seed,
        "sequence_id": scene.sequence_id,
        "canvas": [scene.canvas_width, scene.canvas_height],
        "timesteps": [float(t) for t in scene.timesteps],
        "tier_divisors": list(config.tier_divisors),
        "layers": layers,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _block_reduce_mask(mask: OcclusionMask, divisor: int) -> OcclusionMask:
    """Majority class vote over divisor x divisor blocks; ties to the lower class."""
    h, w = mask.classes.shape
    th, tw = h // divisor, w // divisor
    blocks = mask.classes[: th * divisor, : tw * divisor].reshape(th, divisor, tw, divisor)
    valid_b = mask.valid[: th * divisor, : tw * divisor].reshape(th, divisor, tw, divisor)
    votes = np.zeros((3, th, tw), dtype=np.int32)
    for cls in range(3):
        votes[cls] = ((blocks == cls) & valid_b).sum(axis=(1, 3))
    classes = votes.argmax(axis=0).astype(np.uint8)
    valid = valid_b.any(axis=(1, 3))
    return OcclusionMask(np.where(valid, classes, 0).astype(np.uint8), valid)


def _block_reduce_attribute(attr: AttributeMap, divisor: int) -> AttributeMap:
    h, w = attr.values.shape
    th, tw = h // divisor, w // divisor
    vals = attr.values[: th * divisor, : tw * divisor].reshape(th, divisor, tw, divisor)
    valid_b = attr.valid[: th * divisor, : tw * divisor].reshape(th, divisor, tw, divisor)
    weight = valid_b.sum(axis=(1, 3))
    total = np.where(valid_b, vals, 0.0).sum(axis=(1, 3))
    valid = weight > 0
    values = np.where(valid, total / np.maximum(weight, 1), 0.0)
    return AttributeMap(values, valid)


def generate_sequence(
    scene: SceneSpec,
    out_dir: Path,
    config: GeneratorConfig,
    *,
    max_invalid_fraction: float = 0.001,
) -> SequenceBundle:
    """Render one nonuplet with its ground truth at every tier.

    Frames are rendered once at full resolution in working space, the
    pyramid is built with anti-aliased resizing, and quantization happens
    exactly once per written file.  Tier flows are evaluated analytically
    on the scaled grid instead of re-deriving transforms.  Raises
    SequenceRejected when more than ``max_invalid_fraction`` of pixels
    cannot be resolved.
    """
    out_dir = Path(out_dir)
    seq_dir = out_dir / _seq_dir_name(scene.sequence_id)
    seq_dir.mkdir(parents=True, exist_ok=True)

    divisors = tuple(config.tier_divisors)
    labels = tier_labels(divisors)
    tiers = {
        label: (scene.canvas_width // d, scene.canvas_height // d)
        for label, d in zip(labels, divisors)
    }
    for size in tiers.values():
        if size[0] < 1 or size[1] < 1:
            raise ValueError(f"tier divisor too large for canvas: {tiers}")

    invalid_px = 0
    total_px = 0

    # Frames: render full-resolution working, then downsample per tier.
    full_frames: list[RasterImage] = []
    for i, t in enumerate(scene.timesteps):
        frame, valid = render_frame(scene, t)
        invalid_px += int((~valid).sum())
        total_px += valid.size
        full_frames.append(frame)

    tier_dirs = {}
    for label, d in zip(labels, divisors):
        res_dir = seq_dir / _res_dir_name(tiers[label])
        res_dir.mkdir(parents=True, exist_ok=True)
        tier_dirs[label] = res_dir
        for i, frame in enumerate(full_frames):
            if d == 1:
                tier_frame = frame
            else:
                tier_frame = imaging.resize_antialiased(frame, tiers[label][0], tiers[label][1])
            data = imaging.write_image(tier_frame.to_coded())
            (res_dir / f"frame_{i}.png").write_bytes(data)

    # Ground truth per in-between timestep.
    for i in GT_TIMESTEP_INDICES:
        t = scene.timesteps[i]
        own_full = resolve_ownership(scene, t)
        invalid_px += int((~own_full.valid).sum())
        total_px += own_full.valid.size
        occ_full = occlusion_mask(scene, t, ownership=own_full)
        phot_full = photometric_attribute(scene, t, ownership=own_full)
        for label, d in zip(labels, divisors):
            res_dir = tier_dirs[label]
            if d == 1:
                own = own_full
                occ = occ_full
                phot = phot_full
            else:
                own = resolve_ownership(scene, t, out_size=tiers[label])
                occ = _block_reduce_mask(occ_full, d)
                phot = _block_reduce_attribute(phot_full, d)
            flow0 = gt_flow(scene, t, 0.0, ownership=own)
            flow1 = gt_flow(scene, t, 1.0, ownership=own)
            (res_dir / f"flow_t{i}_to_t0.flo").write_bytes(imaging.write_flow_file(flow0))
            (res_dir / f"flow_t{i}_to_t8.flo").write_bytes(imaging.write_flow_file(flow1))
            (res_dir / f"occ_t{i}.png").write_bytes(imaging.write_mask_image(occ))
            (res_dir / f"phot_t{i}.png").write_bytes(imaging.write_attribute_image(phot))

    invalid_fraction = invalid_px / max(total_px, 1)
    if invalid_fraction > max_invalid_fraction:
        shutil.rmtree(seq_dir)
        raise SequenceRejected(
            f"sequence {scene.sequence_id}: {invalid_fraction:.4%} unresolved pixels "
            f"exceeds the {max_invalid_fraction:.4%} budget"
        )

    manifest = _scene_manifest(scene, config)
    _write_json(seq_dir / "meta.json", manifest)
    return SequenceBundle(
        sequence_id=scene.sequence_id,
        directory=seq_dir,
        tiers=tiers,
        manifest=manifest,
        invalid_fraction=invalid_fraction,
    )


def generate_dataset(
    config: GeneratorConfig,
    seed: int,
    out_root: Path,
    count: int | None = None,
    *,
    max_attempts_per_sequence: int = 8,
) -> list[SequenceBundle]:
    """Generate a dataset of ``count`` sequences under out_root.

    Rejected sequences (too many unresolved pixels) retry with a derived
    seed so ids stay contiguous and the result is still a pure function
    of (config, seed).
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    count = config.sequence_count if count is None else count
    bundles = []
    for sequence_id in range(count):
        for attempt in range(max_attempts_per_sequence):
            scene_seed = rng.derive_key(seed, sequence_id, "scene", attempt)
            scene = sample_scene(config, scene_seed, sequence_id)
            try:
                bundles.append(generate_sequence(scene, out_root, config))
                break
            except SequenceRejected:
                continue
        else:
            raise SequenceRejected(
                f"sequence {sequence_id}: no acceptable scene in "
                f"{max_attempts_per_sequence} attempts"
            )
    index = {
        "format_version": FORMAT_VERSION,
        "canvas": [config.canvas_width, config.canvas_height],
        "tiers": {label: list(size) for label, size in config.tier_sizes().items()},
        "timesteps": 9,
        "gt_timesteps": list(GT_TIMESTEP_INDICES),
        "sequences": [_seq_dir_name(b.sequence_id) for b in bundles],
        "ground_truth": True,
    }
    _write_json(out_root / "dataset.json", index)
    return bundles


def export_public(dataset_root: Path, export_root: Path) -> None:
    """Participant-facing copy: inputs only, transforms stripped from meta."""
    dataset_root = Path(dataset_root)
    export_root = Path(export_root)
    export_root.mkdir(parents=True, exist_ok=True)
    index = json.loads((dataset_root / "dataset.json").read_text(encoding="utf-8"))
    for seq_name in index["sequences"]:
        src = dataset_root / seq_name
        dst = export_root / seq_name
        dst.mkdir(parents=True, exist_ok=True)
        meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
        public_meta = {
            "format_version": meta["format_version"],
            "sequence_id": meta["sequence_id"],
            "canvas": meta["canvas"],
            "timesteps": meta["timesteps"],
            "tier_divisors": meta["tier_divisors"],
        }
        _write_json(dst / "meta.json", public_meta)
        for res_dir in sorted(src.glob("res_*")):
            (dst / res_dir.name).mkdir(exist_ok=True)
            for i in (0, 8):
                shutil.copyfile(res_dir / f"frame_{i}.png", dst / res_dir.name / f"frame_{i}.png")
    public_index = dict(index)
    public_index["ground_truth"] = False
    _write_json(export_root / "dataset.json", public_index)
