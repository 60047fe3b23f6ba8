"""Deterministic generation of layered scenes with exactly linear motion."""

from fibench.synth.scene import (
    GenerationError,
    GeneratorConfig,
    Layer,
    SceneSpec,
    TIMESTEPS,
    desk_config,
    mini_config,
    paper_scale_config,
    procedural_sprite,
    sample_scene,
)
from fibench.synth.render import (
    gt_flow,
    occlusion_mask,
    photometric_attribute,
    render_frame,
)
from fibench.synth.sequence import (
    SequenceBundle,
    SequenceRejected,
    export_public,
    generate_dataset,
    generate_sequence,
)
from fibench.synth.transforms import (
    GeometricTransform,
    PhotometricTransform,
    blend_point_map,
    invert_point_map,
    photometric_at,
    point_map,
)

__all__ = [
    "GenerationError",
    "GeneratorConfig",
    "GeometricTransform",
    "Layer",
    "PhotometricTransform",
    "SceneSpec",
    "SequenceBundle",
    "SequenceRejected",
    "TIMESTEPS",
    "blend_point_map",
    "desk_config",
    "export_public",
    "generate_dataset",
    "generate_sequence",
    "gt_flow",
    "invert_point_map",
    "mini_config",
    "occlusion_mask",
    "paper_scale_config",
    "photometric_at",
    "photometric_attribute",
    "point_map",
    "procedural_sprite",
    "render_frame",
    "sample_scene",
]
