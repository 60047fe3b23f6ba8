"""Shared fixtures: datasets built once per session, plus scene helpers."""

from __future__ import annotations

import shutil
import socket
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from fibench.harness.baselines import make_baseline_submission
from fibench.harness.dataset import DatasetIndex, load_dataset
from fibench.imaging import RasterImage
from fibench.synth.scene import (
    GeneratorConfig,
    Layer,
    SceneSpec,
    desk_config,
    mini_config,
)
from fibench.synth.sequence import generate_dataset
from fibench.synth.transforms import GeometricTransform, PhotometricTransform

DESK_SEED = 2024
MINI_SEED = 7


@dataclass
class DatasetFixture:
    root: Path
    index: DatasetIndex
    config: GeneratorConfig
    seed: int
    generation_seconds: float


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory) -> DatasetFixture:
    root = tmp_path_factory.mktemp("desk_dataset")
    config = desk_config(10)
    start = time.perf_counter()
    generate_dataset(config, DESK_SEED, root)
    elapsed = time.perf_counter() - start
    return DatasetFixture(root, load_dataset(root), config, DESK_SEED, elapsed)


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory) -> DatasetFixture:
    root = tmp_path_factory.mktemp("mini_dataset")
    config = mini_config(sequence_count=2)
    start = time.perf_counter()
    generate_dataset(config, MINI_SEED, root)
    elapsed = time.perf_counter() - start
    return DatasetFixture(root, load_dataset(root), config, MINI_SEED, elapsed)


@pytest.fixture(scope="session")
def desk_blend_submission(desk_dataset, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("subs") / "desk_blend"
    make_baseline_submission(desk_dataset.index, "blend", out)
    return out


@pytest.fixture(scope="session")
def desk_oracle_submission(desk_dataset, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("subs") / "desk_oracle"
    make_baseline_submission(desk_dataset.index, "oracle", out)
    return out


@pytest.fixture(scope="session")
def mini_blend_submission(mini_dataset, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("subs") / "mini_blend"
    make_baseline_submission(mini_dataset.index, "blend", out)
    return out


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def copy_submission(src: Path, dst: Path) -> Path:
    shutil.copytree(src, dst)
    return dst


# ---------------------------------------------------------------------------
# Hand-built scenes for analytic ground truth
# ---------------------------------------------------------------------------


def solid_sprite(width: int, height: int, color=(0.8, 0.2, 0.1)) -> tuple[np.ndarray, np.ndarray]:
    c = np.empty((height, width, 3), dtype=np.float32)
    c[:] = np.asarray(color, dtype=np.float32)
    return c, np.ones((height, width), dtype=np.float32)


def textured_sprite(width: int, height: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    gen = np.random.default_rng(seed)
    c = gen.random((height, width, 3)).astype(np.float32)
    return c, np.ones((height, width), dtype=np.float32)


def make_layer(
    color: np.ndarray,
    alpha: np.ndarray,
    a: GeometricTransform,
    b: GeometricTransform | None = None,
    z: int = 0,
    phot0: PhotometricTransform | None = None,
    phot1: PhotometricTransform | None = None,
) -> Layer:
    ident = PhotometricTransform.identity()
    return Layer(
        color=color,
        alpha=alpha,
        a=a,
        b=b if b is not None else a,
        phot0=phot0 if phot0 is not None else ident,
        phot1=phot1 if phot1 is not None else ident,
        z=z,
    )


def background_layer(
    canvas_w: int,
    canvas_h: int,
    margin: int = 16,
    shift0: tuple[float, float] = (0.0, 0.0),
    shift1: tuple[float, float] | None = None,
    seed: int = 5,
) -> Layer:
    """Static-by-default background fully covering the canvas."""
    color, alpha = textured_sprite(canvas_w + 2 * margin, canvas_h + 2 * margin, seed)
    base = GeometricTransform.translation(-margin, -margin)
    a = GeometricTransform.translation(*shift0).compose(base)
    b = GeometricTransform.translation(*(shift1 if shift1 is not None else shift0)).compose(base)
    return make_layer(color, alpha, a, b, z=0)


def build_scene(canvas_w: int, canvas_h: int, layers: list[Layer], seed: int = 0) -> SceneSpec:
    return SceneSpec(
        seed=seed,
        sequence_id=0,
        canvas_width=canvas_w,
        canvas_height=canvas_h,
        layers=tuple(layers),
    )


def quantize(img: RasterImage) -> np.ndarray:
    return img.to_coded().data
