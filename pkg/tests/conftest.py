"""
Pytest configuration and fixtures for testing.
"""
from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
import torch
from PIL import Image

from scenesketch.cache.store import cache
from scenesketch.encoders.toy import ToyEncoder
from scenesketch.raster.soft import SoftRasterizer
from scenesketch.schemas import BackendConfig, OutputConfig, Region, RunConfig, TrainConfig
from scenesketch.sketch.model import Sketch, Stroke
from scenesketch.storage.run_store import RunStore

CANVAS = 64


@pytest.fixture(autouse=True)
def clear_cache():
    """Drop memoised encoders and embeddings between tests."""
    cache.delete_pattern("*")
    yield
    cache.delete_pattern("*")


@pytest.fixture
def toy_encoder() -> ToyEncoder:
    """Toy encoder whose input size equals the test canvas (no resampling)."""
    return ToyEncoder(input_size=CANVAS)


@pytest.fixture
def rasterizer() -> SoftRasterizer:
    return SoftRasterizer()


def make_sketch(n: int, seed: int = 0, canvas: int = CANVAS, width: float = 2.0, region: Region = Region.background) -> Sketch:
    """n random strokes inside the central part of the canvas."""
    gen = torch.Generator().manual_seed(seed)
    pts = 0.2 + 0.6 * torch.rand(n, 4, 2, generator=gen, dtype=torch.float64)
    strokes = tuple(
        Stroke(control_points=tuple((float(x), float(y)) for x, y in pts[i].tolist()), width=width, region=region)
        for i in range(n)
    )
    return Sketch(strokes=strokes, canvas_size=canvas, region=region)


@pytest.fixture
def sketch_factory() -> Callable[..., Sketch]:
    return make_sketch


def make_scene_photo(size: int = CANVAS) -> torch.Tensor:
    """Light gradient background with one dark square object."""
    ramp = torch.linspace(0.8, 0.95, size)
    photo = ramp[None, None, :].expand(3, size, size).clone()
    lo, hi = size // 3, 2 * size // 3
    photo[:, lo:hi, lo:hi] = torch.tensor([0.1, 0.15, 0.2])[:, None, None]
    return photo


@pytest.fixture
def scene_photo() -> torch.Tensor:
    return make_scene_photo()


@pytest.fixture
def scene_mask() -> torch.Tensor:
    mask = torch.zeros(CANVAS, CANVAS)
    lo, hi = CANVAS // 3, 2 * CANVAS // 3
    mask[lo:hi, lo:hi] = 1.0
    return mask


@pytest.fixture
def photo_file(tmp_path: Path) -> Path:
    """The synthetic scene photo written as a PNG."""
    data = (make_scene_photo().numpy().transpose(1, 2, 0) * 255).round().astype(np.uint8)
    path = tmp_path / "scene.png"
    Image.fromarray(data, mode="RGB").save(path)
    return path


def tiny_train_config(**overrides) -> TrainConfig:
    values = dict(
        n_strokes=4,
        iters_fidelity=3,
        iters_per_simplify=2,
        fidelity_layers=[11],
        simplify_levels=2,
        hidden_width=16,
        canvas_size=CANVAS,
        augmentations_per_step=1,
        log_every=1,
    )
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def tiny_config(tmp_path: Path) -> RunConfig:
    """Toy-backend run config small enough for CPU tests."""
    return RunConfig(
        train=tiny_train_config(),
        backends=BackendConfig.toy(),
        output=OutputConfig(out_dir=tmp_path / "run"),
    )


@pytest.fixture
def run_store(tmp_path: Path) -> RunStore:
    return RunStore(tmp_path / "run").prepare()


def visible_counts(sketches: List[Sketch], threshold: float = 0.1) -> List[int]:
    return [s.visible_count(threshold) for s in sketches]
