"""
Unit tests for XDoG edges, MS-SSIM and zero-shot recognizability.
"""
from typing import Dict, List, Sequence

import pytest
import torch

from scenesketch.core.errors import CapabilityError, ConfigurationError, ShapeError
from scenesketch.encoders.base import Encoder
from scenesketch.evaluation.ms_ssim import MS_SSIM_WEIGHTS, K1, available_scales, ms_ssim
from scenesketch.evaluation.recognizability import (
    ZeroShotClassifier,
    load_templates,
    recognizability,
    top_k_classes,
)
from scenesketch.evaluation.xdog import XDoGParams, xdog_edges

NUM_CLASSES = 10


class BrightnessEncoder(Encoder):
    """Text embeddings are one-hot per class; images score classes 0-4 by brightness, 5-9 by darkness."""

    name = "brightness"
    has_text_tower = True

    def __init__(self):
        super().__init__(16, mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0))

    def forward_layers(self, x: torch.Tensor, layers: List[int]) -> Dict[int, torch.Tensor]:
        return {layer: x.flatten(2) for layer in layers}

    def text_embedding(self, prompts: Sequence[str]) -> torch.Tensor:
        index = int(prompts[0].split("c")[-1])
        return torch.nn.functional.one_hot(torch.tensor([index] * len(prompts)), NUM_CLASSES).double()

    def image_embedding(self, image: torch.Tensor) -> torch.Tensor:
        m = float(image.mean())
        half = NUM_CLASSES // 2
        v = torch.tensor([m] * half + [1.0 - m] * half, dtype=torch.float64)
        return v + 1e-3 * torch.arange(NUM_CLASSES, dtype=torch.float64) + 1e-3


def _classifier(num_classes: int = NUM_CLASSES) -> ZeroShotClassifier:
    return ZeroShotClassifier(BrightnessEncoder(), [f"c{i}" for i in range(num_classes)], ["{}"])


@pytest.mark.unit
class TestXDoG:
    """Test the edge-only XDoG map."""

    def test_constant_image_is_blank(self):
        """Test that flat images of any brightness produce no ink."""
        for level in (0.1, 0.5, 0.9):
            edges = xdog_edges(torch.full((3, 32, 32), level))
            assert torch.equal(edges, torch.ones(32, 32, dtype=torch.float64))

    def test_step_edge_localized(self):
        """Test that ink appears only next to an intensity step."""
        image = torch.full((32, 32), 0.2)
        image[:, 16:] = 0.9
        edges = xdog_edges(image)
        assert float(edges[:, 12:20].min()) == 0.0
        assert bool((edges[:, :6] == 1).all()) and bool((edges[:, 26:] == 1).all())

    def test_binary_output(self, scene_photo):
        """Test that the default map holds only 0 and 1."""
        edges = xdog_edges(scene_photo)
        assert set(torch.unique(edges).tolist()) <= {0.0, 1.0}

    def test_soft_output_range(self, scene_photo):
        """Test that the unbinarized map stays in [0, 1]."""
        edges = xdog_edges(scene_photo, XDoGParams(binarize_at=None))
        assert 0.0 <= float(edges.min()) and float(edges.max()) <= 1.0


@pytest.mark.unit
class TestMsSsim:
    """Test multi-scale SSIM."""

    def test_identity(self):
        """Test that an image is perfectly similar to itself."""
        image = torch.rand(64, 64, generator=torch.Generator().manual_seed(0))
        assert ms_ssim(image, image) == pytest.approx(1.0)

    def test_symmetry(self):
        """Test ms_ssim(a, b) == ms_ssim(b, a)."""
        gen = torch.Generator().manual_seed(1)
        a, b = torch.rand(64, 64, generator=gen), torch.rand(64, 64, generator=gen)
        assert ms_ssim(a, b) == pytest.approx(ms_ssim(b, a))

    def test_white_vs_black_five_scales(self):
        """Test the closed form for constant images: only the coarsest luminance term differs from 1."""
        c1 = K1 ** 2
        expected = (c1 / (1.0 + c1)) ** MS_SSIM_WEIGHTS[-1]
        assert ms_ssim(torch.ones(224, 224), torch.zeros(224, 224)) == pytest.approx(expected, rel=1e-6)
        assert expected == pytest.approx(0.293, abs=1e-3)

    def test_white_vs_black_renormalized(self):
        """Test that small images use fewer scales with renormalized exponents."""
        assert available_scales(64) == 3
        c1 = K1 ** 2
        weight = MS_SSIM_WEIGHTS[2] / sum(MS_SSIM_WEIGHTS[:3])
        assert ms_ssim(torch.ones(64, 64), torch.zeros(64, 64)) == pytest.approx((c1 / (1.0 + c1)) ** weight, rel=1e-6)

    def test_in_unit_interval(self, scene_photo):
        """Test that values stay in [0, 1]."""
        value = ms_ssim(scene_photo, torch.ones(3, 64, 64))
        assert 0.0 <= value <= 1.0

    def test_shape_mismatch(self):
        """Test that differently sized images are rejected."""
        with pytest.raises(ShapeError):
            ms_ssim(torch.ones(64, 64), torch.ones(32, 32))

    def test_smaller_than_window(self):
        """Test that images below the window size are rejected."""
        with pytest.raises(ShapeError):
            ms_ssim(torch.ones(8, 8), torch.ones(8, 8))


@pytest.mark.unit
class TestRecognizability:
    """Test zero-shot top-k overlap."""

    def test_top_k_matches_brute_force(self):
        """Test that top_k_classes agrees with a full sort."""
        gen = torch.Generator().manual_seed(2)
        image = torch.randn(8, generator=gen, dtype=torch.float64)
        classes = torch.randn(20, 8, generator=gen, dtype=torch.float64)
        cls = classes / classes.norm(dim=-1, keepdim=True)
        expected = sorted(range(20), key=lambda i: -float(cls[i] @ image))[:5]
        assert top_k_classes(image, classes, 5) == expected

    def test_identical_images_recognizable(self, scene_photo):
        """Test that a sketch equal to the photo is recognizable."""
        assert recognizability(scene_photo, scene_photo, _classifier())

    def test_disjoint_top_classes(self):
        """Test that opposite images share no top class."""
        assert not recognizability(torch.ones(3, 16, 16), torch.zeros(3, 16, 16), _classifier())

    def test_five_classes_always_recognizable(self):
        """Test that with five classes every top-5 set is the full list."""
        assert recognizability(torch.ones(3, 16, 16), torch.zeros(3, 16, 16), _classifier(5))

    def test_embeddings_unit_norm(self):
        """Test that class embeddings are normalized."""
        emb = _classifier().class_embeddings
        assert emb.shape == (NUM_CLASSES, NUM_CLASSES)
        assert torch.allclose(emb.norm(dim=-1), torch.ones(NUM_CLASSES, dtype=torch.float64))

    def test_needs_text_tower(self, toy_encoder):
        """Test that an encoder without text tower cannot classify."""
        with pytest.raises(CapabilityError):
            ZeroShotClassifier(toy_encoder, ["cat"], ["{}"])

    def test_template_placeholder(self, tmp_path):
        """Test that templates must contain a placeholder."""
        path = tmp_path / "templates.txt"
        path.write_text("a photo of a {}\na drawing\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_templates(path)

    def test_bundled_lists(self):
        """Test that the bundled class and template lists load."""
        classifier = ZeroShotClassifier.from_files(BrightnessEncoder())
        assert len(classifier.classes) >= 5
        assert all("{}" in t for t in classifier.templates)
