"""
Perceptual encoder contract.

An encoder maps an image to per-layer activations. Layer l is the output of
the backbone block at position l (0-based), so the usable range is 1..depth
on every backend and configs stay portable.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import torch
import torch.nn.functional as F

from scenesketch.core.errors import CapabilityError, ConfigurationError, ShapeError
from scenesketch.schemas import MAX_ENCODER_LAYER

_SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


@dataclass
class LayerActivations:
    """Activations keyed by layer index; tensors are (batch, tokens, channels)."""
    layers: Dict[int, torch.Tensor]
    source_resolution: int

    def __getitem__(self, layer: int) -> torch.Tensor:
        return self.layers[layer]

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for t in self.layers.values())


def as_batch(image: torch.Tensor) -> torch.Tensor:
    """
    Bring an image into (B, 3, H, W) layout.

    Accepts (H, W) grayscale, (3, H, W) / (1, H, W), (B, H, W) grayscale or
    (B, C, H, W). Grayscale is replicated to three channels.
    """
    if image.dim() == 2:
        image = image[None, None]
    elif image.dim() == 3:
        image = image[None] if image.shape[0] in (1, 3) else image[:, None]
    elif image.dim() != 4:
        raise ShapeError(f"expected a 2-4 dimensional image tensor, got shape {tuple(image.shape)}")
    if image.shape[1] == 1:
        image = image.expand(-1, 3, -1, -1)
    if image.shape[1] != 3:
        raise ShapeError(f"expected 1 or 3 channels, got {image.shape[1]}")
    if image.shape[-1] != image.shape[-2]:
        raise ShapeError(f"encoder input must be square, got {tuple(image.shape[-2:])}")
    return image


def edge_relevancy(photo: torch.Tensor) -> torch.Tensor:
    """
    Normalized gradient-magnitude map of a photo, summing to 1.

    A constant image has no gradients and yields the uniform map.
    """
    x = as_batch(photo.detach()).double().mean(dim=1, keepdim=True)
    kx = _SOBEL_X.to(x)[None, None]
    ky = kx.transpose(-1, -2)
    padded = F.pad(x, (1, 1, 1, 1), mode="replicate")
    gx = F.conv2d(padded, kx)
    gy = F.conv2d(padded, ky)
    mag = torch.sqrt(gx * gx + gy * gy)[0, 0]
    total = mag.sum()
    if total <= 1e-12:
        return torch.full_like(mag, 1.0 / mag.numel())
    return mag / total


class Encoder(ABC):
    """Frozen perceptual network; read-only after construction."""

    name: str = "abstract"
    depth: int = MAX_ENCODER_LAYER
    has_text_tower: bool = False

    def __init__(self, input_size: int, mean: Sequence[float], std: Sequence[float]):
        self.input_size = input_size
        self._mean = torch.tensor(list(mean), dtype=torch.float64).view(1, 3, 1, 1)
        self._std = torch.tensor(list(std), dtype=torch.float64).view(1, 3, 1, 1)

    @property
    def cache_id(self) -> str:
        return f"{self.name}@{self.input_size}"

    def check_layers(self, layers: Iterable[int]) -> List[int]:
        layers = sorted(set(layers))
        bad = [layer for layer in layers if not 1 <= layer <= self.depth]
        if bad:
            raise ConfigurationError(f"layer indices {bad} out of range 1..{self.depth} for encoder '{self.name}'")
        return layers

    def preprocess(self, image: torch.Tensor) -> torch.Tensor:
        """Resize to the backend input size and normalize channels."""
        x = as_batch(image)
        if x.shape[-1] != self.input_size:
            x = F.interpolate(x, size=(self.input_size, self.input_size), mode="bilinear", align_corners=False)
        return (x - self._mean.to(x)) / self._std.to(x)

    @abstractmethod
    def forward_layers(self, x: torch.Tensor, layers: List[int]) -> Dict[int, torch.Tensor]:
        """Run the backbone on preprocessed input and collect the requested layers."""

    def encode_preprocessed(self, x: torch.Tensor, layers: Iterable[int]) -> LayerActivations:
        layers = self.check_layers(layers)
        return LayerActivations(layers=self.forward_layers(x, layers), source_resolution=int(x.shape[-1]))

    def encode(self, image: torch.Tensor, layers: Iterable[int]) -> LayerActivations:
        """
        Per-layer activations of an image, differentiable w.r.t. its pixels.

        Raises:
            ConfigurationError: a layer index outside 1..depth
        """
        layers = self.check_layers(layers)
        return self.encode_preprocessed(self.preprocess(image), layers)

    def relevancy_map(self, photo: torch.Tensor) -> torch.Tensor:
        """Saliency grid at the photo's resolution, normalized to sum 1."""
        return edge_relevancy(photo)

    def image_embedding(self, image: torch.Tensor) -> torch.Tensor:
        raise CapabilityError(f"encoder '{self.name}' has no image/text embedding head")

    def text_embedding(self, prompts: Sequence[str]) -> torch.Tensor:
        raise CapabilityError(f"encoder '{self.name}' has no text tower")
