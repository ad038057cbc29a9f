"""
Rasterizer contract.

A rasterizer turns stroke tensors into a grayscale image (1 = white paper,
0 = full ink) that stays differentiable w.r.t. control points and stroke
probabilities. Effective stroke width is width * probability.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import torch
from PIL import Image

from scenesketch.core.errors import ConfigurationError
from scenesketch.sketch.model import Sketch, sketch_to_tensors


@dataclass(frozen=True)
class RasterImage:
    """H x W grid of values in [0, 1]."""
    pixels: torch.Tensor

    @property
    def resolution(self) -> int:
        return int(self.pixels.shape[-1])

    def to_numpy(self) -> np.ndarray:
        return self.pixels.detach().cpu().double().numpy()

    def to_pil(self) -> Image.Image:
        data = np.clip(np.rint(self.to_numpy() * 255.0), 0, 255).astype(np.uint8)
        return Image.fromarray(data, mode="L")

    def save_png(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_pil().save(path, format="PNG")
        return path


class Rasterizer(ABC):
    """Differentiable stroke renderer."""

    name: str = "abstract"
    supports_gradients: bool = True

    @abstractmethod
    def render_tensors(
        self,
        points: torch.Tensor,
        widths: torch.Tensor,
        probs: torch.Tensor,
        canvas_size: int,
    ) -> torch.Tensor:
        """
        Args:
            points: (n, 4, 2) control points in normalized coordinates
            widths: (n,) base widths in pixels
            probs: (n,) stroke probabilities
            canvas_size: output resolution

        Returns:
            (canvas_size, canvas_size) tensor in [0, 1]
        """

    @staticmethod
    def _check_canvas(canvas_size: int) -> None:
        if canvas_size <= 0:
            raise ConfigurationError(f"canvas size must be positive, got {canvas_size}")

    def render(self, sketch: Sketch, dtype: torch.dtype = torch.float32) -> RasterImage:
        """Render an immutable sketch (no gradient tracking)."""
        self._check_canvas(sketch.canvas_size)
        points, widths, probs = sketch_to_tensors(sketch, dtype=dtype)
        with torch.no_grad():
            pixels = self.render_tensors(points, widths, probs, sketch.canvas_size)
        return RasterImage(pixels=pixels)
