"""
Deterministic random-projection encoder.

16x16 patches are linearly projected to tokens; a class token (mean of the
patch tokens) is prepended; each layer is a fixed random residual map
h <- h + tanh(h W_l). No pretrained weights, no network access.
"""
import math
from typing import Dict, List

import torch
import torch.nn.functional as F

from scenesketch.encoders.base import Encoder
from scenesketch.schemas import MAX_ENCODER_LAYER


class ToyEncoder(Encoder):
    name = "toy"

    def __init__(self, input_size: int = 224, patch: int = 16, dim: int = 64, depth: int = MAX_ENCODER_LAYER, seed: int = 0):
        if input_size % patch:
            raise ValueError(f"input size {input_size} must be a multiple of the patch size {patch}")
        super().__init__(input_size, mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5))
        self.patch = patch
        self.dim = dim
        self.depth = depth
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        fan_in = 3 * patch * patch
        tokens = (input_size // patch) ** 2 + 1
        self.projection = torch.randn(fan_in, dim, generator=gen, dtype=torch.float64) / math.sqrt(fan_in)
        self.positional = 0.1 * torch.randn(tokens, dim, generator=gen, dtype=torch.float64)
        self.blocks = [torch.randn(dim, dim, generator=gen, dtype=torch.float64) / math.sqrt(dim) for _ in range(depth)]

    @property
    def cache_id(self) -> str:
        return f"toy@{self.input_size}/{self.patch}/{self.dim}/{self.depth}/{self.seed}"

    def forward_layers(self, x: torch.Tensor, layers: List[int]) -> Dict[int, torch.Tensor]:
        dtype = x.dtype
        patches = F.unfold(x, kernel_size=self.patch, stride=self.patch).transpose(1, 2)  # (B, T, 3*p*p)
        tokens = patches @ self.projection.to(dtype)
        h = torch.cat([tokens.mean(dim=1, keepdim=True), tokens], dim=1) + self.positional.to(dtype)
        wanted = set(layers)
        out: Dict[int, torch.Tensor] = {}
        for index, weight in enumerate(self.blocks, start=1):
            h = h + torch.tanh(h @ weight.to(dtype))
            if index in wanted:
                out[index] = h
            if index >= max(wanted):
                break
        return out
