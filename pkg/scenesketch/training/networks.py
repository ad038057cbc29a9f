"""
The two trainable MLPs.

LocNet maps the flattened initial control points to per-coordinate offsets.
SimpNet maps a frozen random vector to one visibility probability per stroke.
Both are three fully connected layers with SELU between them, initialized
from an explicit torch.Generator, so parameters depend only on the seed.
"""
import math
from typing import Optional

import torch
from torch import nn

from scenesketch.core.errors import ShapeError


def _mlp(in_features: int, hidden: int, out_features: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_features, hidden),
        nn.SELU(),
        nn.Linear(hidden, hidden),
        nn.SELU(),
        nn.Linear(hidden, out_features),
    )


@torch.no_grad()
def _seeded_init(net: nn.Sequential, gen: torch.Generator) -> None:
    """Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    for module in net:
        if isinstance(module, nn.Linear):
            bound = 1.0 / math.sqrt(module.in_features)
            module.weight.copy_((torch.rand(module.weight.shape, generator=gen) * 2 - 1) * bound)
            module.bias.copy_((torch.rand(module.bias.shape, generator=gen) * 2 - 1) * bound)


class LocNet(nn.Module):
    """Stroke-offset predictor; the output layer starts at zero so offsets start at zero."""

    def __init__(self, n_strokes: int, hidden_width: int = 512, seed: int = 0):
        super().__init__()
        self.n_strokes = n_strokes
        self.hidden_width = hidden_width
        self.seed = seed
        self.in_features = n_strokes * 8
        self.mlp = _mlp(self.in_features, hidden_width, self.in_features)
        _seeded_init(self.mlp, torch.Generator().manual_seed(seed))
        with torch.no_grad():
            self.head.weight.zero_()
            self.head.bias.zero_()

    @property
    def head(self) -> nn.Linear:
        return self.mlp[-1]

    def forward(self, z_init: torch.Tensor) -> torch.Tensor:
        return self.mlp(z_init)


class SimpNet(nn.Module):
    """
    Stroke-probability predictor.

    The input is a U[0,1) vector drawn once from the seed and registered as a
    buffer, so it is saved in checkpoints and never updated by an optimizer.
    """

    def __init__(self, n_strokes: int, hidden_width: int = 512, seed: int = 0, init_probability: float = 0.5):
        super().__init__()
        if not 0.0 < init_probability < 1.0:
            raise ValueError(f"init_probability must lie in (0, 1), got {init_probability}")
        self.n_strokes = n_strokes
        self.hidden_width = hidden_width
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        self.register_buffer("noise", torch.rand(n_strokes, generator=gen))
        self.mlp = _mlp(n_strokes, hidden_width, n_strokes)
        _seeded_init(self.mlp, gen)
        with torch.no_grad():
            self.head.weight.zero_()
            self.head.bias.fill_(math.log(init_probability / (1.0 - init_probability)))

    @property
    def head(self) -> nn.Linear:
        return self.mlp[-1]

    def logits(self) -> torch.Tensor:
        return self.mlp(self.noise)

    def forward(self) -> torch.Tensor:
        return torch.sigmoid(self.logits())


def predict_offsets(net: LocNet, z_init: torch.Tensor) -> torch.Tensor:
    """
    Offsets dZ for the initial control points, shaped like z_init.

    Raises:
        ShapeError: z_init does not hold n * 4 * 2 values
    """
    if z_init.numel() != net.in_features:
        raise ShapeError(
            f"LocNet expects {net.in_features} values (n={net.n_strokes}), got shape {tuple(z_init.shape)}"
        )
    dtype = next(net.parameters()).dtype
    flat = z_init.reshape(-1).to(dtype)
    return net(flat).reshape(z_init.shape)


def predict_probabilities(net: SimpNet, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
    """Stroke probabilities, strictly inside (0, 1) up to float saturation."""
    probs = net()
    return probs if dtype is None else probs.to(dtype)
