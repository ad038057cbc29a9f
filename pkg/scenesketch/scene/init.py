"""
Stroke initialization from a relevancy map.
"""
from typing import List

import torch

from scenesketch.core.errors import DomainError, ShapeError
from scenesketch.core.logging import logger
from scenesketch.schemas import Region
from scenesketch.sketch.model import Stroke

OFFSET_STD = 0.05


def init_strokes(
    target_img: torch.Tensor,
    relevancy: torch.Tensor,
    n: int,
    seed: int,
    width: float = 1.5,
    region: Region = Region.background,
) -> List[Stroke]:
    """
    Place n short strokes at anchors sampled from the relevancy distribution.

    Anchors are drawn without replacement; when fewer pixels carry mass than
    strokes are requested, sampling falls back to replacement. Each stroke
    starts at its anchor and walks three Gaussian steps (std 0.05 of the canvas).

    Raises:
        DomainError: n < 1 or n exceeds the pixel count
        ShapeError: relevancy and target sizes differ
    """
    if relevancy.dim() != 2:
        raise ShapeError(f"relevancy must be (H, W), got {tuple(relevancy.shape)}")
    if tuple(target_img.shape[-2:]) != tuple(relevancy.shape):
        raise ShapeError(f"relevancy {tuple(relevancy.shape)} does not match target {tuple(target_img.shape[-2:])}")
    h, w = relevancy.shape
    if n < 1:
        raise DomainError(f"stroke count must be at least 1, got {n}")
    if n > h * w:
        raise DomainError(f"cannot place {n} strokes on a {h}x{w} grid")

    gen = torch.Generator().manual_seed(seed)
    weights = relevancy.detach().double().reshape(-1).clamp_min(0.0)
    if float(weights.sum()) <= 0:
        weights = torch.ones_like(weights)
    positive = int((weights > 0).sum())
    replacement = positive < n
    if replacement:
        logger.warning(f"only {positive} pixels carry relevancy mass for {n} strokes; sampling with replacement")
    idx = torch.multinomial(weights, n, replacement=replacement, generator=gen)

    anchors = torch.stack([(idx % w).double() + 0.5, (idx // w).double() + 0.5], dim=-1)
    anchors = anchors / torch.tensor([w, h], dtype=torch.float64)
    steps = torch.randn(n, 3, 2, generator=gen, dtype=torch.float64) * OFFSET_STD
    points = torch.cat([anchors[:, None, :], anchors[:, None, :] + torch.cumsum(steps, dim=1)], dim=1)
    return [
        Stroke(
            control_points=tuple((float(x), float(y)) for x, y in points[i].tolist()),
            width=width,
            probability=1.0,
            region=region,
        )
        for i in range(n)
    ]
