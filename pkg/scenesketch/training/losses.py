"""
Training losses and GradNorm loss balancing.

clip_loss drives stroke placement, sparse_loss pushes stroke probabilities
down, and ratio_loss ties the two together through the simplification factor
r. simp_objective combines them with GradNorm weights.
"""
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import torch

from scenesketch.core.errors import DomainError, LossError, ShapeError
from scenesketch.core.logging import logger
from scenesketch.encoders.base import Encoder, LayerActivations, as_batch
from scenesketch.schemas import LossBreakdown

Scalar = Union[float, torch.Tensor]

RATIO_EPS = 1e-8
LOSS_NAMES = ("clip", "sparse", "ratio")


def _as_tensor(value: Scalar) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    return torch.tensor(float(value), dtype=torch.float64)


def require_finite(name: str, value: Scalar) -> None:
    """Raise LossError when a loss component is NaN or infinite."""
    v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
    if not math.isfinite(v):
        raise LossError(f"{name} loss is not finite ({v})")


def activation_distance(a: LayerActivations, b: LayerActivations, layers: Iterable[int]) -> torch.Tensor:
    """Sum over layers of the mean squared activation difference."""
    total = None
    for layer in layers:
        term = ((a[layer] - b[layer]) ** 2).mean()
        total = term if total is None else total + term
    if total is None:
        raise DomainError("activation_distance needs at least one layer")
    return total


def clip_loss(
    sketch_img: torch.Tensor,
    target_img: torch.Tensor,
    layer: int,
    encoder: Encoder,
    geometry_layer: Optional[int] = None,
    target_activations: Optional[LayerActivations] = None,
) -> torch.Tensor:
    """
    Perceptual distance between a rendered sketch and its target at one encoder layer.

    The squared L2 gap is averaged over all activation elements (class and patch
    tokens). When geometry_layer is given its term is added with weight 1.

    Args:
        sketch_img: rendered sketch, (H, W) or batched
        target_img: target image with the same spatial size and batch
        layer: fidelity layer
        encoder: perceptual encoder
        geometry_layer: optional extra layer (foreground lineages)
        target_activations: precomputed target activations, skips re-encoding

    Raises:
        ShapeError: the two images differ in resolution or batch size
    """
    s = as_batch(sketch_img)
    t = as_batch(target_img)
    if s.shape[0] != t.shape[0] or s.shape[-2:] != t.shape[-2:]:
        raise ShapeError(
            f"sketch {tuple(s.shape)} and target {tuple(t.shape)} must share batch and resolution"
        )
    layers = [layer] if geometry_layer is None or geometry_layer == layer else [layer, geometry_layer]
    sketch_acts = encoder.encode(s, layers)
    if target_activations is None:
        with torch.no_grad():
            target_activations = encoder.encode(t.to(s.dtype), layers)
    return activation_distance(sketch_acts, target_activations, layers)


def sparse_loss(probs: torch.Tensor) -> torch.Tensor:
    """
    Normalized L1 norm of the stroke probabilities, sum(p) / n.

    Raises:
        DomainError: empty input or any probability outside [0, 1]
    """
    if probs.numel() == 0:
        raise DomainError("sparse_loss needs at least one probability")
    detached = probs.detach()
    if bool((detached < 0).any()) or bool((detached > 1).any()):
        raise DomainError("stroke probabilities must lie in [0, 1]")
    return probs.sum() / probs.numel()


def ratio_loss(sparse: Scalar, clip: Scalar, r: Scalar) -> torch.Tensor:
    """
    (sparse / clip - r)^2 with the clip loss detached in the denominator.

    A clip loss below RATIO_EPS is clamped to it with a warning.
    """
    sparse = _as_tensor(sparse)
    denom = _as_tensor(clip).detach()
    if float(denom) < RATIO_EPS:
        logger.warning(f"clip loss {float(denom):.3e} below {RATIO_EPS:g}; clamping ratio denominator")
        denom = denom.clamp_min(RATIO_EPS)
    r = _as_tensor(r).to(sparse)
    return (sparse / denom.to(sparse) - r) ** 2


def target_count_loss(sparse: Scalar, target_fraction: float) -> torch.Tensor:
    """
    Squared gap between the sparse loss and a fixed fraction of strokes to keep.

    Negative-control variant of ratio_loss for tests; the pipeline never uses it.
    """
    if not 0.0 <= target_fraction <= 1.0:
        raise DomainError(f"target fraction must lie in [0, 1], got {target_fraction}")
    return (_as_tensor(sparse) - target_fraction) ** 2


def gradnorm_weights(
    grad_norms: Sequence[float],
    inverse_rates: Optional[Sequence[float]] = None,
    alpha: float = 0.12,
    max_weight: float = 10.0,
) -> List[float]:
    """
    Closed-form GradNorm weights.

    Each weight solves w_i * g_i = mean(g) * r_i^alpha, so losses with larger
    gradient norms get smaller weights. Weights are capped at max_weight and
    renormalized to sum to the number of losses.

    Args:
        grad_norms: per-loss gradient norms on the shared parameters
        inverse_rates: relative inverse training rates (L_i(t)/L_i(0) over their mean); ones if None
        alpha: restoring-force exponent
        max_weight: cap, also used for a loss whose gradient norm is zero

    Returns:
        Positive weights summing to len(grad_norms)
    """
    k = len(grad_norms)
    if k < 2:
        raise DomainError("gradnorm_weights balances at least two losses")
    rates = list(inverse_rates) if inverse_rates is not None else [1.0] * k
    if len(rates) != k:
        raise ShapeError(f"{k} gradient norms but {len(rates)} inverse rates")
    if any(g < 0 or not math.isfinite(g) for g in grad_norms):
        raise DomainError(f"gradient norms must be finite and non-negative, got {list(grad_norms)}")

    positive = [g for g in grad_norms if g > 0]
    mean_norm = sum(positive) / len(positive) if positive else 0.0
    raw: List[float] = []
    for i, g in enumerate(grad_norms):
        if g <= 0:
            logger.warning(f"zero gradient norm for loss {i}; assigning max weight {max_weight:g}")
            raw.append(max_weight)
            continue
        rate = max(rates[i], 0.0)
        raw.append(min(mean_norm * rate ** alpha / g, max_weight))
    total = sum(raw)
    if total <= 0:
        return [1.0] * k
    return [w * k / total for w in raw]


class GradNormBalancer:
    """
    Tracks initial loss values and turns per-iteration gradient norms into weights.

    One balancer belongs to one simplification lineage; it is not thread-safe.
    """

    def __init__(self, num_losses: int = 3, alpha: float = 0.12, max_weight: float = 10.0):
        self.num_losses = num_losses
        self.alpha = alpha
        self.max_weight = max_weight
        self.initial_losses: Optional[List[float]] = None
        self.last_weights: List[float] = [1.0] * num_losses

    def inverse_rates(self, losses: Sequence[float]) -> List[float]:
        if self.initial_losses is None:
            self.initial_losses = [float(v) for v in losses]
        ratios = [
            float(v) / l0 if l0 > RATIO_EPS else 1.0
            for v, l0 in zip(losses, self.initial_losses)
        ]
        mean = sum(ratios) / len(ratios)
        return [r / mean for r in ratios] if mean > 0 else [1.0] * len(ratios)

    def update(self, losses: Sequence[float], grad_norms: Sequence[float]) -> List[float]:
        rates = self.inverse_rates(losses)
        self.last_weights = gradnorm_weights(grad_norms, rates, self.alpha, self.max_weight)
        return self.last_weights


def grad_norm(grads: Sequence[Optional[torch.Tensor]]) -> float:
    """L2 norm of a list of gradients; missing entries count as zero."""
    sq = sum(float((g.detach() ** 2).sum()) for g in grads if g is not None)
    return math.sqrt(sq)


def simp_objective(
    clip: Scalar,
    sparse: Scalar,
    ratio: Scalar,
    weights: Sequence[float] = (1.0, 1.0, 1.0),
) -> Tuple[torch.Tensor, LossBreakdown]:
    """
    Weighted simplification objective.

    Returns:
        (total as a tensor, LossBreakdown with plain floats)

    Raises:
        LossError: any component is NaN or infinite
    """
    components = [_as_tensor(clip), _as_tensor(sparse), _as_tensor(ratio)]
    for name, value in zip(LOSS_NAMES, components):
        require_finite(name, value)
    if len(weights) != 3:
        raise ShapeError(f"expected 3 loss weights, got {len(weights)}")
    total = sum(w * c for w, c in zip(weights, components))
    breakdown = LossBreakdown(
        clip_loss=max(float(components[0].detach()), 0.0),
        sparse_loss=min(max(float(components[1].detach()), 0.0), 1.0),
        ratio_loss=max(float(components[2].detach()), 0.0),
        total=float(total.detach()),
        weights=[float(w) for w in weights],
    )
    return total, breakdown
