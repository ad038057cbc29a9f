"""
Simplification factor schedules.

factors[j] = r1 * 2^(-j * step): the halving recursion f(j) = f(j-1) / 2
sampled with a per-layer step, so log2 of the factors is affine in j.
"""
import math
from typing import Dict, Mapping, Optional

from scenesketch.core.errors import ConfigurationError, DomainError
from scenesketch.core.logging import logger
from scenesketch.schemas import Region, SimplificationSchedule

MIN_CLIP_LOSS = 1e-8

BACKGROUND_STEPS: Dict[int, float] = {2: 0.35, 7: 0.45, 8: 0.5, 11: 0.9}
FOREGROUND_STEPS: Dict[int, float] = {2: 0.45, 7: 0.4, 8: 0.5, 11: 0.9}


def initial_factor(clip_loss_of_sketch: float) -> float:
    """r1 = 1 / clip loss of the unsimplified sketch, so sparse = 1 matches the ratio."""
    value = float(clip_loss_of_sketch)
    if not value > MIN_CLIP_LOSS:
        logger.warning(f"clip loss {value:.3e} of the fidelity sketch clamped to {MIN_CLIP_LOSS:g}")
        value = MIN_CLIP_LOSS
    return 1.0 / value


def build_schedule(r1: float, step: float, num_levels: int = 8) -> SimplificationSchedule:
    if not r1 > 0:
        raise DomainError(f"r1 must be positive, got {r1}")
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    if num_levels < 1:
        raise DomainError(f"num_levels must be at least 1, got {num_levels}")
    factors = [r1 * 2.0 ** (-j * step) for j in range(num_levels)]
    return SimplificationSchedule(r1=r1, step=step, num_levels=num_levels, factors=factors)


def default_steps(
    region: Region,
    layer: int,
    overrides: Optional[Mapping[str, Mapping[int, float]]] = None,
    shared_step: Optional[float] = None,
) -> float:
    """
    Sampling step for a lineage.

    Precedence: shared_step, then a per-region override, then the built-in table.

    Raises:
        ConfigurationError: the layer has no default and no override
    """
    if shared_step is not None:
        return float(shared_step)
    if region == Region.combined:
        raise ConfigurationError("step sizes are defined per foreground/background region")
    table = FOREGROUND_STEPS if region == Region.foreground else BACKGROUND_STEPS
    custom = (overrides or {}).get(region.value, {})
    if layer in custom:
        return float(custom[layer])
    if layer in table:
        return table[layer]
    raise ConfigurationError(
        f"no default step for {region.value} layer {layer}; defaults exist for layers "
        f"{sorted(table)}, set train.step_overrides.{region.value} for others",
        keys=[f"train.step_overrides.{region.value}.{layer}"],
    )


def linear_schedule(r1: float, num_levels: int, strokes_per_level: int = 8, n_strokes: int = 64) -> SimplificationSchedule:
    """
    Evenly spaced factors removing a fixed stroke budget per level.

    Negative-control schedule for tests; the pipeline never selects it.
    """
    if not r1 > 0:
        raise DomainError(f"r1 must be positive, got {r1}")
    delta = strokes_per_level / n_strokes
    factors = [r1 * (1.0 - j * delta) for j in range(num_levels)]
    if factors[-1] <= 0:
        raise DomainError(f"{num_levels} levels of {strokes_per_level} strokes exceed {n_strokes} strokes")
    step = -math.log2(factors[1] / r1) if num_levels > 1 else 1.0
    return SimplificationSchedule(r1=r1, step=step, num_levels=num_levels, factors=factors)
