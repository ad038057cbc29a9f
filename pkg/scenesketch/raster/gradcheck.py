"""
Finite-difference validation of rasterizer gradients.
"""
from typing import Dict

import torch

from scenesketch.core.errors import CapabilityError, DomainError
from scenesketch.raster.base import Rasterizer
from scenesketch.schemas import GradCheckReport
from scenesketch.sketch.model import Sketch, sketch_to_tensors

MAX_CHECK_STROKES = 8


def _functional(rasterizer: Rasterizer, points, widths, probs, canvas_size, weights) -> torch.Tensor:
    ink = 1.0 - rasterizer.render_tensors(points, widths, probs, canvas_size)
    return (weights * ink * ink).sum()


def gradient_check(
    sketch: Sketch,
    seed: int,
    rasterizer: Rasterizer,
    step: float = 1e-3,
) -> GradCheckReport:
    """
    Compare autograd gradients of a weighted sum of squared ink against central differences.

    The per-pixel weights are drawn from U[0.5, 1.5] with `seed`, so the check
    is reproducible and cannot pass by symmetric cancellation.

    Args:
        sketch: at most 8 strokes
        seed: seed of the pixel weighting
        rasterizer: backend under test
        step: finite-difference step in normalized coordinates / probability units

    Returns:
        GradCheckReport with one entry per control-point coordinate and probability
    """
    if not rasterizer.supports_gradients:
        raise CapabilityError(f"rasterizer '{rasterizer.name}' does not provide gradients")
    if len(sketch.strokes) > MAX_CHECK_STROKES:
        raise DomainError(f"gradient_check accepts at most {MAX_CHECK_STROKES} strokes, got {len(sketch.strokes)}")

    size = sketch.canvas_size
    gen = torch.Generator().manual_seed(seed)
    weights = (0.5 + torch.rand(size, size, generator=gen, dtype=torch.float64))
    points, widths, probs = sketch_to_tensors(sketch, dtype=torch.float64)

    pts = points.clone().requires_grad_(True)
    prb = probs.clone().requires_grad_(True)
    value = _functional(rasterizer, pts, widths, prb, size, weights)
    g_pts, g_prb = torch.autograd.grad(value, [pts, prb], allow_unused=True)
    g_pts = torch.zeros_like(pts) if g_pts is None else g_pts
    g_prb = torch.zeros_like(prb) if g_prb is None else g_prb

    analytic: Dict[str, float] = {}
    numeric: Dict[str, float] = {}
    with torch.no_grad():
        for i in range(points.shape[0]):
            for j in range(4):
                for axis, label in enumerate("xy"):
                    key = f"stroke{i}.p{j}.{label}"
                    plus, minus = points.clone(), points.clone()
                    plus[i, j, axis] += step
                    minus[i, j, axis] -= step
                    f_plus = _functional(rasterizer, plus, widths, probs, size, weights)
                    f_minus = _functional(rasterizer, minus, widths, probs, size, weights)
                    numeric[key] = float((f_plus - f_minus) / (2 * step))
                    analytic[key] = float(g_pts[i, j, axis])
            key = f"stroke{i}.probability"
            plus, minus = probs.clone(), probs.clone()
            plus[i] += step
            minus[i] -= step
            f_plus = _functional(rasterizer, points, widths, plus, size, weights)
            f_minus = _functional(rasterizer, points, widths, minus, size, weights)
            numeric[key] = float((f_plus - f_minus) / (2 * step))
            analytic[key] = float(g_prb[i])

    scale = max([abs(v) for v in analytic.values()] + [abs(v) for v in numeric.values()] + [0.0])
    floor = max(1e-3 * scale, 1e-9)
    errors = {
        key: abs(analytic[key] - numeric[key]) / max(abs(analytic[key]), abs(numeric[key]), floor)
        for key in analytic
    }
    return GradCheckReport(
        max_rel_error=max(errors.values(), default=0.0),
        errors=errors,
        functional=float(value.detach()),
    )
