"""
Strokes, sketches and canvas transforms.

Control points are stored in normalized canvas coordinates ([0,1]^2 nominally;
points that drift outside during optimization are kept as-is). Widths are in
render-resolution pixels.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field, field_validator

from scenesketch.core.errors import DomainError, InvalidTransformError, ShapeError
from scenesketch.schemas import Region

Point = Tuple[float, float]

# Binomial coefficients of the cubic Bernstein basis
_BERNSTEIN = (1.0, 3.0, 3.0, 1.0)


class Stroke(BaseModel):
    """One cubic Bezier curve gated by a visibility probability."""
    control_points: Tuple[Point, Point, Point, Point]
    width: float = Field(1.5, gt=0)
    probability: float = Field(1.0, ge=0, le=1)
    region: Region = Region.background

    class Config:
        frozen = True

    @field_validator("region")
    @classmethod
    def _single_region(cls, v: Region) -> Region:
        if v == Region.combined:
            raise ValueError("a stroke belongs to the foreground or the background")
        return v

    @property
    def effective_width(self) -> float:
        return self.width * self.probability


class Sketch(BaseModel):
    """Ordered stroke set on one square canvas."""
    strokes: Tuple[Stroke, ...] = ()
    canvas_size: int = Field(224, ge=0)
    fidelity_level: Optional[int] = None
    simplicity_level: int = Field(0, ge=0)
    region: Region = Region.background

    class Config:
        frozen = True

    def __len__(self) -> int:
        return len(self.strokes)

    def visible_count(self, drop_threshold: float) -> int:
        return sum(1 for s in self.strokes if s.probability >= drop_threshold)

    @property
    def probabilities(self) -> List[float]:
        return [s.probability for s in self.strokes]


class CanvasTransform(BaseModel):
    """Uniform scale plus translation, p -> scale * p + translation."""
    scale: float = 1.0
    translation: Point = (0.0, 0.0)

    class Config:
        frozen = True

    @classmethod
    def identity(cls) -> "CanvasTransform":
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.translation == (0.0, 0.0)

    def _require_invertible(self) -> None:
        if not self.scale > 0:
            raise InvalidTransformError(f"transform scale must be positive, got {self.scale}")

    def map_point(self, p: Point) -> Point:
        self._require_invertible()
        return (self.scale * p[0] + self.translation[0], self.scale * p[1] + self.translation[1])

    def inverse(self) -> "CanvasTransform":
        self._require_invertible()
        inv = 1.0 / self.scale
        return CanvasTransform(
            scale=inv,
            translation=(-self.translation[0] * inv, -self.translation[1] * inv),
        )


def _check_t(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"curve parameter t must lie in [0, 1], got {t}")


def evaluate_bezier(stroke: Stroke, t: float) -> Point:
    """Point on the stroke at parameter t via the cubic Bernstein basis."""
    _check_t(t)
    if t == 0.0:
        return tuple(stroke.control_points[0])
    if t == 1.0:
        return tuple(stroke.control_points[3])
    pts = np.asarray(stroke.control_points, dtype=np.float64)
    s = 1.0 - t
    basis = np.array([_BERNSTEIN[j] * s ** (3 - j) * t ** j for j in range(4)])
    x, y = basis @ pts
    return (float(x), float(y))


def de_casteljau(points: Sequence[Point], t: float) -> Tuple[Point, List[Point], List[Point]]:
    """
    Evaluate and split a Bezier curve by repeated linear interpolation.

    Returns:
        (point at t, control points of the left half, control points of the right half)
    """
    _check_t(t)
    level = [np.asarray(p, dtype=np.float64) for p in points]
    left, right = [level[0]], [level[-1]]
    while len(level) > 1:
        level = [(1.0 - t) * a + t * b for a, b in zip(level[:-1], level[1:])]
        left.append(level[0])
        right.append(level[-1])
    to_pt = lambda a: (float(a[0]), float(a[1]))  # noqa: E731
    return to_pt(level[0]), [to_pt(a) for a in left], [to_pt(a) for a in reversed(right)]


def bezier_points(control_points: torch.Tensor, samples: int) -> torch.Tensor:
    """
    Sample cubic curves at evenly spaced parameters, differentiably.

    Args:
        control_points: (n, 4, 2) tensor
        samples: number of parameter values including both endpoints

    Returns:
        (n, samples, 2) tensor
    """
    t = torch.linspace(0.0, 1.0, samples, dtype=control_points.dtype, device=control_points.device)
    s = 1.0 - t
    basis = torch.stack([s ** 3, 3 * s ** 2 * t, 3 * s * t ** 2, t ** 3], dim=-1)  # (samples, 4)
    return torch.einsum("kj,njd->nkd", basis, control_points)


def apply_transform(sketch: Sketch, xf: CanvasTransform) -> Sketch:
    """Map every control point through xf; widths scale with it, probabilities do not."""
    xf._require_invertible()
    strokes = tuple(
        s.model_copy(update={
            "control_points": tuple(xf.map_point(p) for p in s.control_points),
            "width": s.width * xf.scale,
        })
        for s in sketch.strokes
    )
    return sketch.model_copy(update={"strokes": strokes})


def sketch_to_tensors(sketch: Sketch, dtype: torch.dtype = torch.float32) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(points (n,4,2), widths (n,), probabilities (n,)) of a sketch."""
    n = len(sketch.strokes)
    if n == 0:
        return torch.zeros(0, 4, 2, dtype=dtype), torch.zeros(0, dtype=dtype), torch.zeros(0, dtype=dtype)
    points = torch.tensor([s.control_points for s in sketch.strokes], dtype=dtype)
    widths = torch.tensor([s.width for s in sketch.strokes], dtype=dtype)
    probs = torch.tensor([s.probability for s in sketch.strokes], dtype=dtype)
    return points, widths, probs


def sketch_from_tensors(
    points: torch.Tensor,
    widths: torch.Tensor,
    probs: torch.Tensor,
    regions: Sequence[Region],
    canvas_size: int,
    fidelity_level: Optional[int] = None,
    simplicity_level: int = 0,
    region: Region = Region.background,
) -> Sketch:
    """Freeze optimization tensors into an immutable Sketch."""
    points = points.detach().reshape(-1, 4, 2).double().cpu()
    if not (points.shape[0] == widths.shape[0] == probs.shape[0] == len(regions)):
        raise ShapeError(
            f"stroke tensors disagree: points {tuple(points.shape)}, widths {tuple(widths.shape)}, "
            f"probs {tuple(probs.shape)}, regions {len(regions)}"
        )
    w = widths.detach().double().cpu().tolist()
    p = probs.detach().double().clamp(0.0, 1.0).cpu().tolist()
    strokes = tuple(
        Stroke(
            control_points=tuple((float(x), float(y)) for x, y in points[i].tolist()),
            width=w[i],
            probability=p[i],
            region=regions[i],
        )
        for i in range(points.shape[0])
    )
    return Sketch(
        strokes=strokes,
        canvas_size=canvas_size,
        fidelity_level=fidelity_level,
        simplicity_level=simplicity_level,
        region=region,
    )


def combine_sketches(foreground: Sketch, background: Sketch) -> Sketch:
    """Aggregate the strokes of two region sketches into one combined sketch."""
    if foreground.canvas_size != background.canvas_size:
        raise ShapeError(
            f"cannot combine canvases of size {foreground.canvas_size} and {background.canvas_size}"
        )
    return Sketch(
        strokes=background.strokes + foreground.strokes,
        canvas_size=foreground.canvas_size,
        fidelity_level=foreground.fidelity_level,
        simplicity_level=foreground.simplicity_level,
        region=Region.combined,
    )


def resize_canvas(sketch: Sketch, canvas_size: int) -> Sketch:
    """Same drawing on a canvas of another resolution; widths scale with it."""
    if canvas_size <= 0:
        raise DomainError(f"canvas size must be positive, got {canvas_size}")
    if sketch.canvas_size == canvas_size:
        return sketch
    factor = canvas_size / sketch.canvas_size
    strokes = tuple(s.model_copy(update={"width": s.width * factor}) for s in sketch.strokes)
    return sketch.model_copy(update={"strokes": strokes, "canvas_size": canvas_size})
