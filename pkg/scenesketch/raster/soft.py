"""
Soft-coverage reference rasterizer.

Each curve is flattened into line segments. A pixel's coverage by a stroke of
half-width r at distance d is a logistic-smoothed box,

    c = sigmoid((r - d) / s) - sigmoid((-r - d) / s),

which is exactly zero at r = 0 while dc/dr stays positive, so hidden strokes
(p = 0) still receive gradients through their width. Strokes composite
multiplicatively: pixel = prod_i (1 - c_i).
"""
import torch
from torch.utils.checkpoint import checkpoint

from scenesketch.raster.base import Rasterizer
from scenesketch.sketch.model import bezier_points

# Elements of the (strokes, segments, pixels) distance tensor built per chunk
_CHUNK_BUDGET = 4_000_000
_DIST_EPS = 1e-12


def _pixel_grid(canvas_size: int, dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    centers = torch.arange(canvas_size, dtype=dtype, device=device) + 0.5
    ys, xs = torch.meshgrid(centers, centers, indexing="ij")
    return torch.stack([xs.reshape(-1), ys.reshape(-1)], dim=-1)  # (P, 2) as (x, y)


def _segment_distance(samples: torch.Tensor, grid: torch.Tensor) -> torch.Tensor:
    """Distance from every pixel to the nearest point of each polyline, (k, P)."""
    a = samples[:, :-1, None, :]                 # (k, S, 1, 2)
    ab = samples[:, 1:, None, :] - a             # (k, S, 1, 2)
    ap = grid[None, None, :, :] - a              # (k, S, P, 2)
    denom = (ab * ab).sum(-1) + _DIST_EPS
    t = ((ap * ab).sum(-1) / denom).clamp(0.0, 1.0)
    diff = ap - t[..., None] * ab
    d2 = (diff * diff).sum(-1).amin(dim=1)       # (k, P)
    return torch.sqrt(d2 + _DIST_EPS)


class SoftRasterizer(Rasterizer):
    """Pure-torch renderer used for tests, CI and CPU runs."""

    name = "soft"

    def __init__(self, softness: float = 1.0, segments: int = 32):
        if softness <= 0:
            raise ValueError("softness must be positive")
        if segments < 1:
            raise ValueError("segments must be >= 1")
        self.softness = softness
        self.segments = segments

    def _chunk_transparency(self, samples: torch.Tensor, radius: torch.Tensor, grid: torch.Tensor) -> torch.Tensor:
        d = _segment_distance(samples, grid)
        r = radius[:, None]
        s = self.softness
        coverage = torch.sigmoid((r - d) / s) - torch.sigmoid((-r - d) / s)
        return torch.prod(1.0 - coverage, dim=0)

    def render_tensors(self, points, widths, probs, canvas_size):
        self._check_canvas(canvas_size)
        dtype, device = points.dtype, points.device
        out = torch.ones(canvas_size * canvas_size, dtype=dtype, device=device)
        n = points.shape[0]
        if n == 0:
            return out.reshape(canvas_size, canvas_size)

        grid = _pixel_grid(canvas_size, dtype, device)
        samples = bezier_points(points * canvas_size, self.segments + 1)
        radius = widths * probs / 2.0
        chunk = max(1, _CHUNK_BUDGET // (self.segments * grid.shape[0]))
        track = torch.is_grad_enabled() and (points.requires_grad or probs.requires_grad or widths.requires_grad)
        for start in range(0, n, chunk):
            sl = slice(start, start + chunk)
            if track:
                part = checkpoint(self._chunk_transparency, samples[sl], radius[sl], grid, use_reentrant=False)
            else:
                part = self._chunk_transparency(samples[sl], radius[sl], grid)
            out = out * part
        return out.reshape(canvas_size, canvas_size)
