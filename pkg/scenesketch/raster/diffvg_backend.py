"""
Production rasterizer backed by diffvg (pydiffvg).

pydiffvg is an optional, source-built dependency; constructing this backend
without it raises CapabilityError.
"""
import torch

from scenesketch.core.errors import CapabilityError
from scenesketch.raster.base import Rasterizer


class DiffvgRasterizer(Rasterizer):
    name = "diffvg"

    def __init__(self, num_samples: int = 2, seed: int = 0):
        try:
            import pydiffvg
        except ImportError as e:
            raise CapabilityError(f"diffvg backend requested but pydiffvg is not installed ({e})")
        self._pydiffvg = pydiffvg
        self.num_samples = num_samples
        self.seed = seed

    def render_tensors(self, points, widths, probs, canvas_size):
        self._check_canvas(canvas_size)
        pydiffvg = self._pydiffvg
        dtype = points.dtype
        if points.shape[0] == 0:
            return torch.ones(canvas_size, canvas_size, dtype=dtype)

        shapes, groups = [], []
        black = torch.tensor([0.0, 0.0, 0.0, 1.0])
        for i in range(points.shape[0]):
            path = pydiffvg.Path(
                num_control_points=torch.tensor([2]),
                points=(points[i] * canvas_size).float(),
                stroke_width=(widths[i] * probs[i]).float(),
                is_closed=False,
            )
            shapes.append(path)
            groups.append(pydiffvg.ShapeGroup(
                shape_ids=torch.tensor([i]), fill_color=None, stroke_color=black,
            ))
        scene_args = pydiffvg.RenderFunction.serialize_scene(canvas_size, canvas_size, shapes, groups)
        render = pydiffvg.RenderFunction.apply
        img = render(canvas_size, canvas_size, self.num_samples, self.num_samples, self.seed, None, *scene_args)
        # RGBA over white paper, then luminance
        alpha = img[:, :, 3:4]
        rgb = img[:, :, :3] * alpha + (1.0 - alpha)
        return rgb.mean(dim=-1).to(dtype)
