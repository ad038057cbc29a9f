"""Differentiable rasterization of sketches."""
from scenesketch.raster.base import RasterImage, Rasterizer
from scenesketch.raster.gradcheck import gradient_check
from scenesketch.raster.soft import SoftRasterizer
from scenesketch.schemas import RasterBackend


def get_rasterizer(backend: RasterBackend = RasterBackend.soft, softness: float = 1.0) -> Rasterizer:
    """Instantiate the configured rasterizer backend."""
    if backend == RasterBackend.diffvg:
        from scenesketch.raster.diffvg_backend import DiffvgRasterizer
        return DiffvgRasterizer()
    return SoftRasterizer(softness=softness)


__all__ = ["RasterImage", "Rasterizer", "SoftRasterizer", "get_rasterizer", "gradient_check"]
