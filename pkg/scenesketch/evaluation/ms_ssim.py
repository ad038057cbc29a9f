"""
Multi-scale structural similarity for grayscale images in [0, 1].
"""
from typing import List

import torch
import torch.nn.functional as F

from scenesketch.core.errors import ShapeError
from scenesketch.core.logging import logger

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2 * sigma ** 2))
    g = g / g.sum()
    return (g[:, None] @ g[None, :])[None, None]


def _as_nchw(image: torch.Tensor) -> torch.Tensor:
    if image.dim() == 2:
        return image[None, None]
    if image.dim() == 3:
        return image[None]
    return image


def ssim_components(x: torch.Tensor, y: torch.Tensor, window: torch.Tensor, data_range: float = 1.0):
    """Mean SSIM and mean contrast-structure term over valid windows."""
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_x = F.conv2d(x, window)
    mu_y = F.conv2d(y, window)
    sigma_x = F.conv2d(x * x, window) - mu_x ** 2
    sigma_y = F.conv2d(y * y, window) - mu_y ** 2
    sigma_xy = F.conv2d(x * y, window) - mu_x * mu_y
    cs_map = (2 * sigma_xy + c2) / (sigma_x + sigma_y + c2)
    ssim_map = (2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1) * cs_map
    return ssim_map.mean(), cs_map.mean()


def available_scales(size: int, window: int = WINDOW_SIZE, wanted: int = len(MS_SSIM_WEIGHTS)) -> int:
    scales = 0
    while scales < wanted and size >= window:
        scales += 1
        size //= 2
    return scales


def ms_ssim(a: torch.Tensor, b: torch.Tensor, data_range: float = 1.0) -> float:
    """
    Five-scale MS-SSIM with the standard exponents.

    Images too small for five scales of an 11 px window use fewer scales,
    with the exponents renormalized, and a warning.

    Raises:
        ShapeError: the images differ in shape or are smaller than the window
    """
    x = _as_nchw(a.detach()).double()
    y = _as_nchw(b.detach()).double()
    if x.shape != y.shape:
        raise ShapeError(f"ms_ssim needs equal shapes, got {tuple(a.shape)} and {tuple(b.shape)}")
    if x.shape[1] == 3:
        x = x.mean(dim=1, keepdim=True)
        y = y.mean(dim=1, keepdim=True)
    size = min(x.shape[-2:])
    scales = available_scales(size)
    if scales == 0:
        raise ShapeError(f"images of {size} px are smaller than the {WINDOW_SIZE} px window")
    weights: List[float] = list(MS_SSIM_WEIGHTS)
    if scales < len(weights):
        logger.warning(f"{size} px images support only {scales} MS-SSIM scales; renormalizing exponents")
        weights = weights[:scales]
        total = sum(weights)
        weights = [w / total for w in weights]

    window = gaussian_window()
    value = torch.ones((), dtype=torch.float64)
    for level, w in enumerate(weights):
        ssim_val, cs = ssim_components(x, y, window, data_range)
        if level == len(weights) - 1:
            value = value * torch.relu(ssim_val) ** w
        else:
            value = value * torch.relu(cs) ** w
            x = F.avg_pool2d(x, kernel_size=2)
            y = F.avg_pool2d(y, kernel_size=2)
    return float(value.clamp(0.0, 1.0))
