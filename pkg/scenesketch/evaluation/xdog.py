"""
Extended difference-of-Gaussians edge maps.

The edge-only variant S = 1 + p * (G_sigma - G_k*sigma) is used, so flat
regions of any brightness come out white and only intensity transitions draw
ink. S is soft-thresholded at epsilon with sharpness phi, then binarized.
"""
from typing import Optional

import cv2
import numpy as np
import torch
from pydantic import BaseModel, Field


class XDoGParams(BaseModel):
    sigma: float = Field(0.8, gt=0)
    k: float = Field(1.6, gt=1)
    p: float = Field(20.0, gt=0)
    epsilon: float = 0.7
    phi: float = Field(10.0, gt=0)
    binarize_at: Optional[float] = 0.5

    class Config:
        extra = "forbid"


def to_grayscale(image: torch.Tensor) -> np.ndarray:
    """(3, H, W) or (H, W) tensor -> HxW float64 luminance."""
    data = image.detach().cpu().double()
    if data.dim() == 3:
        r, g, b = data[0], data[1], data[2]
        data = 0.299 * r + 0.587 * g + 0.114 * b
    return data.numpy()


def xdog_edges(photo: torch.Tensor, params: Optional[XDoGParams] = None) -> torch.Tensor:
    """
    Edge map of a photo: 1 = white paper, 0 = edge ink.

    Returns:
        (H, W) float64 tensor, binary unless params.binarize_at is None
    """
    params = params or XDoGParams()
    gray = to_grayscale(photo)
    narrow = cv2.GaussianBlur(gray, (0, 0), params.sigma, borderType=cv2.BORDER_REPLICATE)
    wide = cv2.GaussianBlur(gray, (0, 0), params.k * params.sigma, borderType=cv2.BORDER_REPLICATE)
    s = 1.0 + params.p * (narrow - wide)
    soft = np.where(s >= params.epsilon, 1.0, 1.0 + np.tanh(params.phi * (s - params.epsilon)))
    if params.binarize_at is not None:
        soft = (soft >= params.binarize_at).astype(np.float64)
    return torch.from_numpy(np.clip(soft, 0.0, 1.0))
