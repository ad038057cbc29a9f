"""
Image loading and conversion.

Photos travel through the package as float tensors (3, H, W) in [0, 1];
masks as (H, W) float tensors holding exactly 0 and 1.
"""
from pathlib import Path
from typing import Union

import numpy as np
import torch
from PIL import Image, ImageOps, UnidentifiedImageError

from scenesketch.core.errors import ConfigurationError, ShapeError

PathLike = Union[str, Path]


def load_photo(path: PathLike, size: int = 224) -> torch.Tensor:
    """
    Read an image, center-crop it to a square and resize to size x size.

    Raises:
        ConfigurationError: the file is missing or not an image
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"image not found: {path}")
    try:
        with Image.open(path) as img:
            img = ImageOps.fit(img.convert("RGB"), (size, size), method=Image.BICUBIC)
    except (UnidentifiedImageError, OSError) as e:
        raise ConfigurationError(f"cannot read image {path}: {e}")
    return to_tensor(np.asarray(img))


def load_mask(path: PathLike, size: int) -> torch.Tensor:
    """Read a mask image; pixels above mid-gray are foreground."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"mask not found: {path}")
    try:
        with Image.open(path) as img:
            img = ImageOps.fit(img.convert("L"), (size, size), method=Image.NEAREST)
    except (UnidentifiedImageError, OSError) as e:
        raise ConfigurationError(f"cannot read mask {path}: {e}")
    return torch.from_numpy((np.asarray(img) > 127).astype(np.float32))


def to_tensor(array: np.ndarray) -> torch.Tensor:
    """HxWx3 uint8 or float array -> (3, H, W) float32 tensor in [0, 1]."""
    data = np.asarray(array)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ShapeError(f"expected an HxWx3 array, got {data.shape}")
    if data.dtype == np.uint8:
        data = data.astype(np.float32) / 255.0
    return torch.from_numpy(np.ascontiguousarray(data.transpose(2, 0, 1)).astype(np.float32))


def to_numpy(photo: torch.Tensor) -> np.ndarray:
    """(3, H, W) tensor -> HxWx3 float32 array."""
    return photo.detach().cpu().float().numpy().transpose(1, 2, 0).copy()


def to_uint8(photo: torch.Tensor) -> np.ndarray:
    return np.clip(np.rint(to_numpy(photo) * 255.0), 0, 255).astype(np.uint8)


def save_image(image: torch.Tensor, path: PathLike) -> Path:
    """Write a (3, H, W) photo as RGB PNG or an (H, W) grid as 8-bit grayscale PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if image.dim() == 2:
        data = np.clip(np.rint(image.detach().cpu().double().numpy() * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path, format="PNG")
    else:
        Image.fromarray(to_uint8(image), mode="RGB").save(path, format="PNG")
    return path


def save_mask(mask: torch.Tensor, path: PathLike) -> Path:
    """Write a binary mask as a 1-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = mask.detach().cpu().numpy() > 0.5
    Image.fromarray(data).convert("1").save(path, format="PNG")
    return path
