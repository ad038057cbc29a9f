"""
Scene decomposition into a salient foreground and an inpainted background.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import cv2
import numpy as np
import torch

from scenesketch.core.errors import ShapeError
from scenesketch.core.logging import logger
from scenesketch.scene.inpaint import Inpainter
from scenesketch.scene.saliency import Saliency
from scenesketch.sketch.model import CanvasTransform

SALIENCY_THRESHOLD = 0.5
TARGET_COVERAGE = 0.7


@dataclass(frozen=True)
class SceneDecomposition:
    """
    Attributes:
        photo: (3, H, W) input
        mask: (H, W) binary, 1 on the salient object, in photo coordinates
        foreground_img: object on white (after rescale_object, in rescaled coordinates)
        background_img: photo with the object inpainted away
        fg_transform: maps photo coordinates to foreground_img coordinates
        single_object: the opened mask has exactly one 8-connected component
    """
    photo: torch.Tensor
    mask: torch.Tensor
    foreground_img: torch.Tensor
    background_img: torch.Tensor
    fg_transform: CanvasTransform = field(default_factory=CanvasTransform.identity)
    single_object: bool = False

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())


def count_objects(mask: torch.Tensor) -> int:
    """8-connected components of the mask after a 3x3 morphological opening."""
    m = (mask.detach().cpu().numpy() > 0.5).astype(np.uint8)
    opened = cv2.morphologyEx(m, cv2.MORPH_OPEN, np.ones((3, 3), np.uint8))
    num_labels, _ = cv2.connectedComponents(opened, connectivity=8)
    return int(num_labels) - 1


def composite_on_white(photo: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    m = mask.to(photo)[None]
    return photo * m + (1.0 - m)


def decompose(
    photo: torch.Tensor,
    saliency: Optional[Saliency] = None,
    inpainter: Optional[Inpainter] = None,
    mask: Optional[torch.Tensor] = None,
    threshold: float = SALIENCY_THRESHOLD,
) -> SceneDecomposition:
    """
    Split a photo into foreground and background.

    A provided mask bypasses the saliency backend. Pixels whose saliency is
    below threshold are background. An empty mask makes the whole photo background.

    Raises:
        ShapeError: mask and photo sizes differ
    """
    if photo.dim() != 3 or photo.shape[0] != 3:
        raise ShapeError(f"expected a (3, H, W) photo, got {tuple(photo.shape)}")
    if mask is None:
        if saliency is None:
            raise ValueError("decompose needs a saliency backend or a mask")
        mask = (saliency.predict(photo) >= threshold).float()
    else:
        mask = (mask > 0.5).float()
    if tuple(mask.shape) != tuple(photo.shape[-2:]):
        raise ShapeError(f"mask {tuple(mask.shape)} does not match photo {tuple(photo.shape[-2:])}")

    if not bool(mask.any()):
        logger.warning("Saliency mask is empty; treating the whole image as background")
        return SceneDecomposition(
            photo=photo,
            mask=mask,
            foreground_img=torch.ones_like(photo),
            background_img=photo.clone(),
        )

    background = inpainter.inpaint(photo, mask) if inpainter is not None else photo * (1.0 - mask)[None]
    objects = count_objects(mask)
    logger.debug(f"Mask covers {float(mask.mean()):.1%} of the image, {objects} object(s)")
    return SceneDecomposition(
        photo=photo,
        mask=mask,
        foreground_img=composite_on_white(photo, mask),
        background_img=background,
        single_object=objects == 1,
    )


def bounding_box(mask: torch.Tensor) -> Tuple[int, int, int, int]:
    """(top, left, height, width) of the nonzero pixels."""
    ys, xs = torch.nonzero(mask > 0.5, as_tuple=True)
    top, bottom = int(ys.min()), int(ys.max())
    left, right = int(xs.min()), int(xs.max())
    return top, left, bottom - top + 1, right - left + 1


def rescale_transform(mask: torch.Tensor, coverage: float = TARGET_COVERAGE) -> CanvasTransform:
    """
    Transform centering the mask's bounding box and scaling it to cover `coverage` of the image.

    Returns the identity when the box already covers at least that much.
    """
    h_img, w_img = mask.shape
    top, left, h, w = bounding_box(mask)
    box_fraction = (h * w) / float(h_img * w_img)
    if box_fraction >= coverage:
        return CanvasTransform.identity()
    scale = math.sqrt(coverage / box_fraction)
    scale = min(scale, h_img / h, w_img / w)
    cx = (left + w / 2.0) / w_img
    cy = (top + h / 2.0) / h_img
    return CanvasTransform(scale=scale, translation=(0.5 - scale * cx, 0.5 - scale * cy))


def warp(image: torch.Tensor, xf: CanvasTransform, fill: float, nearest: bool = False) -> torch.Tensor:
    """Resample an (H, W) or (3, H, W) image through xf in normalized coordinates."""
    chw = image.dim() == 3
    arr = image.detach().cpu().float().numpy()
    arr = arr.transpose(1, 2, 0) if chw else arr
    h, w = arr.shape[:2]
    s = xf.scale
    # pixel centers sit at index + 0.5
    matrix = np.array([
        [s, 0.0, 0.5 * s - 0.5 + xf.translation[0] * w],
        [0.0, s, 0.5 * s - 0.5 + xf.translation[1] * h],
    ], dtype=np.float64)
    flags = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    border = (fill,) * 3 if chw else fill
    out = cv2.warpAffine(np.ascontiguousarray(arr), matrix, (w, h), flags=flags,
                         borderMode=cv2.BORDER_CONSTANT, borderValue=border)
    out = torch.from_numpy(np.ascontiguousarray(out.transpose(2, 0, 1) if chw else out))
    return out.to(image.dtype)


def rescale_object(decomp: SceneDecomposition, coverage: float = TARGET_COVERAGE) -> SceneDecomposition:
    """
    Center a single small object and enlarge it to cover ~70% of the image.

    Multiple objects, an empty mask, or a box already large enough leave the
    decomposition unchanged.
    """
    if decomp.is_empty or not decomp.single_object:
        logger.info("Foreground is not a single object; skipping object rescaling")
        return decomp
    xf = rescale_transform(decomp.mask, coverage)
    if xf.is_identity:
        logger.debug("Object already covers the target fraction; no rescaling")
        return decomp
    logger.info(f"Rescaling foreground object by {xf.scale:.3f}")
    return replace(decomp, foreground_img=warp(decomp.foreground_img, xf, fill=1.0), fg_transform=xf)
