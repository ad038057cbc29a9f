"""
Background inpainting backends.

LamaInpainter runs a LaMa ONNX export; TeleaInpainter uses OpenCV's fast
marching fill. Both leave unmasked pixels untouched.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

import cv2
import numpy as np
import torch

from scenesketch.core.config import settings
from scenesketch.core.errors import CapabilityError, EncoderLoadError
from scenesketch.core.logging import logger
from scenesketch.scene.images import to_tensor, to_uint8
from scenesketch.schemas import InpaintBackend


class Inpainter(ABC):
    name: str = "abstract"

    @abstractmethod
    def fill(self, photo: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Raw backend output for the whole image, (3, H, W) in [0, 1]."""

    def inpaint(self, photo: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Fill the masked region of photo; pixels outside the mask are kept exactly."""
        if not bool(mask.any()):
            return photo.clone()
        filled = self.fill(photo, mask).to(photo)
        m = mask.to(photo)[None]
        return photo * (1.0 - m) + filled * m


class TeleaInpainter(Inpainter):
    name = "telea"

    def __init__(self, radius: float = 3.0, dilate: int = 3):
        self.radius = radius
        self.dilate = dilate

    def fill(self, photo, mask):
        mark = (mask.detach().cpu().numpy() > 0.5).astype(np.uint8) * 255
        if self.dilate > 1:
            mark = cv2.dilate(mark, np.ones((self.dilate, self.dilate), np.uint8))
        res = cv2.inpaint(to_uint8(photo), mark, self.radius, cv2.INPAINT_TELEA)
        return to_tensor(res)


class LamaInpainter(Inpainter):
    name = "lama"
    input_size = 512

    def __init__(self, weights_path: Optional[Path] = None):
        try:
            import onnxruntime
        except ImportError as e:
            raise CapabilityError(f"LaMa inpainting needs onnxruntime ({e})")
        path = Path(weights_path) if weights_path else settings.weights_path("lama.onnx")
        if not path.exists():
            raise EncoderLoadError("LaMa weights not found", path)
        so = onnxruntime.SessionOptions()
        so.log_severity_level = 3
        self.net = onnxruntime.InferenceSession(str(path), so, providers=["CPUExecutionProvider"])
        inputs = self.net.get_inputs()
        self.image_name = inputs[0].name
        self.mask_name = inputs[1].name
        self.output_name = self.net.get_outputs()[0].name
        logger.info(f"Loaded LaMa inpainting from {path}")

    def fill(self, photo, mask):
        h, w = photo.shape[-2:]
        size = (self.input_size, self.input_size)
        img = cv2.resize(to_uint8(photo), size, interpolation=cv2.INTER_AREA).astype(np.float32) / 255.0
        m = cv2.resize((mask.detach().cpu().numpy() > 0.5).astype(np.uint8), size, interpolation=cv2.INTER_NEAREST)
        feeds = {
            self.image_name: np.transpose(img, (2, 0, 1))[None].astype(np.float32),
            self.mask_name: m[None, None].astype(np.float32),
        }
        out = np.array(self.net.run([self.output_name], feeds)[0])[0].transpose(1, 2, 0)
        if out.max() > 1.5:
            out = out / 255.0
        out = cv2.resize(np.clip(out, 0.0, 1.0).astype(np.float32), (w, h), interpolation=cv2.INTER_LINEAR)
        return to_tensor(out)


def get_inpainter(backend: InpaintBackend, weights_path: Optional[Path] = None) -> Inpainter:
    if backend == InpaintBackend.lama:
        return LamaInpainter(weights_path)
    return TeleaInpainter()
