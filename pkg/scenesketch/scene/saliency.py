"""
Salient-object backends.

U2NetSaliency runs a pretrained U2-Net exported to ONNX; LuminanceSaliency
treats dark pixels as salient and needs no weights.
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
from scenesketch.scene.images import to_numpy
from scenesketch.schemas import SaliencyBackend


class Saliency(ABC):
    name: str = "abstract"

    @abstractmethod
    def predict(self, photo: torch.Tensor) -> torch.Tensor:
        """(3, H, W) photo -> (H, W) saliency in [0, 1]."""


class LuminanceSaliency(Saliency):
    """Saliency = 1 - luminance (Rec. 601 weights)."""

    name = "luminance"

    def predict(self, photo: torch.Tensor) -> torch.Tensor:
        r, g, b = photo.detach().float()
        return (1.0 - (0.299 * r + 0.587 * g + 0.114 * b)).clamp(0.0, 1.0)


class U2NetSaliency(Saliency):
    name = "u2net"
    input_size = 320
    mean = (0.485, 0.456, 0.406)
    std = (0.229, 0.224, 0.225)

    def __init__(self, weights_path: Optional[Path] = None):
        try:
            import onnxruntime
        except ImportError as e:
            raise CapabilityError(f"U2-Net saliency needs onnxruntime ({e})")
        path = Path(weights_path) if weights_path else settings.weights_path("u2net.onnx")
        if not path.exists():
            raise EncoderLoadError("U2-Net weights not found", path)
        so = onnxruntime.SessionOptions()
        so.log_severity_level = 3
        self.net = onnxruntime.InferenceSession(str(path), so, providers=["CPUExecutionProvider"])
        self.input_name = self.net.get_inputs()[0].name
        self.output_name = self.net.get_outputs()[0].name
        logger.info(f"Loaded U2-Net saliency from {path}")

    def predict(self, photo: torch.Tensor) -> torch.Tensor:
        img = to_numpy(photo)
        h, w = img.shape[:2]
        img = cv2.resize(img, dsize=(self.input_size, self.input_size), interpolation=cv2.INTER_AREA)
        img = (img - np.asarray(self.mean, dtype=np.float32)) / np.asarray(self.std, dtype=np.float32)
        blob = np.expand_dims(np.transpose(img, (2, 0, 1)), axis=0).astype(np.float32)
        outs = self.net.run([self.output_name], {self.input_name: blob})
        result = np.array(outs[0]).squeeze().astype(np.float32)
        lo, hi = float(result.min()), float(result.max())
        result = (result - lo) / (hi - lo) if hi > lo else np.zeros_like(result)
        result = cv2.resize(result, (w, h), interpolation=cv2.INTER_LINEAR)
        return torch.from_numpy(np.clip(result, 0.0, 1.0))


def get_saliency(backend: SaliencyBackend, weights_path: Optional[Path] = None) -> Saliency:
    if backend == SaliencyBackend.u2net:
        return U2NetSaliency(weights_path)
    return LuminanceSaliency()
