"""
CLIP ViT encoder (OpenAI `clip` package).

Layer l is the token sequence (class + patch tokens) leaving residual block l
of the visual transformer, counted from zero, so l = 11 is the last block of
ViT-B. The backbone is run block by block instead of through forward hooks,
which keeps encode() reentrant when several lineages share one model.
"""
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import torch
import torch.nn.functional as F

from scenesketch.core.config import settings
from scenesketch.core.errors import CapabilityError, EncoderLoadError
from scenesketch.core.logging import logger
from scenesketch.encoders.base import Encoder, as_batch
from scenesketch.schemas import EncoderBackend

_MODELS = {
    EncoderBackend.clip_vit_b32: ("ViT-B/32", "ViT-B-32.pt"),
    EncoderBackend.clip_vit_b16: ("ViT-B/16", "ViT-B-16.pt"),
}
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


def _load_clip_model(backend: EncoderBackend, weights_path: Optional[Path], device: str):
    try:
        import clip
    except ImportError as e:
        raise CapabilityError(f"CLIP backend requested but the 'clip' package is not installed ({e})")

    model_name, filename = _MODELS[backend]
    path = Path(weights_path) if weights_path else settings.weights_path(filename)
    if path.exists():
        logger.info(f"Loading {model_name} weights from {path}")
        model, _ = clip.load(str(path), device=device, jit=False)
    elif weights_path is None and settings.ALLOW_DOWNLOAD:
        logger.info(f"Downloading {model_name} into {settings.WEIGHTS_ROOT}")
        model, _ = clip.load(model_name, device=device, jit=False, download_root=str(settings.WEIGHTS_ROOT))
    else:
        raise EncoderLoadError("Pretrained CLIP weights not found", path)
    return clip, model


class ClipVitEncoder(Encoder):
    has_text_tower = True

    def __init__(self, backend: EncoderBackend = EncoderBackend.clip_vit_b32, weights_path: Optional[Path] = None, device: Optional[str] = None):
        super().__init__(224, mean=CLIP_MEAN, std=CLIP_STD)
        self.backend = backend
        self.name = backend.value
        self.device = device or settings.DEVICE
        self._clip, model = _load_clip_model(backend, weights_path, self.device)
        self.model = model.float().eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.visual = self.model.visual
        self.input_size = self.visual.input_resolution
        self.depth = len(self.visual.transformer.resblocks) - 1

    @property
    def cache_id(self) -> str:
        return f"{self.name}@{self.device}"

    def _tokens(self, x: torch.Tensor) -> torch.Tensor:
        """Patch embedding + class token + positions, in (L, N, D) layout."""
        v = self.visual
        x = v.conv1(x.to(self.device, torch.float32))
        x = x.reshape(x.shape[0], x.shape[1], -1).permute(0, 2, 1)
        cls = v.class_embedding.to(x.dtype) + torch.zeros(x.shape[0], 1, x.shape[-1], dtype=x.dtype, device=x.device)
        x = torch.cat([cls, x], dim=1) + v.positional_embedding.to(x.dtype)
        return v.ln_pre(x).permute(1, 0, 2)

    def forward_layers(self, x: torch.Tensor, layers: List[int]) -> Dict[int, torch.Tensor]:
        h = self._tokens(x)
        wanted = set(layers)
        out: Dict[int, torch.Tensor] = {}
        for index, block in enumerate(self.visual.transformer.resblocks):
            h = block(h)
            if index in wanted:
                out[index] = h.permute(1, 0, 2)
            if index >= max(wanted):
                break
        return out

    @torch.no_grad()
    def relevancy_map(self, photo: torch.Tensor) -> torch.Tensor:
        """
        Attention-rollout relevancy of the class token over image patches,
        upsampled to the photo's resolution and normalized to sum 1.
        """
        size = int(as_batch(photo).shape[-1])
        h = self._tokens(self.preprocess(photo[None] if photo.dim() == 3 else photo)[:1])
        length = h.shape[0]
        eye = torch.eye(length, device=h.device)
        rollout = eye.clone()
        for block in self.visual.transformer.resblocks:
            attn = block.attn
            y = block.ln_1(h)
            q, k, _ = F.linear(y, attn.in_proj_weight, attn.in_proj_bias).chunk(3, dim=-1)
            heads, dh = attn.num_heads, y.shape[-1] // attn.num_heads
            q = q.reshape(length, heads, dh).transpose(0, 1)
            k = k.reshape(length, heads, dh).transpose(0, 1)
            weights = torch.softmax(q @ k.transpose(1, 2) / math.sqrt(dh), dim=-1).mean(dim=0)
            a = weights + eye
            a = a / a.sum(dim=-1, keepdim=True)
            rollout = a @ rollout
            h = block(h)
        grid = int(round(math.sqrt(length - 1)))
        rel = rollout[0, 1:].reshape(1, 1, grid, grid)
        rel = F.interpolate(rel, size=(size, size), mode="bilinear", align_corners=False)[0, 0].clamp_min(0).double().cpu()
        total = rel.sum()
        if total <= 1e-12:
            return torch.full_like(rel, 1.0 / rel.numel())
        return rel / total

    @torch.no_grad()
    def image_embedding(self, image: torch.Tensor) -> torch.Tensor:
        emb = self.model.encode_image(self.preprocess(image).to(self.device, torch.float32))
        return (emb / emb.norm(dim=-1, keepdim=True)).cpu()

    @torch.no_grad()
    def text_embedding(self, prompts: Sequence[str]) -> torch.Tensor:
        tokens = self._clip.tokenize(list(prompts)).to(self.device)
        emb = self.model.encode_text(tokens)
        return (emb / emb.norm(dim=-1, keepdim=True)).cpu()
