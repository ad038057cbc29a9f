"""Perceptual encoders: CLIP ViT for real runs, a random-projection toy for tests."""
from pathlib import Path
from typing import Optional

from scenesketch.cache.cache_decorators import cached
from scenesketch.encoders.base import Encoder, LayerActivations, as_batch, edge_relevancy
from scenesketch.encoders.toy import ToyEncoder
from scenesketch.schemas import EncoderBackend


@cached("encoder")
def get_encoder(backend: EncoderBackend, weights_path: Optional[Path] = None, device: Optional[str] = None, input_size: int = 224) -> Encoder:
    """Load (once per process) the encoder for a backend."""
    if backend == EncoderBackend.toy:
        return ToyEncoder(input_size=input_size)
    from scenesketch.encoders.clip_vit import ClipVitEncoder
    return ClipVitEncoder(backend=backend, weights_path=weights_path, device=device)


__all__ = ["Encoder", "LayerActivations", "ToyEncoder", "as_batch", "edge_relevancy", "get_encoder"]
