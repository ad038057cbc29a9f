"""
Zero-shot recognizability of sketches.

A sketch is recognizable when at least 2 of the photo's top-5 zero-shot
classes also appear in the sketch's top 5. Class text embeddings are the
mean over prompt templates and are computed once per (encoder, classes, templates).
"""
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import torch

from scenesketch.cache.cache_decorators import cached
from scenesketch.core.errors import CapabilityError, ConfigurationError
from scenesketch.core.logging import logger
from scenesketch.encoders.base import Encoder

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_CLASSES = DATA_DIR / "classes.txt"
DEFAULT_TEMPLATES = DATA_DIR / "templates.txt"
TOP_K = 5
MIN_OVERLAP = 2


def load_lines(path: Union[str, Path]) -> List[str]:
    """Non-empty stripped lines of a text file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"file not found: {path}")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ConfigurationError(f"file is empty: {path}")
    return lines


def load_templates(path: Union[str, Path] = DEFAULT_TEMPLATES) -> List[str]:
    templates = load_lines(path)
    bad = [t for t in templates if "{}" not in t]
    if bad:
        raise ConfigurationError(f"templates without a '{{}}' placeholder in {path}: {bad[:3]}")
    return templates


@cached("class_embeddings")
def class_text_embeddings(encoder: Encoder, classes: Tuple[str, ...], templates: Tuple[str, ...]) -> torch.Tensor:
    """(num_classes, dim) unit-norm mean template embedding per class."""
    if not encoder.has_text_tower:
        raise CapabilityError(f"encoder '{encoder.name}' has no text tower for zero-shot classification")
    rows = []
    for name in classes:
        emb = encoder.text_embedding([t.format(name) for t in templates]).double()
        emb = emb / emb.norm(dim=-1, keepdim=True)
        mean = emb.mean(dim=0)
        rows.append(mean / mean.norm())
    logger.debug(f"Embedded {len(classes)} classes x {len(templates)} templates with {encoder.name}")
    return torch.stack(rows)


def top_k_classes(image_embedding: torch.Tensor, class_embeddings: torch.Tensor, k: int = TOP_K) -> List[int]:
    """Indices of the k classes with the highest cosine similarity, best first."""
    img = image_embedding.reshape(-1).double()
    img = img / img.norm()
    cls = class_embeddings.double()
    cls = cls / cls.norm(dim=-1, keepdim=True)
    scores = cls @ img
    k = min(k, scores.numel())
    return [int(i) for i in torch.topk(scores, k).indices.tolist()]


class ZeroShotClassifier:
    """Zero-shot classifier over a fixed class list."""

    def __init__(self, encoder: Encoder, classes: Sequence[str], templates: Sequence[str]):
        if not encoder.has_text_tower:
            raise CapabilityError(f"encoder '{encoder.name}' cannot rank class names (no text tower)")
        self.encoder = encoder
        self.classes = tuple(classes)
        self.templates = tuple(templates)

    @classmethod
    def from_files(
        cls,
        encoder: Encoder,
        classes_path: Optional[Path] = None,
        templates_path: Optional[Path] = None,
    ) -> "ZeroShotClassifier":
        return cls(
            encoder,
            load_lines(classes_path or DEFAULT_CLASSES),
            load_templates(templates_path or DEFAULT_TEMPLATES),
        )

    @property
    def class_embeddings(self) -> torch.Tensor:
        return class_text_embeddings(self.encoder, self.classes, self.templates)

    def top_k(self, image: torch.Tensor, k: int = TOP_K) -> List[int]:
        return top_k_classes(self.encoder.image_embedding(image), self.class_embeddings, k)


def recognizability(
    photo: torch.Tensor,
    sketch_img: torch.Tensor,
    classifier: ZeroShotClassifier,
    k: int = TOP_K,
    min_overlap: int = MIN_OVERLAP,
) -> bool:
    """True when the photo's and the sketch's top-k class sets share at least min_overlap classes."""
    k = min(k, len(classifier.classes))
    photo_top = set(classifier.top_k(photo, k))
    sketch_top = set(classifier.top_k(sketch_img, k))
    return len(photo_top & sketch_top) >= min(min_overlap, k)
