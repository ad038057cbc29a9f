"""
Shared machinery of the fidelity and simplification services.
"""
from typing import Dict, Optional

import torch

from scenesketch.core.logging import logger
from scenesketch.encoders.base import Encoder
from scenesketch.raster.base import Rasterizer
from scenesketch.schemas import Region, TrainConfig
from scenesketch.storage.run_store import RunStore
from scenesketch.training.augment import PairedAugmenter
from scenesketch.training.losses import clip_loss

# Offsets separating the random streams of one lineage
LOC_SEED = 0
FIDELITY_AUGMENT_SEED = 1
SIMP_SEED = 2
SIMPLIFY_AUGMENT_SEED = 3
INIT_SEED = 4


class LineageTrainer:
    """
    Base for services that optimize one (region, layer) lineage.

    Holds the frozen encoder and rasterizer (shared, read-only) and the run
    config; every per-lineage object is created inside the training call.
    """

    def __init__(self, encoder: Encoder, rasterizer: Rasterizer, cfg: TrainConfig, store: Optional[RunStore] = None):
        self.encoder = encoder
        self.rasterizer = rasterizer
        self.cfg = cfg
        self.store = store

    def augmenter(self, seed: int) -> PairedAugmenter:
        return PairedAugmenter(
            distortion=self.cfg.perspective_distortion,
            crop_scale=tuple(self.cfg.crop_scale),
            views=self.cfg.augmentations_per_step,
            generator=torch.Generator().manual_seed(seed),
        )

    def render(self, points: torch.Tensor, widths: torch.Tensor, probs: torch.Tensor) -> torch.Tensor:
        return self.rasterizer.render_tensors(points, widths, probs, self.cfg.canvas_size)

    def layers_for(self, layer: int, region: Region) -> Dict[str, Optional[int]]:
        geometry = self.cfg.geometry_layer if region == Region.foreground else None
        return {"layer": layer, "geometry_layer": geometry}

    def augmented_clip_loss(
        self,
        sketch_img: torch.Tensor,
        target: torch.Tensor,
        layer: int,
        geometry_layer: Optional[int],
        augmenter: PairedAugmenter,
    ) -> torch.Tensor:
        """Clip loss averaged over freshly sampled paired views."""
        sketches, targets = augmenter(sketch_img, target)
        return clip_loss(sketches, targets.detach(), layer, self.encoder, geometry_layer)

    @torch.no_grad()
    def plain_clip_loss(self, sketch_img: torch.Tensor, target: torch.Tensor, layer: int, geometry_layer: Optional[int]) -> float:
        """Clip loss without augmentation, used for schedules and reporting."""
        return float(clip_loss(sketch_img, target, layer, self.encoder, geometry_layer))

    def log_progress(self, region: Region, layer: int, level: int, iteration: int, total: float) -> None:
        if iteration % self.cfg.log_every == 0:
            logger.bind(region=region.value, layer=layer).info(
                f"{region.value} L{layer} S{level} iter {iteration}: loss {total:.6f}"
            )
