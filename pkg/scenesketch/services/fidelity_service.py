"""Fidelity sketch training: LocNet places strokes to match one encoder layer."""
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from scenesketch.core.errors import TrainingDivergedError
from scenesketch.schemas import LossRecord, Region
from scenesketch.scene.init import init_strokes
from scenesketch.services.trainer import FIDELITY_AUGMENT_SEED, INIT_SEED, LOC_SEED, LineageTrainer
from scenesketch.sketch.model import Sketch, sketch_from_tensors, sketch_to_tensors
from scenesketch.training.checkpoint import save_checkpoint
from scenesketch.training.networks import LocNet, predict_offsets


@dataclass
class FidelityResult:
    """Outcome of one fidelity lineage; carries the trained LocNet into simplification."""
    sketch: Sketch
    z_init: torch.Tensor
    widths: torch.Tensor
    locnet: LocNet
    initial_loss: float
    final_loss: float
    records: List[LossRecord] = field(default_factory=list)


class FidelityService(LineageTrainer):
    """Trains the top-row sketch S_k of one lineage."""

    def initial_strokes(self, target: torch.Tensor, region: Region, seed: int) -> Sketch:
        relevancy = self.encoder.relevancy_map(target)
        strokes = init_strokes(target, relevancy, self.cfg.n_strokes, seed + INIT_SEED, self.cfg.base_width, region)
        return Sketch(strokes=tuple(strokes), canvas_size=self.cfg.canvas_size, region=region)

    def train_fidelity(
        self,
        target: torch.Tensor,
        layer: int,
        region: Region = Region.background,
        seed: int = 0,
        init: Optional[Sketch] = None,
    ) -> FidelityResult:
        """
        Optimize LocNet so the rendered sketch matches target at `layer`.

        Each step renders Z_init + dZ, draws paired augmentations of sketch and
        target, and takes one Adam step on LocNet. Foreground lineages add the
        geometry-layer term.

        Args:
            target: (3, H, W) training target at canvas resolution
            layer: fidelity layer
            region: lineage region
            seed: lineage seed
            init: initial strokes; sampled from the relevancy map when None

        Returns:
            FidelityResult whose sketch has every p = 1

        Raises:
            TrainingDivergedError: a non-finite loss; the last finite LocNet is checkpointed
        """
        cfg = self.cfg
        layers = self.layers_for(layer, region)
        init = init if init is not None else self.initial_strokes(target, region, seed)
        z_init, widths, _ = sketch_to_tensors(init)
        probs = torch.ones(len(init), dtype=z_init.dtype)
        target = target.to(z_init.dtype)

        locnet = LocNet(len(init), cfg.hidden_width, seed=seed + LOC_SEED)
        optimizer = torch.optim.Adam(locnet.parameters(), lr=cfg.learning_rate, betas=tuple(cfg.adam_betas))
        augmenter = self.augmenter(seed + FIDELITY_AUGMENT_SEED)

        initial_loss = self.plain_clip_loss(self.render(z_init, widths, probs), target, **layers)
        records: List[LossRecord] = []
        last_good = {k: v.clone() for k, v in locnet.state_dict().items()}
        for it in range(cfg.iters_fidelity):
            z = z_init + predict_offsets(locnet, z_init)
            loss = self.augmented_clip_loss(self.render(z, widths, probs), target, augmenter=augmenter, **layers)
            value = float(loss.detach())
            if not torch.isfinite(loss):
                self._abort(locnet, last_good, region, layer, it)
            last_good = {k: v.clone() for k, v in locnet.state_dict().items()}
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            records.append(LossRecord(region=region, layer=layer, level=0, iteration=it, clip=value, total=value))
            self.log_progress(region, layer, 0, it, value)

        with torch.no_grad():
            z = z_init + predict_offsets(locnet, z_init)
            final_loss = self.plain_clip_loss(self.render(z, widths, probs), target, **layers)
        sketch = sketch_from_tensors(
            z, widths, probs, [s.region for s in init.strokes], cfg.canvas_size,
            fidelity_level=layer, simplicity_level=0, region=region,
        )
        if self.store is not None:
            save_checkpoint(self.store.checkpoint_path(region, layer, "loc"), locnet)
        return FidelityResult(
            sketch=sketch,
            z_init=z_init,
            widths=widths,
            locnet=locnet,
            initial_loss=initial_loss,
            final_loss=final_loss,
            records=records,
        )

    def _abort(self, locnet: LocNet, last_good, region: Region, layer: int, iteration: int) -> None:
        checkpoint = None
        if self.store is not None:
            locnet.load_state_dict(last_good)
            checkpoint = save_checkpoint(self.store.checkpoint_path(region, layer, "loc"), locnet)
        raise TrainingDivergedError(f"{region.value} L{layer}: clip loss is not finite", iteration, checkpoint)
