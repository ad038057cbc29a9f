"""Iterative simplification: SimpNet learns which strokes to drop, level by level."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import torch

from scenesketch.core.errors import LossError, TrainingDivergedError
from scenesketch.schemas import LossBreakdown, LossRecord, Region, SimplificationSchedule
from scenesketch.services.fidelity_service import FidelityResult
from scenesketch.services.trainer import SIMP_SEED, SIMPLIFY_AUGMENT_SEED, LineageTrainer
from scenesketch.sketch.model import Sketch, sketch_from_tensors
from scenesketch.training.checkpoint import save_checkpoint
from scenesketch.training.losses import (
    LOSS_NAMES,
    GradNormBalancer,
    grad_norm,
    ratio_loss,
    require_finite,
    simp_objective,
    sparse_loss,
)
from scenesketch.training.networks import SimpNet, predict_offsets, predict_probabilities


@dataclass
class SimplifyResult:
    """Snapshots S_k^1..S_k^m of one lineage plus the trained SimpNet."""
    sketches: List[Sketch]
    simpnet: SimpNet
    breakdowns: List[LossBreakdown] = field(default_factory=list)
    records: List[LossRecord] = field(default_factory=list)


def _combine(weights: Sequence[float], grads: Sequence[Sequence[Optional[torch.Tensor]]], params: List[torch.nn.Parameter]) -> None:
    """Write sum_i w_i * g_i into .grad of every parameter."""
    for index, param in enumerate(params):
        total = None
        for w, g in zip(weights, grads):
            if index < len(g) and g[index] is not None:
                total = w * g[index] if total is None else total + w * g[index]
        param.grad = total if total is not None else torch.zeros_like(param)


class SimplifyService(LineageTrainer):
    """
    Trains SimpNet (and optionally keeps fine-tuning LocNet) over a schedule.

    Gradient routing per iteration:
        clip   -> SimpNet and LocNet
        sparse -> SimpNet only
        ratio  -> SimpNet only (the clip term in its denominator is detached)
    GradNorm weights are recomputed every iteration from the gradient norms of
    the three losses on SimpNet's output layer.
    """

    def simplify_sequence(
        self,
        fidelity: FidelityResult,
        target: torch.Tensor,
        layer: int,
        schedule: SimplificationSchedule,
        region: Region = Region.background,
        seed: int = 0,
    ) -> SimplifyResult:
        """
        Produce one simplified sketch per schedule factor.

        Networks persist across levels; level j warm-starts from level j-1.

        Raises:
            TrainingDivergedError: a loss component became NaN or infinite
        """
        cfg = self.cfg
        layers = self.layers_for(layer, region)
        z_init, widths = fidelity.z_init, fidelity.widths
        regions = [s.region for s in fidelity.sketch.strokes]
        target = target.to(z_init.dtype)
        locnet = fidelity.locnet
        finetune = cfg.finetune_loc_during_simplify

        simpnet = SimpNet(len(regions), cfg.hidden_width, seed=seed + SIMP_SEED, init_probability=cfg.simp_init_probability)
        betas = tuple(cfg.adam_betas)
        simp_params = list(simpnet.parameters())
        head_ids = {id(p) for p in simpnet.head.parameters()}
        head_index = [i for i, p in enumerate(simp_params) if id(p) in head_ids]
        optimizers = [torch.optim.Adam(simp_params, lr=cfg.learning_rate, betas=betas)]
        loc_params: List[torch.nn.Parameter] = []
        if finetune:
            loc_params = list(locnet.parameters())
            optimizers.append(torch.optim.Adam(loc_params, lr=cfg.learning_rate, betas=betas))
        else:
            locnet.requires_grad_(False)
            with torch.no_grad():
                z_frozen = z_init + predict_offsets(locnet, z_init)

        augmenter = self.augmenter(seed + SIMPLIFY_AUGMENT_SEED)
        balancer = GradNormBalancer(len(LOSS_NAMES), cfg.gradnorm_alpha, cfg.gradnorm_max_weight)
        sketches: List[Sketch] = []
        breakdowns: List[LossBreakdown] = []
        records: List[LossRecord] = []

        def current_points() -> torch.Tensor:
            return z_init + predict_offsets(locnet, z_init) if finetune else z_frozen

        for level, r in enumerate(schedule.factors, start=1):
            breakdown = None
            for it in range(cfg.iters_per_simplify):
                snapshot = self._snapshot(simpnet, locnet)
                z = current_points()
                probs = predict_probabilities(simpnet, z.dtype)
                clip = self.augmented_clip_loss(self.render(z, widths, probs), target, augmenter=augmenter, **layers)
                sparse = sparse_loss(probs)
                ratio = ratio_loss(sparse, clip, r)
                try:
                    for name, value in zip(LOSS_NAMES, (clip, sparse, ratio)):
                        require_finite(name, value)
                except LossError as e:
                    self._abort(snapshot, simpnet, locnet, region, layer, level, it, e)

                g_sparse = torch.autograd.grad(sparse, simp_params, retain_graph=True, allow_unused=True)
                g_ratio = torch.autograd.grad(ratio, simp_params, retain_graph=True, allow_unused=True)
                g_clip = torch.autograd.grad(clip, simp_params + loc_params, allow_unused=True)
                losses = [float(clip.detach()), float(sparse.detach()), float(ratio.detach())]
                norms = [grad_norm([g[i] for i in head_index]) for g in (g_clip, g_sparse, g_ratio)]
                weights = balancer.update(losses, norms)

                _combine(weights, [g_clip[:len(simp_params)], g_sparse, g_ratio], simp_params)
                if finetune:
                    _combine([weights[0]], [g_clip[len(simp_params):]], loc_params)
                for opt in optimizers:
                    opt.step()
                    opt.zero_grad()

                _, breakdown = simp_objective(*losses, weights=weights)
                records.append(LossRecord(
                    region=region, layer=layer, level=level, iteration=it,
                    clip=losses[0], sparse=losses[1], ratio=losses[2], total=breakdown.total,
                    w_clip=weights[0], w_sparse=weights[1], w_ratio=weights[2],
                ))
                self.log_progress(region, layer, level, it, breakdown.total)

            with torch.no_grad():
                z = current_points()
                probs = predict_probabilities(simpnet, z.dtype)
            sketches.append(sketch_from_tensors(
                z, widths, probs, regions, cfg.canvas_size,
                fidelity_level=layer, simplicity_level=level, region=region,
            ))
            if breakdown is not None:
                breakdowns.append(breakdown)

        if not finetune:
            locnet.requires_grad_(True)
        if self.store is not None:
            save_checkpoint(self.store.checkpoint_path(region, layer, "simp"), simpnet)
            if finetune:
                save_checkpoint(self.store.checkpoint_path(region, layer, "loc"), locnet)
        return SimplifyResult(sketches=sketches, simpnet=simpnet, breakdowns=breakdowns, records=records)

    @staticmethod
    def _snapshot(simpnet: SimpNet, locnet) -> Dict[str, Dict[str, torch.Tensor]]:
        return {
            "simp": {k: v.clone() for k, v in simpnet.state_dict().items()},
            "loc": {k: v.clone() for k, v in locnet.state_dict().items()},
        }

    def _abort(self, snapshot, simpnet, locnet, region: Region, layer: int, level: int, iteration: int, cause: LossError) -> None:
        checkpoint = None
        if self.store is not None:
            simpnet.load_state_dict(snapshot["simp"])
            locnet.load_state_dict(snapshot["loc"])
            checkpoint = save_checkpoint(self.store.checkpoint_path(region, layer, "simp"), simpnet)
            save_checkpoint(self.store.checkpoint_path(region, layer, "loc"), locnet)
        raise TrainingDivergedError(f"{region.value} L{layer} S{level}: {cause.message}", iteration, checkpoint) from cause
