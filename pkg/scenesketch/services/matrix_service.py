"""
Abstraction matrix assembly.

One lineage per (region, fidelity layer): the fidelity sketch S_k is level 0,
its simplifications S_k^1..S_k^m are levels 1..m. Foreground sketches are
mapped back to photo coordinates and aggregated with the background cell of
the same (layer, level) into the combined matrix.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from scenesketch import __version__
from scenesketch.core.errors import MissingArtifactError, PartialMatrixError, ShapeError
from scenesketch.core.logging import logger
from scenesketch.encoders.base import Encoder
from scenesketch.raster.base import Rasterizer
from scenesketch.scene.decompose import SceneDecomposition, decompose, rescale_object
from scenesketch.scene.inpaint import Inpainter
from scenesketch.scene.saliency import Saliency
from scenesketch.schemas import LineageRecord, Region, RunConfig, RunManifest, SimplificationSchedule
from scenesketch.services.fidelity_service import FidelityResult, FidelityService
from scenesketch.services.simplify_service import SimplifyService
from scenesketch.sketch.model import Sketch, apply_transform, combine_sketches
from scenesketch.storage.run_store import REGION_DIRS, RunStore, cell_name
from scenesketch.training.scheduler import build_schedule, default_steps, initial_factor
from scenesketch.workers.cell_runner import CellRunner, JobOutcome

Cell = Tuple[int, int]
LineageKey = Tuple[Region, int]
_REGION_INDEX = {Region.foreground: 0, Region.background: 1}


def lineage_seed(master_seed: int, region: Region, layer: int) -> int:
    """Seed of one lineage, derived from the master seed independently of job order."""
    state = np.random.SeedSequence([master_seed, _REGION_INDEX[region], layer]).generate_state(1)
    return int(state[0])


def missing_name(region: Region, layer: int, level: int) -> str:
    return f"{REGION_DIRS[region]}/{cell_name(layer, level)}"


@dataclass
class AbstractionMatrix:
    """
    Sketch grids per region, indexed by (layer, level).

    Levels 0..levels are all kept; presented_rows selects the levels shown in
    the presented grid.
    """
    layers: List[int]
    levels: int
    presented_rows: List[int]
    cells: Dict[Region, Dict[Cell, Sketch]] = field(default_factory=dict)
    manifest: Optional[RunManifest] = None

    def cell(self, region: Region, layer: int, level: int) -> Sketch:
        try:
            return self.cells[region][(layer, level)]
        except KeyError:
            raise MissingArtifactError(f"missing cell {missing_name(region, layer, level)}")

    def grid(self, region: Region = Region.combined) -> List[List[Optional[Sketch]]]:
        """Presented grid: rows are simplicity levels, columns are fidelity layers."""
        cells = self.cells.get(region, {})
        return [[cells.get((layer, level)) for layer in self.layers] for level in self.presented_rows]

    @property
    def missing_cells(self) -> List[str]:
        return list(self.manifest.missing_cells) if self.manifest is not None else []


class MatrixService:
    """Runs every lineage of a photo and persists the resulting matrices."""

    def __init__(
        self,
        config: RunConfig,
        encoder: Encoder,
        rasterizer: Rasterizer,
        saliency: Optional[Saliency] = None,
        inpainter: Optional[Inpainter] = None,
        store: Optional[RunStore] = None,
        runner: Optional[CellRunner] = None,
    ):
        self.config = config
        self.encoder = encoder
        self.rasterizer = rasterizer
        self.saliency = saliency
        self.inpainter = inpainter
        self.store = store
        self.runner = runner or CellRunner(config.output.jobs)
        self.fidelity = FidelityService(encoder, rasterizer, config.train, store)
        self.simplifier = SimplifyService(encoder, rasterizer, config.train, store)

    def decompose_photo(self, photo: torch.Tensor, mask: Optional[torch.Tensor] = None) -> SceneDecomposition:
        size = self.config.train.canvas_size
        if tuple(photo.shape[-2:]) != (size, size):
            raise ShapeError(f"photo {tuple(photo.shape[-2:])} does not match canvas size {size}")
        decomp = rescale_object(decompose(photo, self.saliency, self.inpainter, mask=mask))
        if self.store is not None:
            self.store.save_decomposition(decomp.mask, decomp.foreground_img, decomp.background_img)
        return decomp

    def build_single(
        self,
        photo: torch.Tensor,
        layer: int,
        region: Region = Region.background,
        mask: Optional[torch.Tensor] = None,
    ) -> AbstractionMatrix:
        """One (region, layer) lineage; the combined matrix is left empty."""
        return self.build_matrix(photo, mask=mask, layers=[layer], regions=[region])

    def build_matrix(
        self,
        photo: torch.Tensor,
        mask: Optional[torch.Tensor] = None,
        layers: Optional[Sequence[int]] = None,
        regions: Optional[Sequence[Region]] = None,
    ) -> AbstractionMatrix:
        """
        Decompose the photo, train every lineage and assemble the matrices.

        Args:
            photo: (3, S, S) photo at canvas size S
            mask: optional object mask, bypasses the saliency backend
            layers: fidelity layers, defaults to the configured ones
            regions: regions to sketch; None means both plus the combined matrix

        Returns:
            AbstractionMatrix with fg, bg and combined cells

        Raises:
            ConfigurationError: a layer without a step size (before any training)
            PartialMatrixError: some cells failed and output.keep_partial is off;
                artifacts and the manifest are written first
        """
        cfg = self.config.train
        layers = list(layers or cfg.fidelity_layers)
        decomp = self.decompose_photo(photo, mask)
        combine = regions is None
        if regions is None:
            regions = [Region.background] if decomp.is_empty else [Region.foreground, Region.background]
        targets = {Region.foreground: decomp.foreground_img, Region.background: decomp.background_img}
        keys: List[LineageKey] = [(region, layer) for region in regions for layer in layers]

        steps = {
            key: default_steps(key[0], key[1], cfg.step_overrides, cfg.shared_simplify_step)
            for key in keys
        }
        seeds = {key: lineage_seed(cfg.seed, *key) for key in keys}
        logger.info(f"Building matrix: regions {[r.value for r in regions]}, layers {layers}, {cfg.simplify_levels} levels")

        fidelity = self.runner.run_sync({
            key: self._fidelity_job(targets[key[0]], key, seeds[key]) for key in keys
        })
        schedules = self._schedules(keys, fidelity, steps)
        simplified = self.runner.run_sync({
            key: self._simplify_job(fidelity[key].result, targets[key[0]], key, schedules[key], seeds[key])
            for key in keys if key in schedules
        })

        matrix = AbstractionMatrix(layers=layers, levels=cfg.simplify_levels, presented_rows=list(cfg.matrix_rows))
        missing: List[str] = []
        for region in regions:
            matrix.cells[region] = {}
            for layer in layers:
                cells, lost = self._lineage_cells(region, layer, fidelity[(region, layer)], simplified.get((region, layer)))
                if region == Region.foreground and not decomp.fg_transform.is_identity:
                    inverse = decomp.fg_transform.inverse()
                    cells = {c: apply_transform(s, inverse) for c, s in cells.items()}
                matrix.cells[region].update(cells)
                missing.extend(lost)
        if combine:
            matrix.cells[Region.combined] = self._combine(matrix, regions)
            missing.extend(
                missing_name(Region.combined, layer, level)
                for layer in layers for level in range(cfg.simplify_levels + 1)
                if (layer, level) not in matrix.cells[Region.combined]
            )

        manifest = self._manifest(keys, seeds, fidelity, simplified, schedules, decomp, layers, missing)
        matrix.manifest = manifest
        if self.store is not None:
            self._persist(matrix, keys, fidelity, simplified)
            self.store.write_manifest(manifest)
        if missing:
            logger.warning(f"{len(missing)} matrix cells are missing")
            if not self.config.output.keep_partial:
                raise PartialMatrixError(f"{len(missing)} cells failed, first {missing[0]}", missing)
        return matrix

    def _fidelity_job(self, target: torch.Tensor, key: LineageKey, seed: int):
        region, layer = key
        return lambda: self.fidelity.train_fidelity(target, layer, region, seed)

    def _simplify_job(self, fid: FidelityResult, target: torch.Tensor, key: LineageKey, schedule: SimplificationSchedule, seed: int):
        region, layer = key
        return lambda: self.simplifier.simplify_sequence(fid, target, layer, schedule, region, seed)

    def _schedules(
        self,
        keys: List[LineageKey],
        fidelity: Dict[LineageKey, JobOutcome],
        steps: Dict[LineageKey, float],
    ) -> Dict[LineageKey, SimplificationSchedule]:
        """Per-lineage schedules; with shared_factors every layer of a region reuses its first r1."""
        cfg = self.config.train
        shared_r1: Dict[Region, float] = {}
        schedules = {}
        for key in keys:
            outcome = fidelity[key]
            if not outcome.ok:
                continue
            r1 = initial_factor(outcome.result.final_loss)
            if cfg.shared_factors:
                r1 = shared_r1.setdefault(key[0], r1)
            schedules[key] = build_schedule(r1, steps[key], cfg.simplify_levels)
        return schedules

    def _lineage_cells(
        self,
        region: Region,
        layer: int,
        fid: JobOutcome,
        simp: Optional[JobOutcome],
    ) -> Tuple[Dict[Cell, Sketch], List[str]]:
        m = self.config.train.simplify_levels
        if not fid.ok:
            return {}, [missing_name(region, layer, level) for level in range(m + 1)]
        cells: Dict[Cell, Sketch] = {(layer, 0): fid.result.sketch}
        if simp is None or not simp.ok:
            return cells, [missing_name(region, layer, level) for level in range(1, m + 1)]
        for level, sketch in enumerate(simp.result.sketches, start=1):
            cells[(layer, level)] = sketch
        return cells, []

    def _combine(self, matrix: AbstractionMatrix, regions: Sequence[Region]) -> Dict[Cell, Sketch]:
        background = matrix.cells.get(Region.background, {})
        foreground = matrix.cells.get(Region.foreground, {})
        combined: Dict[Cell, Sketch] = {}
        for cell, bg in background.items():
            if Region.foreground not in regions:
                combined[cell] = bg.model_copy(update={"region": Region.combined})
            elif cell in foreground:
                combined[cell] = combine_sketches(foreground[cell], bg)
        return combined

    def _persist(
        self,
        matrix: AbstractionMatrix,
        keys: List[LineageKey],
        fidelity: Dict[LineageKey, JobOutcome],
        simplified: Dict[LineageKey, JobOutcome],
    ) -> None:
        store = self.store.prepare()
        threshold = self.config.train.drop_threshold
        store.losses_path.unlink(missing_ok=True)
        for region, cells in matrix.cells.items():
            for (layer, level), sketch in sorted(cells.items()):
                store.save_sketch(sketch, region, layer, level, self.rasterizer, threshold)
        for key in keys:
            fid = fidelity[key]
            if fid.ok:
                store.append_losses(fid.result.records)
            simp = simplified.get(key)
            if simp is not None and simp.ok:
                store.append_losses(simp.result.records)
        logger.info(f"Saved matrix artifacts to {store.root}")

    def _manifest(
        self,
        keys: List[LineageKey],
        seeds: Dict[LineageKey, int],
        fidelity: Dict[LineageKey, JobOutcome],
        simplified: Dict[LineageKey, JobOutcome],
        schedules: Dict[LineageKey, SimplificationSchedule],
        decomp: SceneDecomposition,
        layers: List[int],
        missing: List[str],
    ) -> RunManifest:
        lineages = []
        for key in keys:
            fid, simp = fidelity[key], simplified.get(key)
            failure = fid.error if not fid.ok else (simp.error if simp is not None and not simp.ok else None)
            lineages.append(LineageRecord(
                region=key[0],
                layer=key[1],
                seed=seeds[key],
                schedule=schedules.get(key),
                initial_clip_loss=fid.result.initial_loss if fid.ok else None,
                final_clip_loss=fid.result.final_loss if fid.ok else None,
                status="failed" if failure is not None else "complete",
                error=str(failure) if failure is not None else None,
            ))
        xf = decomp.fg_transform
        return RunManifest(
            package_version=__version__,
            config=self.config,
            master_seed=self.config.train.seed,
            backends={
                "encoder": self.encoder.cache_id,
                "raster": self.rasterizer.name,
                "saliency": type(self.saliency).__name__ if self.saliency is not None else "mask",
                "inpaint": type(self.inpainter).__name__ if self.inpainter is not None else "none",
            },
            single_object=decomp.single_object,
            fg_transform=None if xf.is_identity else {
                "scale": xf.scale, "tx": xf.translation[0], "ty": xf.translation[1],
            },
            lineages=lineages,
            presented_rows=list(self.config.train.matrix_rows),
            presented_layers=layers,
            missing_cells=missing,
        )
