"""
Metric grids for abstraction matrices.

Fidelity is MS-SSIM between the photo's XDoG edge map and each rendered cell;
recognizability is the zero-shot top-k overlap between photo and cell;
stroke count is the number of strokes at or above the drop threshold.
"""
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import torch

from scenesketch.core.errors import ShapeError
from scenesketch.core.logging import logger
from scenesketch.evaluation.ms_ssim import ms_ssim
from scenesketch.evaluation.recognizability import ZeroShotClassifier, recognizability
from scenesketch.evaluation.xdog import XDoGParams, xdog_edges
from scenesketch.raster.base import Rasterizer
from scenesketch.schemas import MetricReport, MetricRow, Region
from scenesketch.services.matrix_service import AbstractionMatrix, missing_name
from scenesketch.sketch.model import Sketch
from scenesketch.storage.run_store import RunStore, cell_name

Cell = Tuple[int, int]


class EvalService:
    """Evaluates presented matrix cells against their photo."""

    def __init__(
        self,
        rasterizer: Rasterizer,
        classifier: Optional[ZeroShotClassifier] = None,
        drop_threshold: float = 0.1,
        xdog_params: Optional[XDoGParams] = None,
    ):
        self.rasterizer = rasterizer
        self.classifier = classifier
        self.drop_threshold = drop_threshold
        self.xdog_params = xdog_params

    def evaluate_cells(
        self,
        cells: Mapping[Cell, Sketch],
        photo: torch.Tensor,
        layers: Sequence[int],
        levels: Sequence[int],
        image_name: str = "image",
        region: Region = Region.combined,
        missing: Iterable[str] = (),
    ) -> MetricReport:
        """
        Fill the three metric grids for every (layer, level) present in `cells`.

        Raises:
            ShapeError: a cell's canvas differs from the photo resolution
        """
        edges = xdog_edges(photo, self.xdog_params)
        report = MetricReport(missing_cells=sorted(missing))
        for level in levels:
            for layer in layers:
                sketch = cells.get((layer, level))
                if sketch is None:
                    continue
                row = self._evaluate(sketch, photo, edges, layer, level, image_name, region)
                key = cell_name(layer, level)
                report.rows.append(row)
                report.ms_ssim_matrix[key] = row.ms_ssim
                report.stroke_count_matrix[key] = row.stroke_count
                if row.recognizable is not None:
                    report.recognizability_matrix[key] = row.recognizable
        report.partial = bool(report.missing_cells)
        if report.partial:
            logger.warning(f"Partial report: {len(report.missing_cells)} cells missing")
        return report

    def _evaluate(
        self,
        sketch: Sketch,
        photo: torch.Tensor,
        edges: torch.Tensor,
        layer: int,
        level: int,
        image_name: str,
        region: Region,
    ) -> MetricRow:
        pixels = self.rasterizer.render(sketch).pixels
        if tuple(pixels.shape) != tuple(edges.shape):
            raise ShapeError(
                f"cell {cell_name(layer, level)} renders at {tuple(pixels.shape)}, photo edges are {tuple(edges.shape)}"
            )
        recognized = None
        if self.classifier is not None:
            recognized = 1.0 if recognizability(photo, pixels.to(photo.dtype), self.classifier) else 0.0
        return MetricRow(
            image=image_name,
            region=region,
            layer=layer,
            level=level,
            ms_ssim=ms_ssim(edges, pixels),
            recognizable=recognized,
            stroke_count=float(sketch.visible_count(self.drop_threshold)),
        )

    def evaluate_matrix(self, matrix: AbstractionMatrix, photo: torch.Tensor, image_name: str = "image") -> MetricReport:
        """Metrics of the presented combined grid of an in-memory matrix."""
        region = Region.combined if Region.combined in matrix.cells else next(iter(matrix.cells))
        wanted = {missing_name(region, layer, level) for layer in matrix.layers for level in matrix.presented_rows}
        missing = [name for name in matrix.missing_cells if name in wanted]
        return self.evaluate_cells(
            matrix.cells[region], photo, matrix.layers, matrix.presented_rows, image_name, region, missing,
        )

    def evaluate_run(self, store: RunStore, photo: torch.Tensor, image_name: str = "image") -> MetricReport:
        """
        Metrics of the presented combined grid of a run directory.

        Cells the manifest lists as missing make the report partial; any other
        absent cell is an error.

        Raises:
            MissingArtifactError: no manifest, or a cell absent without being listed (names the cell)
        """
        manifest = store.read_manifest()
        region = self._region(store, manifest)
        listed = set(manifest.missing_cells)
        cells: Dict[Cell, Sketch] = {}
        missing: List[str] = []
        for level in manifest.presented_rows:
            for layer in manifest.presented_layers:
                name = missing_name(region, layer, level)
                if name in listed:
                    missing.append(name)
                    continue
                cells[(layer, level)] = store.load_sketch(region, layer, level)
        return self.evaluate_cells(
            cells, photo, manifest.presented_layers, manifest.presented_rows, image_name, region, missing,
        )

    @staticmethod
    def _region(store: RunStore, manifest) -> Region:
        """Combined cells when the run has them (or failed to make them), else the single trained region."""
        regions = {lineage.region for lineage in manifest.lineages}
        if store.existing_cells(Region.combined) or len(regions) != 1:
            return Region.combined
        return regions.pop()


def merge_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Per-cell means over several images; rows are concatenated."""
    merged = MetricReport()
    for name in ("ms_ssim_matrix", "recognizability_matrix", "stroke_count_matrix"):
        values: Dict[str, List[float]] = {}
        for report in reports:
            for key, value in getattr(report, name).items():
                values.setdefault(key, []).append(value)
        setattr(merged, name, {key: sum(v) / len(v) for key, v in values.items()})
    for report in reports:
        merged.rows.extend(report.rows)
    merged.missing_cells = sorted({cell for report in reports for cell in report.missing_cells})
    merged.partial = any(report.partial for report in reports)
    return merged
