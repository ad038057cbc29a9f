"""
Run directory persistence.

Layout:
    manifest.json
    mask.png, fg.png, bg.png
    fg/, bg/, combined/        L{layer}_S{level}.svg + .png + .json (combined/ also gets mask.png)
    losses.csv
    checkpoints/               {region}_L{layer}_loc.pt, {region}_L{layer}_simp.pt
    report.csv, report.json

All writes are deterministic: sorted JSON keys and repr-formatted floats.
"""
import csv
import json
import re
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import torch

from scenesketch.core.errors import MissingArtifactError
from scenesketch.core.logging import logger
from scenesketch.raster.base import Rasterizer
from scenesketch.scene.images import load_mask, save_image, save_mask
from scenesketch.schemas import LossRecord, MetricReport, MetricRow, Region, RunManifest
from scenesketch.sketch.model import Sketch
from scenesketch.sketch.svg import export_svg, import_svg

REGION_DIRS = {Region.foreground: "fg", Region.background: "bg", Region.combined: "combined"}
LOSS_COLUMNS = ["region", "layer", "level", "iteration", "clip", "sparse", "ratio", "total", "w_clip", "w_sparse", "w_ratio"]
REPORT_COLUMNS = ["image", "region", "layer", "level", "ms_ssim", "recognizable", "stroke_count"]
CELL_PATTERN = re.compile(r"L(\d+)_S(\d+)")


def cell_name(layer: int, level: int) -> str:
    return f"L{layer}_S{level}"


def parse_cell_name(name: str) -> Tuple[int, int]:
    """(layer, level) of a name like "L11_S3"."""
    match = CELL_PATTERN.fullmatch(name)
    if match is None:
        raise ValueError(f"not a cell name: {name}")
    return int(match.group(1)), int(match.group(2))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Region):
        return value.value
    return str(value)


class RunStore:
    """Reads and writes the artifacts of one run directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.Lock()

    # paths

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @property
    def losses_path(self) -> Path:
        return self.root / "losses.csv"

    def region_dir(self, region: Region) -> Path:
        return self.root / REGION_DIRS[region]

    def cell_path(self, region: Region, layer: int, level: int, suffix: str = ".svg") -> Path:
        return self.region_dir(region) / f"{cell_name(layer, level)}{suffix}"

    def checkpoint_path(self, region: Region, layer: int, kind: str) -> Path:
        return self.root / "checkpoints" / f"{REGION_DIRS[region]}_L{layer}_{kind}.pt"

    def prepare(self) -> "RunStore":
        for region in REGION_DIRS:
            self.region_dir(region).mkdir(parents=True, exist_ok=True)
        (self.root / "checkpoints").mkdir(parents=True, exist_ok=True)
        return self

    # manifest

    def write_manifest(self, manifest: RunManifest) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        data = json.loads(manifest.model_dump_json())
        self.manifest_path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self.manifest_path

    def read_manifest(self) -> RunManifest:
        if not self.manifest_path.exists():
            raise MissingArtifactError(f"no manifest.json in {self.root}")
        return RunManifest.model_validate_json(self.manifest_path.read_text(encoding="utf-8"))

    # sketches

    def save_sketch(
        self,
        sketch: Sketch,
        region: Region,
        layer: int,
        level: int,
        rasterizer: Rasterizer,
        drop_threshold: float,
    ) -> Path:
        svg_path = self.cell_path(region, layer, level)
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        svg_path.write_text(export_svg(sketch, drop_threshold), encoding="utf-8")
        rasterizer.render(sketch).save_png(svg_path.with_suffix(".png"))
        # full stroke state, probabilities included, for re-export and evaluation
        svg_path.with_suffix(".json").write_text(sketch.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return svg_path

    def load_sketch(self, region: Region, layer: int, level: int) -> Sketch:
        """
        Load a cell, preferring the JSON stroke state over the SVG.

        Raises:
            MissingArtifactError: neither file exists (message names the cell)
        """
        path = self.cell_path(region, layer, level)
        state = path.with_suffix(".json")
        if state.exists():
            return Sketch.model_validate_json(state.read_text(encoding="utf-8"))
        if not path.exists():
            raise MissingArtifactError(f"missing cell {REGION_DIRS[region]}/{cell_name(layer, level)}: {path}")
        sketch = import_svg(path.read_text(encoding="utf-8"))
        return sketch.model_copy(update={"fidelity_level": layer, "simplicity_level": level})

    def existing_cells(self, region: Region) -> List[str]:
        return sorted(p.stem for p in self.region_dir(region).glob("L*_S*.svg"))

    # images

    def save_decomposition(self, mask: torch.Tensor, foreground: torch.Tensor, background: torch.Tensor) -> None:
        save_mask(mask, self.root / "mask.png")
        save_mask(mask, self.region_dir(Region.combined) / "mask.png")
        save_image(foreground, self.root / "fg.png")
        save_image(background, self.root / "bg.png")

    def load_run_mask(self, size: int) -> Optional[torch.Tensor]:
        path = self.root / "mask.png"
        return load_mask(path, size) if path.exists() else None

    # loss log

    def append_losses(self, records: Iterable[LossRecord]) -> int:
        """Append loss rows; the header is written with the first row. Thread-safe."""
        rows = list(records)
        if not rows:
            return 0
        with self._lock:
            new_file = not self.losses_path.exists()
            self.root.mkdir(parents=True, exist_ok=True)
            with open(self.losses_path, "a", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                if new_file:
                    writer.writerow(LOSS_COLUMNS)
                for rec in rows:
                    data = rec.model_dump()
                    writer.writerow([_fmt(data[c]) for c in LOSS_COLUMNS])
        return len(rows)

    def read_losses(self) -> List[LossRecord]:
        if not self.losses_path.exists():
            raise MissingArtifactError(f"no losses.csv in {self.root}")
        with open(self.losses_path, newline="", encoding="utf-8") as fh:
            return [
                LossRecord.model_validate({k: (v if v != "" else None) for k, v in row.items()})
                for row in csv.DictReader(fh)
            ]

    # reports

    def write_report(self, report: MetricReport) -> Dict[str, Path]:
        csv_path = self.root / "report.csv"
        json_path = self.root / "report.json"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for row in report.rows:
                data = row.model_dump()
                writer.writerow([_fmt(data[c]) for c in REPORT_COLUMNS])
        data = json.loads(report.model_dump_json())
        json_path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Wrote report with {len(report.rows)} rows to {csv_path}")
        return {"csv": csv_path, "json": json_path}

    def read_report_rows(self) -> List[MetricRow]:
        path = self.root / "report.csv"
        if not path.exists():
            raise MissingArtifactError(f"no report.csv in {self.root}")
        with open(path, newline="", encoding="utf-8") as fh:
            return [
                MetricRow.model_validate({k: (v if v != "" else None) for k, v in row.items()})
                for row in csv.DictReader(fh)
            ]

    def read_report(self) -> MetricReport:
        path = self.root / "report.json"
        if not path.exists():
            raise MissingArtifactError(f"no report.json in {self.root}")
        return MetricReport.model_validate_json(path.read_text(encoding="utf-8"))
