"""
Command-line entry point.

Commands: decompose, sketch, matrix, eval, report, export. Library errors are
mapped to process exit codes (2 configuration/input, 3 missing artifacts,
4 training failure, 5 partial matrix).
"""
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click

from scenesketch import __version__
from scenesketch.core.config import load_run_config, settings
from scenesketch.core.errors import SceneSketchError
from scenesketch.core.logging import logger
from scenesketch.encoders import get_encoder
from scenesketch.evaluation.recognizability import ZeroShotClassifier
from scenesketch.raster import get_rasterizer
from scenesketch.scene.decompose import decompose as scene_decompose, rescale_object
from scenesketch.scene.images import load_mask, load_photo
from scenesketch.scene.inpaint import get_inpainter
from scenesketch.scene.saliency import get_saliency
from scenesketch.schemas import BackendConfig, Region, RunConfig
from scenesketch.services.eval_service import EvalService, merge_reports
from scenesketch.services.matrix_service import MatrixService
from scenesketch.sketch.model import combine_sketches, resize_canvas
from scenesketch.sketch.svg import export_svg
from scenesketch.storage.run_store import REGION_DIRS, RunStore, parse_cell_name
from scenesketch.workers.cell_runner import CellRunner


def handle_errors(func: Callable) -> Callable:
    """Turn SceneSketchError into a message on stderr and its exit code."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SceneSketchError as e:
            logger.error(f"{type(e).__name__}: {e.message}")
            click.echo(f"Error: {e.message}", err=True)
            sys.exit(e.exit_code)
    return wrapper


def _parse_layers(ctx, param, value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated layer indices, got '{value}'")


def config_options(func: Callable) -> Callable:
    """Options shared by every command that builds a RunConfig."""
    options = [
        click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="TOML run config"),
        click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Run directory"),
        click.option("--mask", "mask_path", type=click.Path(path_type=Path), default=None, help="Object mask PNG"),
        click.option("--toy-backends", is_flag=True, help="Toy encoder, luminance saliency, Telea inpainting"),
        click.option("--canvas-size", type=int, default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def train_options(func: Callable) -> Callable:
    options = [
        click.option("--layers", callback=_parse_layers, default=None, help="Fidelity layers, e.g. 2,7,8,11"),
        click.option("--levels", type=int, default=None, help="Simplification levels m"),
        click.option("--seed", type=int, default=None),
        click.option("--strokes", type=int, default=None),
        click.option("--iters", type=int, default=None, help="Fidelity iterations"),
        click.option("--simplify-iters", type=int, default=None, help="Iterations per simplification level"),
        click.option("--hidden-width", type=int, default=None),
        click.option("--keep-partial", is_flag=True, default=None, help="Exit 0 when some cells failed"),
        click.option("--jobs", type=int, default=None, help="Parallel lineages"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(
    config_path: Optional[Path] = None,
    out_dir: Optional[Path] = None,
    mask_path: Optional[Path] = None,
    toy_backends: bool = False,
    canvas_size: Optional[int] = None,
    layers: Optional[List[int]] = None,
    levels: Optional[int] = None,
    seed: Optional[int] = None,
    strokes: Optional[int] = None,
    iters: Optional[int] = None,
    simplify_iters: Optional[int] = None,
    hidden_width: Optional[int] = None,
    keep_partial: Optional[bool] = None,
    jobs: Optional[int] = None,
) -> RunConfig:
    """CLI flags on top of the config file on top of the defaults."""
    overrides: Dict[str, Dict[str, Any]] = {
        "train": {
            "fidelity_layers": layers,
            "simplify_levels": levels,
            "seed": seed,
            "n_strokes": strokes,
            "iters_fidelity": iters,
            "iters_per_simplify": simplify_iters,
            "canvas_size": canvas_size,
            "hidden_width": hidden_width,
        },
        "output": {
            "out_dir": out_dir,
            "mask_path": mask_path,
            "keep_partial": keep_partial or None,
            "jobs": jobs,
        },
    }
    if toy_backends:
        overrides["backends"] = BackendConfig.toy().model_dump(exclude_none=True)
    return load_run_config(config_path, overrides)


def build_service(config: RunConfig) -> MatrixService:
    backends = config.backends
    encoder = get_encoder(backends.encoder, backends.clip_weights, settings.DEVICE, config.encoder.input_size)
    return MatrixService(
        config,
        encoder,
        get_rasterizer(backends.raster, backends.softness),
        saliency=get_saliency(backends.saliency, backends.u2net_weights),
        inpainter=get_inpainter(backends.inpaint, backends.lama_weights),
        store=RunStore(config.output.out_dir),
        runner=CellRunner(config.output.jobs),
    )


def _inputs(photo_path: Path, config: RunConfig):
    size = config.train.canvas_size
    photo = load_photo(photo_path, size)
    mask = load_mask(config.output.mask_path, size) if config.output.mask_path is not None else None
    return photo, mask


@click.group()
@click.version_option(__version__, prog_name="scenesketch")
def main():
    """Vector scene sketches across fidelity and simplicity levels."""


@main.command()
@click.argument("photo", type=click.Path(path_type=Path))
@config_options
@handle_errors
def decompose(photo: Path, config_path, out_dir, mask_path, toy_backends, canvas_size):
    """Write mask.png, fg.png and bg.png for PHOTO."""
    config = build_config(config_path, out_dir, mask_path, toy_backends, canvas_size)
    backends = config.backends
    image, mask = _inputs(photo, config)
    decomp = scene_decompose(
        image,
        get_saliency(backends.saliency, backends.u2net_weights),
        get_inpainter(backends.inpaint, backends.lama_weights),
        mask=mask,
    )
    decomp = rescale_object(decomp)
    RunStore(config.output.out_dir).save_decomposition(decomp.mask, decomp.foreground_img, decomp.background_img)
    click.echo(f"Decomposition written to {config.output.out_dir} (single object: {decomp.single_object})")


@main.command()
@click.argument("photo", type=click.Path(path_type=Path))
@click.option("--layer", type=int, default=11, show_default=True)
@click.option("--region", type=click.Choice([Region.foreground.value, Region.background.value]), default=Region.background.value, show_default=True)
@config_options
@train_options
@handle_errors
def sketch(photo: Path, layer: int, region: str, config_path, out_dir, mask_path, toy_backends, canvas_size, **train):
    """Train one (region, layer) lineage of PHOTO."""
    train.pop("layers", None)
    config = build_config(config_path, out_dir, mask_path, toy_backends, canvas_size, layers=[layer], **train)
    service = build_service(config)
    image, mask = _inputs(photo, config)
    matrix = service.build_single(image, layer, Region(region), mask)
    cells = matrix.cells[Region(region)]
    click.echo(f"Wrote {len(cells)} {region} sketches to {config.output.out_dir}")


@main.command()
@click.argument("photo", type=click.Path(path_type=Path))
@config_options
@train_options
@handle_errors
def matrix(photo: Path, config_path, out_dir, mask_path, toy_backends, canvas_size, **train):
    """Build the full abstraction matrix of PHOTO."""
    config = build_config(config_path, out_dir, mask_path, toy_backends, canvas_size, **train)
    service = build_service(config)
    image, mask = _inputs(photo, config)
    result = service.build_matrix(image, mask)
    rows, cols = len(result.presented_rows), len(result.layers)
    click.echo(f"Built {rows}x{cols} matrix in {config.output.out_dir}")
    if result.missing_cells:
        click.echo(f"Missing cells: {', '.join(result.missing_cells)}", err=True)


@main.command(name="eval")
@click.argument("run_dir", type=click.Path(path_type=Path))
@click.argument("photo", type=click.Path(path_type=Path))
@click.option("--no-recognizability", is_flag=True, help="Skip the CLIP-dependent metric")
@click.option("--classes", "classes_path", type=click.Path(path_type=Path), default=None)
@click.option("--templates", "templates_path", type=click.Path(path_type=Path), default=None)
@click.option("--image-name", default=None, help="Name used in report rows (defaults to the photo stem)")
@handle_errors
def evaluate(run_dir: Path, photo: Path, no_recognizability, classes_path, templates_path, image_name):
    """Compute the metric grids of a run directory."""
    store = RunStore(run_dir)
    config = store.read_manifest().config
    classifier = None
    if not no_recognizability:
        backends = config.backends
        encoder = get_encoder(backends.eval_encoder, backends.clip_weights, settings.DEVICE, config.encoder.input_size)
        classifier = ZeroShotClassifier.from_files(encoder, classes_path, templates_path)
    service = EvalService(
        get_rasterizer(config.backends.raster, config.backends.softness),
        classifier=classifier,
        drop_threshold=config.train.drop_threshold,
    )
    image = load_photo(photo, config.train.canvas_size)
    report = service.evaluate_run(store, image, image_name or photo.stem)
    paths = store.write_report(report)
    click.echo(f"Wrote {len(report.rows)} rows to {paths['csv']}")
    if report.partial:
        click.echo(f"Partial report, missing: {', '.join(report.missing_cells)}", err=True)


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@handle_errors
def report(run_dirs: Tuple[Path, ...], out_dir: Path):
    """Merge the reports of several evaluated runs into mean grids."""
    merged = merge_reports([RunStore(d).read_report() for d in run_dirs])
    paths = RunStore(out_dir).write_report(merged)
    click.echo(f"Merged {len(run_dirs)} reports into {paths['json']}")


@main.command()
@click.argument("run_dir", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Defaults to RUN_DIR/export")
@click.option("--size", type=int, default=None, help="Output canvas size in pixels")
@click.option("--threshold", type=float, default=None, help="Drop threshold for invisible strokes")
@click.option("--fg-level", type=int, default=None, help="Recombine this foreground level ...")
@click.option("--bg-level", type=int, default=None, help="... with this background level")
@handle_errors
def export(run_dir: Path, out_dir: Optional[Path], size, threshold, fg_level, bg_level):
    """Re-export every cell of a run at a new resolution and threshold."""
    if (fg_level is None) != (bg_level is None):
        raise click.UsageError("--fg-level and --bg-level must be given together")
    store = RunStore(run_dir)
    config = store.read_manifest().config
    threshold = config.train.drop_threshold if threshold is None else threshold
    target = RunStore(out_dir or run_dir / "export")
    rasterizer = get_rasterizer(config.backends.raster, config.backends.softness)

    def load(region: Region, layer: int, level: int):
        cell = store.load_sketch(region, layer, level)
        return resize_canvas(cell, size) if size else cell

    count = 0
    for region in REGION_DIRS:
        for name in store.existing_cells(region):
            layer, level = parse_cell_name(name)
            target.save_sketch(load(region, layer, level), region, layer, level, rasterizer, threshold)
            count += 1

    if fg_level is not None:
        layers = sorted({parse_cell_name(n)[0] for n in store.existing_cells(Region.foreground)})
        folder = target.root / "recombined"
        folder.mkdir(parents=True, exist_ok=True)
        for layer in layers:
            combined = combine_sketches(load(Region.foreground, layer, fg_level), load(Region.background, layer, bg_level))
            path = folder / f"L{layer}_F{fg_level}_B{bg_level}.svg"
            path.write_text(export_svg(combined, threshold), encoding="utf-8")
            rasterizer.render(combined).save_png(path.with_suffix(".png"))
            count += 1
    click.echo(f"Exported {count} sketches to {target.root}")


if __name__ == "__main__":
    main()
