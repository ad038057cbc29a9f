"""
Integration tests for lineage training, matrix assembly and evaluation on toy backends.
"""
from typing import Dict, List

import pytest
import torch

from scenesketch.core.errors import MissingArtifactError, PartialMatrixError, TrainingDivergedError
from scenesketch.encoders.toy import ToyEncoder
from scenesketch.raster.soft import SoftRasterizer
from scenesketch.scene.inpaint import TeleaInpainter
from scenesketch.scene.saliency import LuminanceSaliency
from scenesketch.schemas import BackendConfig, OutputConfig, Region, RunConfig
from scenesketch.services import EvalService, FidelityService, MatrixService, SimplifyService, lineage_seed
from scenesketch.storage.run_store import RunStore
from scenesketch.sketch.model import sketch_to_tensors
from scenesketch.training.scheduler import build_schedule, default_steps, initial_factor
from tests.conftest import CANVAS, make_sketch, tiny_train_config, visible_counts


class NanEncoder(ToyEncoder):
    """Toy encoder whose activations are all NaN."""

    name = "nan"

    def forward_layers(self, x: torch.Tensor, layers: List[int]) -> Dict[int, torch.Tensor]:
        return {layer: act * float("nan") for layer, act in super().forward_layers(x, layers).items()}


def _flat(sketch) -> List[float]:
    return [c for s in sketch.strokes for p in s.control_points for c in p]


def _service(config: RunConfig, encoder=None, store=None) -> MatrixService:
    return MatrixService(
        config,
        encoder or ToyEncoder(input_size=CANVAS),
        SoftRasterizer(),
        saliency=LuminanceSaliency(),
        inpainter=TeleaInpainter(),
        store=store,
    )


def _config(tmp_path, **train) -> RunConfig:
    return RunConfig(
        train=tiny_train_config(**train),
        backends=BackendConfig.toy(),
        output=OutputConfig(out_dir=tmp_path / "run"),
    )


def _known_scene(rasterizer, seed: int = 0, jitter: float = 0.02):
    """Rendering of a fixed 8-stroke sketch, plus that sketch with jittered control points."""
    truth = make_sketch(8, seed=3, width=4.0)
    target = rasterizer.render(truth).pixels.expand(3, -1, -1).clone()
    gen = torch.Generator().manual_seed(seed)
    points, _, _ = sketch_to_tensors(truth, torch.float64)
    moved = points + jitter * torch.randn(points.shape, generator=gen, dtype=torch.float64)
    strokes = tuple(
        s.model_copy(update={"control_points": tuple(tuple(p) for p in moved[i].tolist())})
        for i, s in enumerate(truth.strokes)
    )
    return target, truth.model_copy(update={"strokes": strokes})


def _lineage(encoder, rasterizer, target, init, cfg, step: float, seed: int = 0):
    fidelity = FidelityService(encoder, rasterizer, cfg).train_fidelity(target, 11, init=init, seed=seed)
    schedule = build_schedule(initial_factor(fidelity.final_loss), step, cfg.simplify_levels)
    result = SimplifyService(encoder, rasterizer, cfg).simplify_sequence(fidelity, target, 11, schedule, seed=seed)
    return fidelity, result


@pytest.mark.integration
class TestFidelityService:
    """Test fidelity sketch training."""

    def test_zero_iterations_returns_init(self, toy_encoder, rasterizer, scene_photo):
        """Test that without iterations the sketch is the initialization."""
        cfg = tiny_train_config(iters_fidelity=0)
        init = make_sketch(4)
        result = FidelityService(toy_encoder, rasterizer, cfg).train_fidelity(scene_photo, 11, init=init)
        assert _flat(result.sketch) == pytest.approx(_flat(init), abs=1e-6)
        assert result.initial_loss == pytest.approx(result.final_loss)
        assert result.records == []

    def test_sketch_metadata(self, toy_encoder, rasterizer, scene_photo):
        """Test level 0, the fidelity layer and full probabilities."""
        result = FidelityService(toy_encoder, rasterizer, tiny_train_config()).train_fidelity(
            scene_photo, 11, Region.foreground, seed=5,
        )
        assert result.sketch.fidelity_level == 11
        assert result.sketch.simplicity_level == 0
        assert result.sketch.region == Region.foreground
        assert len(result.sketch) == 4
        assert all(s.probability == 1.0 for s in result.sketch.strokes)
        assert [r.iteration for r in result.records] == [0, 1, 2]

    def test_deterministic(self, toy_encoder, rasterizer, scene_photo):
        """Test that one seed reproduces the sketch exactly."""
        service = FidelityService(toy_encoder, rasterizer, tiny_train_config())
        a = service.train_fidelity(scene_photo, 11, seed=9)
        b = service.train_fidelity(scene_photo, 11, seed=9)
        assert a.sketch == b.sketch
        assert a.final_loss == b.final_loss

    def test_divergence_checkpointed(self, rasterizer, scene_photo, run_store):
        """Test that a NaN loss raises with a checkpoint of the last finite state."""
        service = FidelityService(NanEncoder(input_size=CANVAS), rasterizer, tiny_train_config(), run_store)
        with pytest.raises(TrainingDivergedError) as exc_info:
            service.train_fidelity(scene_photo, 11)
        assert exc_info.value.iteration == 0
        assert exc_info.value.checkpoint is not None and exc_info.value.checkpoint.exists()
        assert exc_info.value.exit_code == 4


@pytest.mark.integration
class TestSimplifyService:
    """Test the simplification sequence of one lineage."""

    def _run(self, toy_encoder, rasterizer, scene_photo, **train):
        cfg = tiny_train_config(**train)
        fidelity = FidelityService(toy_encoder, rasterizer, cfg).train_fidelity(scene_photo, 11, seed=1)
        schedule = build_schedule(1.0 / fidelity.final_loss, 0.9, cfg.simplify_levels)
        result = SimplifyService(toy_encoder, rasterizer, cfg).simplify_sequence(
            fidelity, scene_photo, 11, schedule, seed=1,
        )
        return fidelity, result

    def test_lineage_consistency(self, toy_encoder, rasterizer, scene_photo):
        """Test one snapshot per level, all sharing the fidelity layer and stroke set."""
        fidelity, result = self._run(toy_encoder, rasterizer, scene_photo, simplify_levels=3)
        assert [s.simplicity_level for s in result.sketches] == [1, 2, 3]
        assert all(s.fidelity_level == 11 for s in result.sketches)
        assert all(len(s) == len(fidelity.sketch) for s in result.sketches)
        assert len(result.breakdowns) == 3

    def test_positions_frozen_without_finetuning(self, toy_encoder, rasterizer, scene_photo):
        """Test that only probabilities change when LocNet is not fine-tuned."""
        fidelity, result = self._run(toy_encoder, rasterizer, scene_photo, finetune_loc_during_simplify=False)
        expected = [s.control_points for s in fidelity.sketch.strokes]
        for sketch in result.sketches:
            assert [s.control_points for s in sketch.strokes] == expected
        assert all(p.requires_grad for p in fidelity.locnet.parameters())

    def test_gradnorm_weights_recorded(self, toy_encoder, rasterizer, scene_photo):
        """Test that every record carries weights summing to three."""
        _, result = self._run(toy_encoder, rasterizer, scene_photo)
        for record in result.records:
            assert record.w_clip + record.w_sparse + record.w_ratio == pytest.approx(3.0)


@pytest.mark.integration
@pytest.mark.slow
class TestToyConvergence:
    """Test training outcomes on a scene whose exact sketch is known."""

    def test_fidelity_recovers_known_sketch(self, toy_encoder, rasterizer):
        """Test that 500 iterations cut the clip loss below a quarter, identically on a rerun."""
        target, init = _known_scene(rasterizer)
        cfg = tiny_train_config(
            n_strokes=8, iters_fidelity=500, hidden_width=32, learning_rate=2e-4,
            perspective_distortion=0.0, crop_scale=(1.0, 1.0), log_every=100,
        )
        service = FidelityService(toy_encoder, rasterizer, cfg)
        first = service.train_fidelity(target, 11, init=init, seed=0)
        second = service.train_fidelity(target, 11, init=init, seed=0)
        assert first.initial_loss > 0
        assert first.final_loss < 0.25 * first.initial_loss
        assert first.sketch == second.sketch
        assert first.final_loss == second.final_loss

    def test_simplification_removes_strokes(self, toy_encoder, rasterizer):
        """Test that visible counts fall over four levels while level 1 keeps almost every stroke."""
        target, init = _known_scene(rasterizer)
        cfg = tiny_train_config(
            n_strokes=8, iters_fidelity=0, iters_per_simplify=150, simplify_levels=4,
            hidden_width=16, learning_rate=1e-2, perspective_distortion=0.0, crop_scale=(1.0, 1.0),
            finetune_loc_during_simplify=False, log_every=100,
        )
        fidelity, result = _lineage(toy_encoder, rasterizer, target, init, cfg, step=2.0)
        counts = visible_counts([fidelity.sketch] + result.sketches)
        assert counts[0] == 8
        assert all(b <= a + 1 for a, b in zip(counts, counts[1:]))
        assert counts[-1] < 8
        assert abs(result.breakdowns[0].sparse_loss - 1.0) <= 0.15

    def test_finetuning_lowers_final_clip_loss(self, toy_encoder, rasterizer):
        """Test that freezing LocNet during simplification ends with a higher clip loss on average."""
        finals = {True: [], False: []}
        for seed in range(5):
            target, init = _known_scene(rasterizer, seed=seed)
            for finetune in (True, False):
                cfg = tiny_train_config(
                    n_strokes=8, iters_fidelity=0, iters_per_simplify=60, simplify_levels=4,
                    hidden_width=16, learning_rate=1e-3, perspective_distortion=0.0, crop_scale=(1.0, 1.0),
                    finetune_loc_during_simplify=finetune, log_every=100,
                )
                _, result = _lineage(
                    toy_encoder, rasterizer, target, init, cfg,
                    step=default_steps(Region.background, 11), seed=seed,
                )
                service = FidelityService(toy_encoder, rasterizer, cfg)
                image = rasterizer.render(result.sketches[-1]).pixels
                finals[finetune].append(service.plain_clip_loss(image, target, 11, None))
        assert sum(finals[False]) / 5 >= sum(finals[True]) / 5


@pytest.mark.integration
class TestMatrixService:
    """Test full matrix assembly."""

    def test_layout(self, tmp_path, scene_photo, scene_mask):
        """Test regions, cells, grid shape and persisted files."""
        store = RunStore(tmp_path / "run")
        matrix = _service(_config(tmp_path), store=store).build_matrix(scene_photo, scene_mask)
        assert set(matrix.cells) == {Region.foreground, Region.background, Region.combined}
        for region in matrix.cells:
            assert sorted(matrix.cells[region]) == [(11, 0), (11, 1), (11, 2)]
        combined = matrix.cell(Region.combined, 11, 2)
        assert len(combined) == len(matrix.cell(Region.foreground, 11, 2)) + len(matrix.cell(Region.background, 11, 2))
        grid = matrix.grid()
        assert matrix.presented_rows == [0, 2]
        assert len(grid) == 2 and all(len(row) == 1 for row in grid)
        assert store.existing_cells(Region.combined) == ["L11_S0", "L11_S1", "L11_S2"]
        manifest = store.read_manifest()
        assert [l.status for l in manifest.lineages] == ["complete", "complete"]
        assert manifest.fg_transform is not None and manifest.single_object
        assert (store.root / "checkpoints" / "fg_L11_simp.pt").exists()
        assert len(store.read_losses()) == 2 * (3 + 2 * 2)

    def test_lineage_seeds(self, tmp_path, scene_photo, scene_mask):
        """Test that manifest seeds are derived from the master seed."""
        matrix = _service(_config(tmp_path, seed=4)).build_matrix(scene_photo, scene_mask)
        seeds = {(l.region, l.layer): l.seed for l in matrix.manifest.lineages}
        assert seeds[(Region.foreground, 11)] == lineage_seed(4, Region.foreground, 11)
        assert seeds[(Region.foreground, 11)] != seeds[(Region.background, 11)]

    def test_jobs_do_not_change_results(self, tmp_path, scene_photo, scene_mask):
        """Test that parallel lineages give the same sketches as sequential ones."""
        config = _config(tmp_path)
        parallel = config.model_copy(update={"output": config.output.model_copy(update={"jobs": 2})})
        a = _service(config).build_matrix(scene_photo, scene_mask)
        b = _service(parallel).build_matrix(scene_photo, scene_mask)
        for cell, sketch in a.cells[Region.combined].items():
            other = b.cells[Region.combined][cell]
            assert _flat(sketch) == pytest.approx(_flat(other), abs=1e-5)
            assert sketch.probabilities == pytest.approx(other.probabilities, abs=1e-5)

    def test_empty_mask_background_only(self, tmp_path, scene_photo):
        """Test that an empty mask trains background lineages only."""
        matrix = _service(_config(tmp_path)).build_matrix(scene_photo, torch.zeros(CANVAS, CANVAS))
        assert set(matrix.cells) == {Region.background, Region.combined}
        assert matrix.cell(Region.combined, 11, 1).region == Region.combined
        assert len(matrix.cell(Region.combined, 11, 1)) == len(matrix.cell(Region.background, 11, 1))

    def test_partial_matrix(self, tmp_path, scene_photo, scene_mask):
        """Test that failed lineages raise after persisting the manifest."""
        store = RunStore(tmp_path / "run")
        service = _service(_config(tmp_path), encoder=NanEncoder(input_size=CANVAS), store=store)
        with pytest.raises(PartialMatrixError) as exc_info:
            service.build_matrix(scene_photo, scene_mask)
        assert "fg/L11_S0" in exc_info.value.missing
        assert exc_info.value.exit_code == 5
        manifest = store.read_manifest()
        assert {l.status for l in manifest.lineages} == {"failed"}
        assert "combined/L11_S2" in manifest.missing_cells

    def test_keep_partial(self, tmp_path, scene_photo, scene_mask):
        """Test that keep_partial returns the incomplete matrix."""
        config = _config(tmp_path)
        config = config.model_copy(update={"output": config.output.model_copy(update={"keep_partial": True})})
        matrix = _service(config, encoder=NanEncoder(input_size=CANVAS)).build_matrix(scene_photo, scene_mask)
        assert matrix.cells[Region.combined] == {}
        assert len(matrix.missing_cells) == 3 * 3
        with pytest.raises(MissingArtifactError):
            matrix.cell(Region.background, 11, 0)

    def test_single_lineage(self, tmp_path, scene_photo, scene_mask):
        """Test that build_single trains one region and no combined matrix."""
        matrix = _service(_config(tmp_path)).build_single(scene_photo, 11, Region.background, scene_mask)
        assert set(matrix.cells) == {Region.background}
        assert len(matrix.manifest.lineages) == 1


@pytest.mark.integration
class TestEvalService:
    """Test metric grids."""

    def test_matrix_metrics(self, tmp_path, scene_photo, scene_mask, rasterizer):
        """Test one row per presented cell with values in range."""
        matrix = _service(_config(tmp_path)).build_matrix(scene_photo, scene_mask)
        report = EvalService(rasterizer).evaluate_matrix(matrix, scene_photo, "scene")
        assert sorted(report.ms_ssim_matrix) == ["L11_S0", "L11_S2"]
        assert len(report.rows) == 2
        for row in report.rows:
            assert 0.0 <= row.ms_ssim <= 1.0
            assert row.recognizable is None
            assert row.stroke_count <= 8
        assert not report.partial

    def test_run_matches_matrix(self, tmp_path, scene_photo, scene_mask, rasterizer):
        """Test that evaluating the run directory equals evaluating the in-memory matrix."""
        store = RunStore(tmp_path / "run")
        matrix = _service(_config(tmp_path), store=store).build_matrix(scene_photo, scene_mask)
        service = EvalService(rasterizer)
        from_run = service.evaluate_run(store, scene_photo, "scene")
        assert from_run.stroke_count_matrix == service.evaluate_matrix(matrix, scene_photo, "scene").stroke_count_matrix

    def test_partial_run(self, tmp_path, scene_photo, scene_mask, rasterizer):
        """Test that listed missing cells give a partial report."""
        store = RunStore(tmp_path / "run")
        config = _config(tmp_path)
        config = config.model_copy(update={"output": config.output.model_copy(update={"keep_partial": True})})
        _service(config, encoder=NanEncoder(input_size=CANVAS), store=store).build_matrix(scene_photo, scene_mask)
        report = EvalService(rasterizer).evaluate_run(store, scene_photo)
        assert report.partial
        assert report.rows == []
        assert "combined/L11_S0" in report.missing_cells

    def test_unlisted_missing_cell(self, tmp_path, scene_photo, scene_mask, rasterizer):
        """Test that a deleted cell not in the manifest is an error naming it."""
        store = RunStore(tmp_path / "run")
        _service(_config(tmp_path), store=store).build_matrix(scene_photo, scene_mask)
        for suffix in (".svg", ".json"):
            store.cell_path(Region.combined, 11, 2, suffix).unlink()
        with pytest.raises(MissingArtifactError) as exc_info:
            EvalService(rasterizer).evaluate_run(store, scene_photo)
        assert "combined/L11_S2" in exc_info.value.message
