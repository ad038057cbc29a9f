"""
Unit tests for run-config loading and environment settings.
"""
import pytest

from scenesketch.core.config import Settings, load_run_config
from scenesketch.core.errors import ConfigurationError
from scenesketch.schemas import EncoderBackend, RunConfig, TrainConfig


def _write(tmp_path, text: str):
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.unit
class TestLoadRunConfig:
    """Test TOML loading, overrides and validation."""

    def test_defaults(self):
        """Test that no file and no overrides give the model defaults."""
        config = load_run_config()
        assert config == RunConfig()
        assert config.train.fidelity_layers == [2, 7, 8, 11]
        assert config.train.n_strokes == 64

    def test_toml_values(self, tmp_path):
        """Test that file values reach the config."""
        path = _write(tmp_path, "[train]\nn_strokes = 12\nseed = 3\n\n[backends]\nencoder = \"toy\"\n")
        config = load_run_config(path)
        assert config.train.n_strokes == 12
        assert config.train.seed == 3
        assert config.backends.encoder == EncoderBackend.toy

    def test_overrides_beat_file(self, tmp_path):
        """Test CLI flags > run file > defaults; None overrides are ignored."""
        path = _write(tmp_path, "[train]\nn_strokes = 12\nseed = 3\n")
        config = load_run_config(path, {"train": {"n_strokes": 20, "seed": None}})
        assert config.train.n_strokes == 20
        assert config.train.seed == 3

    def test_unknown_key(self, tmp_path):
        """Test that an unknown key is rejected and named."""
        path = _write(tmp_path, "[train]\nstrokes_total = 12\n")
        with pytest.raises(ConfigurationError) as exc_info:
            load_run_config(path)
        assert any(key.startswith("train.strokes_total") for key in exc_info.value.keys)
        assert exc_info.value.exit_code == 2

    def test_bad_layer(self):
        """Test that a layer above the encoder depth is rejected."""
        with pytest.raises(ConfigurationError):
            load_run_config(overrides={"train": {"fidelity_layers": [12]}})

    def test_missing_file(self, tmp_path):
        """Test that a missing run file is a configuration error."""
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        """Test that malformed TOML is a configuration error."""
        with pytest.raises(ConfigurationError):
            load_run_config(_write(tmp_path, "[train\n"))

    def test_encoder_mirrors_train(self):
        """Test that the encoder spec follows the train layers and backend."""
        config = load_run_config(overrides={
            "train": {"fidelity_layers": [3, 9], "use_geometry_layer": False},
            "backends": {"encoder": "toy"},
        })
        assert config.encoder.layers_fidelity == [3, 9]
        assert config.encoder.layer_geometry is None
        assert config.encoder.backend == EncoderBackend.toy

    def test_encoder_weights_set_under_backends(self):
        """Test that CLIP weights are only configurable in the backends section."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_run_config(overrides={"encoder": {"weights_path": "w.pt"}})
        assert any(key.startswith("encoder.weights_path") for key in exc_info.value.keys)
        config = load_run_config(overrides={"backends": {"clip_weights": "w.pt"}})
        assert str(config.backends.clip_weights) == "w.pt"


@pytest.mark.unit
class TestTrainConfig:
    """Test derived train settings."""

    @pytest.mark.parametrize("levels, rows", [(1, [0]), (3, [0, 2]), (8, [0, 2, 4, 7])])
    def test_default_rows(self, levels, rows):
        """Test that presented rows are the defaults that exist."""
        assert TrainConfig(simplify_levels=levels).matrix_rows == rows

    def test_explicit_rows_checked(self):
        """Test that rows beyond the level count are rejected."""
        with pytest.raises(ValueError):
            TrainConfig(simplify_levels=2, matrix_rows=[0, 3])

    def test_duplicate_layers(self):
        """Test that repeated layers are rejected."""
        with pytest.raises(ValueError):
            TrainConfig(fidelity_layers=[2, 2])

    def test_geometry_layer_switch(self):
        """Test that the geometry layer can be disabled."""
        assert TrainConfig().geometry_layer == 4
        assert TrainConfig(use_geometry_layer=False).geometry_layer is None


@pytest.mark.unit
class TestSettings:
    """Test environment settings."""

    def test_log_level_default(self):
        """Test DEBUG in development and INFO elsewhere."""
        assert Settings(ENVIRONMENT="development", LOG_LEVEL=None).log_level == "DEBUG"
        assert Settings(ENVIRONMENT="production", LOG_LEVEL=None).log_level == "INFO"

    def test_explicit_log_level(self):
        """Test that LOG_LEVEL wins and is upper-cased."""
        assert Settings(LOG_LEVEL="warning").log_level == "WARNING"

    def test_env_prefix(self, monkeypatch):
        """Test that variables are read with the package prefix."""
        monkeypatch.setenv("SCENESKETCH_DEVICE", "cuda:1")
        assert Settings().DEVICE == "cuda:1"
