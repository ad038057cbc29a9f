"""
Unit tests for network checkpoints.
"""
import pytest
import torch

from scenesketch.core.errors import MissingArtifactError
from scenesketch.training.checkpoint import load_checkpoint, save_checkpoint
from scenesketch.training.networks import LocNet, SimpNet


@pytest.mark.unit
class TestCheckpoint:
    """Test saving and restoring LocNet and SimpNet."""

    def test_locnet_round_trip(self, tmp_path):
        """Test that a trained LocNet comes back with the same parameters."""
        net = LocNet(n_strokes=3, hidden_width=8, seed=4)
        with torch.no_grad():
            net.head.bias.fill_(0.25)
        loaded = load_checkpoint(save_checkpoint(tmp_path / "loc.pt", net))
        assert isinstance(loaded, LocNet)
        assert loaded.seed == 4 and loaded.n_strokes == 3 and loaded.hidden_width == 8
        z = torch.rand(3 * 8)
        assert torch.equal(loaded(z), net(z))

    def test_simpnet_keeps_noise(self, tmp_path):
        """Test that the frozen input vector is restored with the weights."""
        net = SimpNet(n_strokes=5, hidden_width=8, seed=2, init_probability=0.9)
        loaded = load_checkpoint(save_checkpoint(tmp_path / "nested" / "simp.pt", net))
        assert isinstance(loaded, SimpNet)
        assert torch.equal(loaded.noise, net.noise)
        assert torch.allclose(loaded(), net())

    def test_missing_file(self, tmp_path):
        """Test that a missing checkpoint is a missing artifact."""
        with pytest.raises(MissingArtifactError):
            load_checkpoint(tmp_path / "absent.pt")

    def test_foreign_format(self, tmp_path):
        """Test that archives without the header are rejected."""
        path = tmp_path / "other.pt"
        torch.save({"weights": torch.zeros(2)}, path)
        with pytest.raises(MissingArtifactError):
            load_checkpoint(path)
