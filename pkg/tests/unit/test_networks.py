"""
Unit tests for LocNet and SimpNet.
"""
import pytest
import torch

from scenesketch.core.errors import ShapeError
from scenesketch.training.networks import LocNet, SimpNet, predict_offsets, predict_probabilities


@pytest.mark.unit
class TestLocNet:
    """Test the stroke-offset network."""

    def test_zero_initial_offsets(self):
        """Test that a fresh LocNet predicts exactly zero offsets."""
        net = LocNet(n_strokes=3, hidden_width=8, seed=1)
        z = torch.rand(3, 4, 2, dtype=torch.float64)
        assert torch.count_nonzero(predict_offsets(net, z)) == 0

    def test_offsets_keep_shape(self):
        """Test that offsets are shaped like the control points."""
        net = LocNet(n_strokes=5, hidden_width=8)
        assert predict_offsets(net, torch.rand(5, 4, 2)).shape == (5, 4, 2)

    def test_same_seed_same_parameters(self):
        """Test that construction is a pure function of the seed."""
        a = LocNet(n_strokes=2, hidden_width=8, seed=7).state_dict()
        b = LocNet(n_strokes=2, hidden_width=8, seed=7).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    def test_seed_changes_parameters(self):
        """Test that different seeds give different hidden weights."""
        a = LocNet(n_strokes=2, hidden_width=8, seed=1)
        b = LocNet(n_strokes=2, hidden_width=8, seed=2)
        assert not torch.equal(a.mlp[0].weight, b.mlp[0].weight)

    def test_wrong_size(self):
        """Test that a control-point tensor for another stroke count is rejected."""
        net = LocNet(n_strokes=3, hidden_width=8)
        with pytest.raises(ShapeError):
            predict_offsets(net, torch.rand(4, 4, 2))


@pytest.mark.unit
class TestSimpNet:
    """Test the stroke-probability network."""

    def test_initial_probability(self):
        """Test that all strokes start at the configured probability."""
        net = SimpNet(n_strokes=6, hidden_width=8, init_probability=0.95)
        probs = predict_probabilities(net)
        assert probs.shape == (6,)
        assert torch.allclose(probs, torch.full((6,), 0.95), atol=1e-6)

    def test_noise_is_buffer(self):
        """Test that the input vector is saved but not optimized."""
        net = SimpNet(n_strokes=4, hidden_width=8)
        assert "noise" in net.state_dict()
        assert all(p is not net.noise for p in net.parameters())

    def test_probabilities_in_open_interval(self):
        """Test that outputs lie in (0, 1)."""
        net = SimpNet(n_strokes=4, hidden_width=8, seed=5, init_probability=0.3)
        with torch.no_grad():
            net.head.weight.normal_()
        probs = predict_probabilities(net, torch.float64)
        assert probs.dtype == torch.float64
        assert bool(((probs > 0) & (probs < 1)).all())

    def test_gradient_reaches_hidden_layers(self):
        """Test that probabilities are differentiable w.r.t. every layer."""
        net = SimpNet(n_strokes=4, hidden_width=8)
        net().sum().backward()
        assert net.head.bias.grad is not None
        assert net.mlp[0].weight.grad is not None

    @pytest.mark.parametrize("bad", [0.0, 1.0])
    def test_bad_init_probability(self, bad):
        """Test that a saturated starting probability is rejected."""
        with pytest.raises(ValueError):
            SimpNet(n_strokes=2, init_probability=bad)
