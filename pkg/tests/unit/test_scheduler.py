"""
Unit tests for simplification schedules and step tables.
"""
import pytest

from scenesketch.core.errors import ConfigurationError, DomainError
from scenesketch.schemas import Region
from scenesketch.training.scheduler import (
    BACKGROUND_STEPS,
    FOREGROUND_STEPS,
    MIN_CLIP_LOSS,
    build_schedule,
    default_steps,
    initial_factor,
    linear_schedule,
)


@pytest.mark.unit
class TestBuildSchedule:
    """Test exponential factor schedules."""

    def test_halving(self):
        """Test that step 1 halves the factor each level."""
        schedule = build_schedule(1.0, 1.0, 4)
        assert schedule.factors == [1.0, 0.5, 0.25, 0.125]

    def test_half_step(self):
        """Test the factors for step 0.5."""
        schedule = build_schedule(1.0, 0.5, 3)
        assert schedule.factors == pytest.approx([1.0, 0.70710678, 0.5])

    def test_first_factor_is_r1(self):
        """Test that level 1 uses r1 unchanged."""
        assert build_schedule(3.5, 0.9, 8).factors[0] == 3.5

    def test_strictly_decreasing(self):
        """Test that every positive step yields a strictly decreasing schedule."""
        factors = build_schedule(2.0, 0.35, 8).factors
        assert all(a > b for a, b in zip(factors, factors[1:]))

    @pytest.mark.parametrize("args", [(0.0, 1.0, 3), (1.0, 0.0, 3), (1.0, 1.0, 0)])
    def test_invalid_arguments(self, args):
        """Test that non-positive r1, step or level count is rejected."""
        with pytest.raises(DomainError):
            build_schedule(*args)


@pytest.mark.unit
class TestInitialFactor:
    """Test r1 = 1 / clip loss."""

    def test_reciprocal(self):
        """Test the reciprocal of the clip loss."""
        assert initial_factor(0.25) == 4.0

    def test_zero_clamped(self):
        """Test that a zero clip loss is clamped."""
        assert initial_factor(0.0) == pytest.approx(1.0 / MIN_CLIP_LOSS)


@pytest.mark.unit
class TestDefaultSteps:
    """Test per-region step tables and their precedence."""

    def test_tables(self):
        """Test the built-in background and foreground steps."""
        assert BACKGROUND_STEPS == {2: 0.35, 7: 0.45, 8: 0.5, 11: 0.9}
        assert FOREGROUND_STEPS == {2: 0.45, 7: 0.4, 8: 0.5, 11: 0.9}
        assert default_steps(Region.background, 2) == 0.35
        assert default_steps(Region.foreground, 7) == 0.4

    def test_override_beats_table(self):
        """Test that a per-region override replaces the table value."""
        overrides = {"background": {2: 0.6}}
        assert default_steps(Region.background, 2, overrides) == 0.6
        assert default_steps(Region.foreground, 2, overrides) == 0.45

    def test_shared_step_beats_everything(self):
        """Test that a shared step wins over overrides and tables."""
        assert default_steps(Region.background, 2, {"background": {2: 0.6}}, shared_step=0.25) == 0.25

    def test_unknown_layer(self):
        """Test that a layer without a default names the config key to set."""
        with pytest.raises(ConfigurationError) as exc_info:
            default_steps(Region.foreground, 5)
        assert exc_info.value.keys == ["train.step_overrides.foreground.5"]

    def test_override_for_unknown_layer(self):
        """Test that an override makes any layer usable."""
        assert default_steps(Region.foreground, 5, {"foreground": {5: 0.3}}) == 0.3

    def test_combined_rejected(self):
        """Test that the combined region has no step table."""
        with pytest.raises(ConfigurationError):
            default_steps(Region.combined, 2)


@pytest.mark.unit
class TestLinearSchedule:
    """Test the evenly spaced negative-control schedule."""

    def test_even_spacing(self):
        """Test constant gaps between factors."""
        schedule = linear_schedule(1.0, 4, strokes_per_level=8, n_strokes=64)
        assert schedule.factors == pytest.approx([1.0, 0.875, 0.75, 0.625])

    def test_too_many_levels(self):
        """Test that a budget exceeding the stroke count is rejected."""
        with pytest.raises(DomainError):
            linear_schedule(1.0, 9, strokes_per_level=8, n_strokes=64)
