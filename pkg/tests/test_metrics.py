#!/usr/bin/env python3
"""
Test suite for run metrics.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.metrics import SimulationMetrics


@pytest.mark.unit
class TestSimulationMetrics:
    """Test cases for SimulationMetrics."""

    def test_initial_values(self):
        metrics = SimulationMetrics()
        assert metrics.value("auvsim_integration_steps") == 0.0
        assert metrics.value("auvsim_wall_time_seconds") == 0.0

    def test_counter_names(self):
        metrics = SimulationMetrics()
        metrics.steps.inc(3)
        assert metrics.value("auvsim_integration_steps") == 3.0
        assert metrics.value("auvsim_integration_steps_total") == 3.0

    def test_registries_are_independent(self):
        first, second = SimulationMetrics(), SimulationMetrics()
        first.steps.inc()
        assert second.value("auvsim_integration_steps") == 0.0

    def test_unknown_metric(self):
        with pytest.raises(KeyError):
            SimulationMetrics().value("auvsim_missing")

    def test_write(self, temp_dir, mock_logger):
        metrics = SimulationMetrics(mock_logger)
        metrics.simulated_time.set(2.5)
        path = metrics.write(temp_dir / "out" / "run.prom")
        text = path.read_text()
        assert "auvsim_simulated_time_seconds 2.5" in text
        assert "# TYPE auvsim_integration_steps_total counter" in text or (
            "# TYPE auvsim_integration_steps counter" in text
        )
        mock_logger.info.assert_called()


if __name__ == "__main__":
    pytest.main([__file__])
