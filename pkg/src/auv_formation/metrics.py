#!/usr/bin/env python3
"""
Run metrics in Prometheus text format.

Each simulation gets its own ``CollectorRegistry`` so concurrent runs and
tests never share counters. Nothing is served over HTTP; the exposition is
written to a file next to the trace when requested.
"""

from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, generate_latest

from .logger import Logger, LoggingContext

STEPS = "auvsim_integration_steps"
DERIVATIVE_EVALUATIONS = "auvsim_derivative_evaluations"
ADAPTATION_EVALUATIONS = "auvsim_weight_adaptation_evaluations"
SIMULATED_TIME = "auvsim_simulated_time_seconds"
WALL_TIME = "auvsim_wall_time_seconds"
MAX_FORMATION_ERROR = "auvsim_max_formation_error_meters"


class SimulationMetrics:
    """Counters and gauges of a single engine run."""

    def __init__(self, logger: Logger | None = None) -> None:
        self.registry = CollectorRegistry(auto_describe=True)
        self.metrics_logger = LoggingContext(logger, "METRICS") if logger else None

        self.steps = Counter(
            STEPS, "Fixed-step integration steps taken", registry=self.registry
        )
        self.derivative_evaluations = Counter(
            DERIVATIVE_EVALUATIONS,
            "Global derivative evaluations (four per RK4 step)",
            registry=self.registry,
        )
        self.adaptation_evaluations = Counter(
            ADAPTATION_EVALUATIONS,
            "Per-agent evaluations of the weight adaptation law",
            registry=self.registry,
        )
        self.simulated_time = Gauge(
            SIMULATED_TIME, "Simulated time reached", registry=self.registry
        )
        self.wall_time = Gauge(
            WALL_TIME, "Wall-clock duration of the run", registry=self.registry
        )
        self.max_formation_error = Gauge(
            MAX_FORMATION_ERROR,
            "Largest per-agent formation error at the last recorded sample",
            registry=self.registry,
        )

    def value(self, name: str) -> float:
        """Current value of a metric by family name.

        Counters accept both the family name and the ``_total`` sample name.
        """
        for candidate in (name, f"{name}_total", name.removesuffix("_total") + "_total"):
            sample = self.registry.get_sample_value(candidate)
            if sample is not None:
                return float(sample)
        raise KeyError(f"unknown metric {name!r}")

    def exposition(self) -> bytes:
        return generate_latest(self.registry)

    def write(self, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(self.exposition())
        if self.metrics_logger:
            self.metrics_logger.info(f"Metrics written to {target}")
        return target
