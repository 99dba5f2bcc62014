#!/usr/bin/env python3
"""
Command-line application for the formation simulator.

Subcommands: ``run``, ``learn``, ``replay``, ``analyze`` and ``verify``.
Results go to stdout one per line; logs go to stderr. Any failure ends with
exactly one ``error: <ErrorClass>: <message>`` line on stderr.
"""

import argparse
import signal
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Any, NoReturn, Protocol

from .acceptance import AcceptancePipeline, resolve_learn_window, shortened
from .analysis import build_report, write_figures, write_report
from .config import Config, config
from .engine import (
    SimConfig,
    Simulator,
    SimTrace,
    export_learned_weights,
    learned_networks,
    load_pretrained_networks,
    with_overrides,
)
from .errors import AuvSimError, ScenarioWarning, SimulationInterrupted, UsageError
from .logger import Logger, LoggingContext, get_logger
from .metrics import SimulationMetrics
from .scenario import available_presets, load_preset, resolve_scenario
from .trace_io import read_trace_csv, write_trace_csv

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


class Stoppable(Protocol):
    def request_stop(self) -> None: ...


def parse_window(text: str) -> tuple[float, float]:
    """``"a,b"`` -> ``(a, b)``."""
    try:
        t_a, t_b = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'a,b', got {text!r}") from None
    if not t_b > t_a:
        raise argparse.ArgumentTypeError(f"window end must exceed start, got {text!r}")
    return t_a, t_b


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises ``UsageError`` instead of exiting."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="auvsim",
        description="Distributed formation learning simulator for underwater vehicles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write its trace")
    run.add_argument("--scenario", required=True, help="scenario file or preset name")
    run.add_argument("--out", required=True, type=Path, help="trace CSV to write")
    run.add_argument("--metrics-out", type=Path, help="Prometheus text file to write")

    learn = sub.add_parser("learn", help="adaptive run, then export window-averaged weights")
    learn.add_argument("--scenario", required=True)
    learn.add_argument("--window", type=parse_window, help="averaging window 'a,b' in seconds")
    learn.add_argument("--weights-out", required=True, help="weights file prefix")
    learn.add_argument("--out", type=Path, help="also write the learning trace")
    learn.add_argument("--metrics-out", type=Path)

    replay = sub.add_parser("replay", help="pretrained run with constant learned weights")
    replay.add_argument("--scenario", required=True)
    replay.add_argument("--weights", required=True, help="weights file prefix")
    replay.add_argument("--out", required=True, type=Path)
    replay.add_argument("--metrics-out", type=Path)

    analyze = sub.add_parser("analyze", help="convergence report and figure data of a trace")
    analyze.add_argument("--trace", required=True, type=Path)
    analyze.add_argument("--scenario", required=True)
    analyze.add_argument("--report", type=Path, help="report file (default: stdout)")
    analyze.add_argument("--figures", type=Path, help="directory for per-figure CSVs")
    analyze.add_argument("--weights", help="constant weights to assess (default: trace average)")
    analyze.add_argument("--window", type=parse_window)

    verify = sub.add_parser("verify", help="run the acceptance pipeline")
    source = verify.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=available_presets(), default="desk-5auv")
    source.add_argument("--scenario")
    verify.add_argument("--workdir", type=Path, help="keep artifacts here (default: temporary)")
    verify.add_argument("--t-end", type=float, help="shorten every run to this horizon")

    return parser


class FormationSimApp:
    """Main application class for the simulator CLI."""

    def __init__(self, app_config: Config | None = None, logger: Logger | None = None) -> None:
        self.config = app_config or config
        self.logger = logger or get_logger(self.config)
        self.app_logger = LoggingContext(self.logger, "CLI")
        self.active: Stoppable | None = None
        self.interrupted = False
        self._previous_handlers: dict[int, Any] = {}

    def initialize(self) -> bool:
        try:
            self.config.validate()
            self.app_logger.debug("Configuration validated successfully")
            return True
        except ValueError as e:
            self._error_line(e)
            return False

    def setup_signal_handlers(self) -> None:
        """Turn SIGINT/SIGTERM into a graceful stop of the running simulation."""

        def signal_handler(signum: int, frame: Any) -> None:
            self.app_logger.info(f"Received signal {signum}, stopping at the next step")
            self.interrupted = True
            if self.active is not None:
                self.active.request_stop()

        for signum in (signal.SIGINT, signal.SIGTERM):
            self._previous_handlers[signum] = signal.signal(signum, signal_handler)

    def restore_signal_handlers(self) -> None:
        for signum, handler in self._previous_handlers.items():
            signal.signal(signum, handler)
        self._previous_handlers.clear()

    def run(self, argv: list[str] | None = None) -> int:
        try:
            args = build_parser().parse_args(argv)
        except UsageError as e:
            self._error_line(e)
            return EXIT_USAGE
        except SystemExit as e:
            return EXIT_USAGE if e.code else EXIT_OK

        if not self.initialize():
            return EXIT_FAILURE

        self.setup_signal_handlers()
        try:
            with warnings.catch_warnings():
                # Scenario warnings are logged by the engine.
                warnings.simplefilter("ignore", ScenarioWarning)
                handler = getattr(self, f"cmd_{args.command}")
                return handler(args)
        except SimulationInterrupted as e:
            self._error_line(e)
            return EXIT_INTERRUPTED
        except KeyboardInterrupt:
            self._error_line(SimulationInterrupted("interrupted"))
            return EXIT_INTERRUPTED
        except (AuvSimError, OSError, ValueError) as e:
            self.app_logger.debug(f"{args.command} failed: {e!r}")
            self._error_line(e)
            return EXIT_FAILURE
        finally:
            self.restore_signal_handlers()
            self.active = None

    # Helpers ------------------------------------------------------------------

    def _error_line(self, error: BaseException) -> None:
        message = " ".join(str(error).split())
        print(f"error: {type(error).__name__}: {message}", file=sys.stderr, flush=True)

    def _emit(self, line: str) -> None:
        print(line, flush=True)

    def _simulate(self, cfg: SimConfig, metrics: SimulationMetrics) -> SimTrace:
        simulator = Simulator(cfg, self.logger, metrics, self.config.progress_interval)
        self.active = simulator
        if self.interrupted:
            simulator.request_stop()
        try:
            return simulator.run()
        finally:
            self.active = None

    def _write_metrics(
        self, metrics: SimulationMetrics, explicit: Path | None, trace_path: Path | None
    ) -> None:
        target = explicit
        if target is None and self.config.metrics_enabled and trace_path is not None:
            target = trace_path.with_suffix(".prom")
        if target is not None:
            metrics.write(target)
            self._emit(f"metrics {target}")

    # Subcommands --------------------------------------------------------------

    def cmd_run(self, args: argparse.Namespace) -> int:
        cfg = resolve_scenario(args.scenario)
        metrics = SimulationMetrics(self.logger)
        trace = self._simulate(cfg, metrics)
        self._emit(f"trace {write_trace_csv(trace, args.out)}")
        self._write_metrics(metrics, args.metrics_out, args.out)
        return EXIT_OK

    def cmd_learn(self, args: argparse.Namespace) -> int:
        cfg = with_overrides(
            resolve_scenario(args.scenario), mode="adaptive", weights_path=None, pretrained=None
        )
        window = resolve_learn_window(cfg, args.window)
        metrics = SimulationMetrics(self.logger)
        trace = self._simulate(cfg, metrics)
        if args.out is not None:
            self._emit(f"trace {write_trace_csv(trace, args.out)}")
        for path in export_learned_weights(trace, window, args.weights_out, cfg.nn.lattice()):
            self._emit(f"weights {path}")
        self._write_metrics(metrics, args.metrics_out, args.out)
        return EXIT_OK

    def cmd_replay(self, args: argparse.Namespace) -> int:
        base = resolve_scenario(args.scenario)
        cfg = with_overrides(
            base,
            mode="pretrained",
            weights_path=args.weights,
            pretrained=load_pretrained_networks(args.weights, base.n_agents),
        )
        metrics = SimulationMetrics(self.logger)
        trace = self._simulate(cfg, metrics)
        self._emit(f"trace {write_trace_csv(trace, args.out)}")
        self._write_metrics(metrics, args.metrics_out, args.out)
        return EXIT_OK

    def cmd_analyze(self, args: argparse.Namespace) -> int:
        cfg = resolve_scenario(args.scenario)
        trace = read_trace_csv(args.trace)
        if trace.n_agents != cfg.n_agents:
            raise ValueError(
                f"trace has {trace.n_agents} agents, scenario '{cfg.name}' has {cfg.n_agents}"
            )
        cfg = shortened(cfg, float(trace.t[-1]))

        networks = None
        if args.weights is not None:
            networks = list(load_pretrained_networks(args.weights, cfg.n_agents))
        elif trace.weights.shape[0] >= 2 and trace.weights.shape[-1] == cfg.nn.lattice().n_nodes:
            networks = learned_networks(
                trace, resolve_learn_window(cfg, args.window), cfg.nn.lattice()
            )

        report = build_report(trace, cfg, networks, self.logger)
        if args.report is not None:
            self._emit(f"report {write_report(report, args.report)}")
        else:
            sys.stdout.write(report.to_text())
            sys.stdout.flush()
        if args.figures is not None:
            for path in write_figures(trace, cfg, args.figures, networks):
                self._emit(f"figure {path}")
        return EXIT_OK

    def cmd_verify(self, args: argparse.Namespace) -> int:
        cfg = resolve_scenario(args.scenario) if args.scenario else load_preset(args.preset)
        if args.t_end is not None:
            cfg = shortened(cfg, args.t_end)

        with tempfile.TemporaryDirectory(prefix="auvsim-verify-") as scratch:
            workdir = args.workdir or Path(scratch)
            pipeline = AcceptancePipeline(cfg, workdir, self.logger, self.config.progress_interval)
            self.active = pipeline
            if self.interrupted:
                pipeline.request_stop()
            outcome = pipeline.run()

        for result in outcome.results:
            self._emit(result.line())
        return EXIT_OK if outcome.passed else EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    app = FormationSimApp()
    return app.run(argv)


if __name__ == "__main__":
    sys.exit(main())
