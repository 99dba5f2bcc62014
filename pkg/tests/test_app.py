#!/usr/bin/env python3
"""
Test suite for the command-line application.
"""

import argparse
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.acceptance import CRITERIA
from auv_formation.app import (
    EXIT_FAILURE,
    EXIT_INTERRUPTED,
    EXIT_OK,
    EXIT_USAGE,
    FormationSimApp,
    build_parser,
    parse_window,
)
from auv_formation.engine import Simulator
from auv_formation.errors import UsageError
from auv_formation.scenario import write_scenario


@pytest.fixture
def app(mock_config, mock_logger):
    return FormationSimApp(mock_config, mock_logger)


@pytest.fixture
def scenario_file(small_config, temp_dir):
    return write_scenario(small_config, temp_dir / "small.json")


def stdout_lines(capsys):
    return capsys.readouterr().out.splitlines()


@pytest.mark.unit
class TestParser:
    """Test cases for argument parsing."""

    def test_parse_window(self):
        assert parse_window("1.5,3") == (1.5, 3.0)

    @pytest.mark.parametrize("text", ["3,1", "1", "a,b", "1,2,3"])
    def test_bad_window(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_window(text)

    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["learn", "--scenario", "s.json", "--window", "1,2",
                                  "--weights-out", "w/learned"])
        assert args.command == "learn"
        assert args.window == (1.0, 2.0)
        assert parser.parse_args(["verify"]).preset == "desk-5auv"

    def test_verify_sources_are_exclusive(self):
        with pytest.raises(UsageError, match="not allowed with argument"):
            build_parser().parse_args(["verify", "--preset", "desk-5auv", "--scenario", "x"])


@pytest.mark.unit
class TestExitCodes:
    """Test cases for exit codes and error lines."""

    def test_no_command(self, app, capsys):
        assert app.run([]) == EXIT_USAGE
        err = capsys.readouterr().err.strip().splitlines()
        assert err[0].startswith("usage: auvsim")
        assert err[-1].startswith("error: UsageError: auvsim: ")

    def test_missing_required_option(self, app, capsys):
        assert app.run(["run", "--scenario", "desk-5auv"]) == EXIT_USAGE
        err = capsys.readouterr().err.strip().splitlines()
        assert err[-1].startswith("error: UsageError: auvsim run: ")
        assert "--out" in err[-1]
        assert sum(line.startswith("error: ") for line in err) == 1

    def test_bad_window_is_usage_error(self, app, capsys):
        code = app.run(["learn", "--scenario", "desk-5auv", "--window", "3,1",
                        "--weights-out", "w"])
        assert code == EXIT_USAGE
        assert "error: UsageError: auvsim learn: " in capsys.readouterr().err

    def test_unknown_preset_choice(self, app, capsys):
        assert app.run(["verify", "--preset", "nope"]) == EXIT_USAGE
        assert "error: UsageError: " in capsys.readouterr().err

    def test_help(self, app, capsys):
        assert app.run(["--help"]) == EXIT_OK
        assert "auvsim" in capsys.readouterr().out

    def test_unknown_scenario(self, app, capsys, temp_dir):
        code = app.run(["run", "--scenario", str(temp_dir / "nope.json"), "--out", "x.csv"])
        assert code == EXIT_FAILURE
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: FileNotFoundError: ")

    def test_parse_error_line(self, app, capsys, temp_dir):
        path = temp_dir / "empty.json"
        path.write_text("")
        assert app.run(["run", "--scenario", str(path), "--out", "x.csv"]) == EXIT_FAILURE
        err = capsys.readouterr().err.strip()
        assert err.startswith("error: ScenarioParseError: line 1, column 1")

    def test_runaway_run_error_line(self, app, scenario_doc, temp_dir, capsys):
        doc = scenario_doc(4)
        doc["agents"][3]["nu0"] = [1e200, 1e200, 0.0]
        path = temp_dir / "runaway.json"
        path.write_text(json.dumps(doc))
        code = app.run(["run", "--scenario", str(path), "--out", str(temp_dir / "t.csv")])
        assert code == EXIT_FAILURE
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: NonFiniteStateError: non-finite state at t=")
        assert "agent4.nu[" in err[0]
        assert not (temp_dir / "t.csv").exists()

    def test_invalid_runtime_config(self, mock_config, mock_logger, capsys):
        mock_config.validate.side_effect = ValueError("AUVSIM_PROGRESS_INTERVAL must lie in 1..100")
        app = FormationSimApp(mock_config, mock_logger)
        assert app.run(["verify"]) == EXIT_FAILURE
        assert "error: ValueError:" in capsys.readouterr().err

    def test_interrupt(self, app, scenario_file, temp_dir, monkeypatch, capsys):
        def interrupted(self):
            raise KeyboardInterrupt

        monkeypatch.setattr(Simulator, "run", interrupted)
        code = app.run(["run", "--scenario", str(scenario_file), "--out", str(temp_dir / "t.csv")])
        assert code == EXIT_INTERRUPTED
        assert "error: SimulationInterrupted" in capsys.readouterr().err

    def test_stop_before_run(self, app, scenario_file, temp_dir):
        app.interrupted = True
        code = app.run(["run", "--scenario", str(scenario_file), "--out", str(temp_dir / "t.csv")])
        assert code == EXIT_INTERRUPTED


@pytest.mark.integration
class TestCommands:
    """Test cases for the subcommands on the small scenario."""

    def test_run_then_analyze(self, app, scenario_file, temp_dir, capsys):
        trace = temp_dir / "out" / "trace.csv"
        metrics = temp_dir / "out" / "run.prom"
        code = app.run(["run", "--scenario", str(scenario_file), "--out", str(trace),
                        "--metrics-out", str(metrics)])
        assert code == EXIT_OK
        assert stdout_lines(capsys) == [f"trace {trace}", f"metrics {metrics}"]
        assert "auvsim_integration_steps" in metrics.read_text()

        assert app.run(["analyze", "--trace", str(trace), "--scenario", str(scenario_file)]) == 0
        out = stdout_lines(capsys)
        assert out[0] == "scenario=small"
        assert any(line.startswith("check.observer_convergence=") for line in out)

    def test_metrics_from_runtime_config(self, mock_config, mock_logger, scenario_file, temp_dir,
                                         capsys):
        mock_config.metrics_enabled = True
        app = FormationSimApp(mock_config, mock_logger)
        trace = temp_dir / "trace.csv"
        assert app.run(["run", "--scenario", str(scenario_file), "--out", str(trace)]) == 0
        assert f"metrics {trace.with_suffix('.prom')}" in stdout_lines(capsys)

    def test_learn_then_replay(self, app, scenario_file, temp_dir, capsys):
        prefix = temp_dir / "weights" / "learned"
        code = app.run(["learn", "--scenario", str(scenario_file), "--window", "0.2,0.5",
                        "--weights-out", str(prefix)])
        assert code == EXIT_OK
        assert stdout_lines(capsys) == [
            f"weights {prefix}.agent1.rbfw",
            f"weights {prefix}.agent2.rbfw",
        ]

        replay = temp_dir / "replay.csv"
        code = app.run(["replay", "--scenario", str(scenario_file), "--weights", str(prefix),
                        "--out", str(replay)])
        assert code == EXIT_OK
        assert stdout_lines(capsys) == [f"trace {replay}"]

        report = temp_dir / "report.txt"
        figures = temp_dir / "figures"
        code = app.run(["analyze", "--trace", str(replay), "--scenario", str(scenario_file),
                        "--weights", str(prefix), "--report", str(report),
                        "--figures", str(figures)])
        assert code == EXIT_OK
        out = stdout_lines(capsys)
        assert out[0] == f"report {report}"
        assert f"figure {figures / 'tracking.csv'}" in out

    def test_replay_without_weights(self, app, scenario_file, temp_dir, capsys):
        code = app.run(["replay", "--scenario", str(scenario_file), "--weights",
                        str(temp_dir / "absent"), "--out", str(temp_dir / "r.csv")])
        assert code == EXIT_FAILURE
        assert capsys.readouterr().err.startswith("error: MissingWeightsFileError: ")

    def test_analyze_agent_count_mismatch(self, app, scenario_doc, scenario_file, temp_dir,
                                          capsys):
        from auv_formation.scenario import build_config

        trace = temp_dir / "trace.csv"
        assert app.run(["run", "--scenario", str(scenario_file), "--out", str(trace)]) == 0
        three = write_scenario(build_config(scenario_doc(3)), temp_dir / "three.json")
        capsys.readouterr()
        assert app.run(["analyze", "--trace", str(trace), "--scenario", str(three)]) == 1
        assert "error: ValueError: trace has 2 agents" in capsys.readouterr().err

    def test_verify(self, app, scenario_file, temp_dir, capsys):
        code = app.run(["verify", "--scenario", str(scenario_file), "--workdir",
                        str(temp_dir / "verify")])
        lines = stdout_lines(capsys)
        assert code in (EXIT_OK, EXIT_FAILURE)
        assert [line.split()[0] for line in lines] == list(CRITERIA)
        assert all(line.split()[1] in ("PASS", "FAIL") for line in lines)
        assert (temp_dir / "verify" / "learn.csv").exists()


if __name__ == "__main__":
    pytest.main([__file__])
