#!/usr/bin/env python3
"""
Exception hierarchy for the AUV formation-learning simulator.

Every error raised on purpose by the package derives from ``AuvSimError`` and
from the closest builtin, so ``except ValueError`` or ``except
FileNotFoundError`` keep working for callers that do not care about the detail.
"""

from typing import Any


class AuvSimError(Exception):
    """Base class for all simulator errors."""


# Graph -----------------------------------------------------------------------


class TopologyError(AuvSimError, ValueError):
    """Invalid communication topology."""

    def __init__(self, message: str, index: Any = None) -> None:
        super().__init__(message)
        self.index = index


class NonSquareMatrixError(TopologyError):
    """Weight matrix is not square (``index`` holds the offending shape)."""


class NegativeWeightError(TopologyError):
    """A weight ``a_ij`` is negative (``index`` holds ``(i, j)``)."""


class SelfLoopError(TopologyError):
    """A diagonal weight ``a_ii`` is non-zero (``index`` holds ``(i, i)``)."""


# Dynamics --------------------------------------------------------------------


class NotPositiveDefiniteError(AuvSimError, ValueError):
    """A matrix required to be positive definite is not."""

    def __init__(self, message: str, eigenvalues: Any = None) -> None:
        super().__init__(message)
        self.eigenvalues = eigenvalues


class UnknownUncertaintyIdError(AuvSimError, ValueError):
    """No model-uncertainty formula is registered under this id."""

    def __init__(self, uncertainty_id: Any) -> None:
        super().__init__(f"Unknown uncertainty id: {uncertainty_id!r}")
        self.uncertainty_id = uncertainty_id


# RBF networks ----------------------------------------------------------------


class BadBoundsError(AuvSimError, ValueError):
    """Lattice bounds are malformed (``lo >= hi`` or non-finite)."""


class BadCountError(AuvSimError, ValueError):
    """Lattice counts are malformed (fewer than two points per axis)."""


class BadWidthError(AuvSimError, ValueError):
    """Receptive-field width is not a positive finite number."""


class DimensionMismatchError(AuvSimError, ValueError):
    """Array dimensions do not agree with what the caller declared."""


class EmptyWindowError(AuvSimError, ValueError):
    """An averaging window holds fewer than two snapshots."""

    def __init__(self, message: str, window: Any = None) -> None:
        super().__init__(message)
        self.window = window


class WeightsFileError(AuvSimError, OSError):
    """A weights file could not be written or read."""


class FormatVersionMismatchError(WeightsFileError):
    """Bad magic bytes or an unsupported format version."""


class ChecksumMismatchError(WeightsFileError):
    """Stored CRC-32 does not match the payload."""


class WeightsFieldError(WeightsFileError):
    """A header field is inconsistent with the payload."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


# Estimator -------------------------------------------------------------------


class MissingNeighborError(AuvSimError, KeyError):
    """Agent ``agent`` listens to ``neighbor`` but no state was supplied."""

    def __init__(self, agent: int, neighbor: int) -> None:
        super().__init__(f"agent {agent}: no state supplied for neighbour {neighbor}")
        self.agent = agent
        self.neighbor = neighbor

    def __str__(self) -> str:
        return str(self.args[0])


class MissingNeighborDerivativeError(MissingNeighborError):
    """A neighbour's first derivative is missing in the second pass."""

    def __init__(self, agent: int, neighbor: int) -> None:
        AuvSimError.__init__(
            self, f"agent {agent}: no derivative supplied for node {neighbor}"
        )
        self.agent = agent
        self.neighbor = neighbor


# Engine ----------------------------------------------------------------------


class NonFiniteStateError(AuvSimError, ArithmeticError):
    """The integrated state picked up a NaN or an infinity."""

    def __init__(self, time: float | None, component: Any) -> None:
        where = "" if time is None else f" at t={time:.6g} s"
        super().__init__(f"non-finite state{where} in component {component}")
        self.time = time
        self.component = component


class MissingWeightsFileError(AuvSimError, FileNotFoundError):
    """Pretrained mode needs a weights file that does not exist."""

    def __init__(self, path: Any) -> None:
        super().__init__(f"weights file not found: {path}")
        self.path = path

    def __str__(self) -> str:
        return str(self.args[0])


class SimulationInterrupted(AuvSimError):
    """A stop was requested while the engine was integrating."""


class TraceFormatError(AuvSimError, ValueError):
    """A trace file does not follow the documented column layout."""


# Analysis --------------------------------------------------------------------


class DegenerateSegmentError(AuvSimError, ValueError):
    """Too few (or non-positive) samples to fit an exponential decay."""


class MissingOracleSeriesError(AuvSimError, ValueError):
    """The trace does not carry the ground-truth nonlinearity series."""


# Scenario files --------------------------------------------------------------


class ScenarioParseError(AuvSimError, ValueError):
    """Scenario text is not well-formed."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScenarioValidationError(AuvSimError, ValueError):
    """Scenario is well-formed but a field is invalid."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


# Command line ----------------------------------------------------------------


class UsageError(AuvSimError, ValueError):
    """The command line does not parse."""


# Warnings --------------------------------------------------------------------


class ScenarioWarning(UserWarning):
    """A scenario runs but violates a condition the convergence results rely on."""


class GainRelationWarning(ScenarioWarning):
    """``lambda_min(K2) > 2 lambda_max(K1)`` does not hold."""


class SpanningTreeWarning(ScenarioWarning):
    """Some follower cannot be reached from the leader."""


class LeaderStabilityWarning(ScenarioWarning):
    """The leader matrix has eigenvalues off the imaginary axis."""
