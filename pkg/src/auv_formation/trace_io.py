#!/usr/bin/env python3
"""
Trace CSV files and their weight-snapshot archives.

Column order of a trace with N agents (1 + 6 + 32 N columns)::

    t
    leader_x leader_y leader_psi leader_u leader_v leader_r
    for i in 1..N, prefixed a{i}_:
        x y psi u v r                     true pose and body velocity
        xhat_0 .. xhat_5                  leader-state estimate
        chi_err A_err                     estimation error norms
        z1_0..2 z2_0..2                   backstepping errors
        tau_0..2                          control forces
        wnorm_0..2                        per-channel weight norms
        F_0..2                            ground-truth nonlinearity
        nn_0..2                           online network output

Values use 17 significant digits and LF line endings, so a write followed by
a read reproduces every double exactly. Weight snapshots do not fit a flat
table; they go to ``<stem>.weights.npz`` next to the CSV.
"""

from pathlib import Path

import numpy as np
import pandas as pd

from .engine import SimTrace
from .errors import TraceFormatError

LEADER_COLUMNS = ["leader_x", "leader_y", "leader_psi", "leader_u", "leader_v", "leader_r"]
AGENT_FIELDS = (
    ["x", "y", "psi", "u", "v", "r"]
    + [f"xhat_{k}" for k in range(6)]
    + ["chi_err", "A_err"]
    + [f"z1_{k}" for k in range(3)]
    + [f"z2_{k}" for k in range(3)]
    + [f"tau_{k}" for k in range(3)]
    + [f"wnorm_{k}" for k in range(3)]
    + [f"F_{k}" for k in range(3)]
    + [f"nn_{k}" for k in range(3)]
)
AGENT_WIDTH = len(AGENT_FIELDS)
FLOAT_FORMAT = "%.17g"


def trace_columns(n_agents: int) -> list[str]:
    columns = ["t", *LEADER_COLUMNS]
    for i in range(1, n_agents + 1):
        columns.extend(f"a{i}_{name}" for name in AGENT_FIELDS)
    return columns


def weights_archive_path(trace_path: str | Path) -> Path:
    return Path(trace_path).with_suffix(".weights.npz")


def trace_frame(trace: SimTrace) -> pd.DataFrame:
    """The trace as a flat table in documented column order."""
    blocks = [trace.t[:, None], trace.chi0]
    for k in range(trace.n_agents):
        blocks.extend(
            [
                trace.eta[:, k],
                trace.nu[:, k],
                trace.chi_hat[:, k],
                trace.err_chi[:, k, None],
                trace.err_A[:, k, None],
                trace.z1[:, k],
                trace.z2[:, k],
                trace.tau[:, k],
                trace.weight_norm[:, k],
                trace.F[:, k],
                trace.nn_out[:, k],
            ]
        )
    return pd.DataFrame(np.hstack(blocks), columns=trace_columns(trace.n_agents))


def write_trace_csv(trace: SimTrace, path: str | Path, with_weights: bool = True) -> Path:
    """Write the CSV and, unless disabled, the weight-snapshot archive."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(trace).to_csv(
        target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    if with_weights:
        np.savez_compressed(
            weights_archive_path(target),
            times=trace.weight_times,
            weights=trace.weights,
            adaptation_evaluations=np.array(trace.adaptation_evaluations),
        )
    return target


def _agent_count(columns: list[str]) -> int:
    if len(columns) < 7 or columns[:7] != ["t", *LEADER_COLUMNS]:
        raise TraceFormatError("trace must start with t and the six leader columns")
    extra = len(columns) - 7
    if extra % AGENT_WIDTH:
        raise TraceFormatError(
            f"{len(columns)} columns is not 7 plus a multiple of {AGENT_WIDTH}"
        )
    n_agents = extra // AGENT_WIDTH
    if columns != trace_columns(n_agents):
        raise TraceFormatError("trace columns are not in the documented order")
    return n_agents


def read_trace_csv(path: str | Path) -> SimTrace:
    """Read a trace CSV (and its weights archive when present)."""
    source = Path(path)
    try:
        frame = pd.read_csv(source, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise TraceFormatError(f"{source}: {e}") from e
    n = _agent_count(list(frame.columns))
    try:
        data = frame.to_numpy(dtype=float)
    except ValueError as e:
        raise TraceFormatError(f"{source}: non-numeric value ({e})") from e
    samples = data.shape[0]
    agents = data[:, 7:].reshape(samples, n, AGENT_WIDTH)

    archive = weights_archive_path(source)
    if archive.exists():
        with np.load(archive) as stored:
            weight_times = stored["times"]
            weights = stored["weights"]
            adaptation_evaluations = int(stored["adaptation_evaluations"])
    else:
        weight_times = np.zeros(0)
        weights = np.zeros((0, n, 3, 0))
        adaptation_evaluations = 0

    return SimTrace(
        t=data[:, 0].copy(),
        chi0=data[:, 1:7].copy(),
        eta=agents[:, :, 0:3].copy(),
        nu=agents[:, :, 3:6].copy(),
        chi_hat=agents[:, :, 6:12].copy(),
        err_chi=agents[:, :, 12].copy(),
        err_A=agents[:, :, 13].copy(),
        z1=agents[:, :, 14:17].copy(),
        z2=agents[:, :, 17:20].copy(),
        tau=agents[:, :, 20:23].copy(),
        weight_norm=agents[:, :, 23:26].copy(),
        F=agents[:, :, 26:29].copy(),
        nn_out=agents[:, :, 29:32].copy(),
        weight_times=weight_times,
        weights=weights,
        adaptation_evaluations=adaptation_evaluations,
    )


def write_figure_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return target
