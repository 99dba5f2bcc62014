#!/usr/bin/env python3
"""
Post-run analysis of simulation traces.

Every function here is a pure function of a trace (plus the scenario it came
from), so re-running analysis on a saved trace reproduces the same numbers.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from .controller import FormationOffsets
from .dynamics import VehicleParams, mass_matrix
from .engine import SimConfig, SimTrace
from .errors import DegenerateSegmentError, MissingOracleSeriesError
from .logger import Logger, LoggingContext
from .rbf import RbfNetwork, regressor_matrix
from .trace_io import write_figure_csv

STEADY_FRACTION = 0.25
DECAY_FLOOR = 1e-9
RIDGE_SCALE = 1e-8
RESIDUAL_MARGIN = 2.0


@dataclass(eq=False)
class FormationErrors:
    series: np.ndarray
    steady_mean: np.ndarray
    steady_max: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    samples: int


@dataclass(frozen=True)
class ErrorStats:
    median: float
    p95: float


@dataclass(eq=False)
class ApproximationReport:
    """Relative-error statistics per agent and channel (``[agent][channel]``)."""

    learned: list[list[ErrorStats]]
    online: list[list[ErrorStats]]
    oracle: list[list[ErrorStats]]
    start_time: float


@dataclass(eq=False)
class WeightSettling:
    drift: np.ndarray
    std_ratio: np.ndarray


@dataclass(eq=False)
class LyapunovSeries:
    values: np.ndarray
    decreasing_fraction: np.ndarray
    compliant_fraction: np.ndarray


def steady_mask(t: np.ndarray, fraction: float = STEADY_FRACTION) -> np.ndarray:
    """Samples in the final ``fraction`` of the run."""
    t0, t1 = float(t[0]), float(t[-1])
    return t >= t1 - fraction * (t1 - t0)


def formation_error_series(trace: SimTrace, offsets: FormationOffsets) -> FormationErrors:
    """``||eta_i(t) - (eta_0(t) + d*_i)||`` with final-quarter statistics."""
    target = trace.chi0[:, None, :3] + offsets.d_star[None, :, :]
    series = np.linalg.norm(trace.eta - target, axis=2)
    steady = series[steady_mask(trace.t)]
    return FormationErrors(series, steady.mean(axis=0), steady.max(axis=0))


def orbit_radius(trace: SimTrace) -> float:
    """Largest horizontal distance of the leader from the origin."""
    return float(np.linalg.norm(trace.chi0[:, :2], axis=1).max())


def transient_boundary(t: np.ndarray, error: np.ndarray, factor: float = 2.0) -> float:
    """First time after which ``error`` stays below ``factor`` x its final-quarter mean."""
    ball = factor * float(error[steady_mask(t)].mean())
    outside = np.flatnonzero(error > ball)
    if outside.size == 0:
        return float(t[0])
    last = int(outside[-1])
    return float(t[min(last + 1, t.shape[0] - 1)])


def settling_times(trace: SimTrace, offsets: FormationOffsets, factor: float = 2.0) -> np.ndarray:
    series = formation_error_series(trace, offsets).series
    return np.array(
        [transient_boundary(trace.t, series[:, k], factor) for k in range(trace.n_agents)]
    )


def fit_exponential_decay(t: np.ndarray, error: np.ndarray) -> DecayFit:
    """Least-squares line through ``log(error)``.

    The fit runs from the first sample below half the peak to the last sample
    above ``DECAY_FLOOR`` times the initial error. A series that never halves is
    fitted from its peak, which yields a rate near zero.
    """
    e = np.asarray(error, dtype=float)
    if e.shape[0] < 3:
        raise DegenerateSegmentError(f"need at least 3 samples, got {e.shape[0]}")
    peak_index = int(np.argmax(e))
    peak = float(e[peak_index])
    if not peak > 0.0:
        raise DegenerateSegmentError("error series is identically zero")

    below_half = np.flatnonzero(e[peak_index:] < 0.5 * peak)
    start = peak_index + int(below_half[0]) if below_half.size else peak_index
    reference = float(e[0]) if e[0] > 0.0 else peak
    above_floor = np.flatnonzero(e > DECAY_FLOOR * reference)
    end = int(above_floor[-1]) if above_floor.size else start
    segment = slice(start, end + 1)
    t_seg, e_seg = np.asarray(t, dtype=float)[segment], e[segment]
    if t_seg.shape[0] < 3:
        raise DegenerateSegmentError(
            f"fit segment [{start}, {end}] holds {t_seg.shape[0]} samples, need 3"
        )
    if not np.all(e_seg > 0.0):
        raise DegenerateSegmentError("error reaches exactly zero inside the fit segment")

    log_e = np.log(e_seg)
    slope, intercept = np.polyfit(t_seg, log_e, 1)
    residual = log_e - (slope * t_seg + intercept)
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residual**2)) / ss_tot if ss_tot > 0.0 else 0.0
    return DecayFit(float(slope), r_squared, int(t_seg.shape[0]))


def observer_decay_fit(trace: SimTrace) -> list[DecayFit]:
    """Exponential rate of each agent's leader-state estimation error."""
    return [fit_exponential_decay(trace.t, trace.err_chi[:, k]) for k in range(trace.n_agents)]


def observer_final_ratios(trace: SimTrace) -> tuple[np.ndarray, np.ndarray]:
    """Final over initial estimation error, for the state and the matrix."""

    def ratio(series: np.ndarray) -> np.ndarray:
        initial = series[0]
        return np.divide(
            series[-1], initial, out=np.zeros_like(initial), where=initial > 0.0
        )

    return ratio(trace.err_chi), ratio(trace.err_A)


def _network_inputs(trace: SimTrace, nn_input: str) -> np.ndarray:
    """``(samples, N, q)`` inputs the networks saw."""
    if nn_input == "nu":
        return trace.nu
    return np.concatenate((trace.eta, trace.nu), axis=2)


def relative_error(prediction: np.ndarray, target: np.ndarray) -> np.ndarray:
    return np.abs(prediction - target) / (1.0 + np.abs(target))


def _stats(values: np.ndarray) -> ErrorStats:
    return ErrorStats(float(np.median(values)), float(np.percentile(values, 95)))


def ridge_fit(
    S: np.ndarray, targets: np.ndarray, penalty: ArrayLike | None = None
) -> np.ndarray:
    """Ridge least-squares weights, one row per target column.

    ``penalty`` is the per-sample ridge weight of each target column. Over K
    samples the sigma-modified update law settles where
    ``sum(S (S'W - F)) + K sigma K2 W`` vanishes, so ``penalty = sigma * K2``
    gives the constant weights that law converges to. Without a penalty a
    near-unregularized fit is returned.
    """
    gram = S.T @ S
    rhs = S.T @ targets
    identity = np.eye(gram.shape[0])
    if penalty is None:
        lam = RIDGE_SCALE * float(np.mean(np.diag(gram)))
        if lam == 0.0:
            lam = RIDGE_SCALE
        return np.linalg.solve(gram + lam * identity, rhs).T
    lams = np.broadcast_to(np.asarray(penalty, dtype=float), (targets.shape[1],))
    samples = S.shape[0]
    return np.stack(
        [
            np.linalg.solve(
                gram + max(samples * float(lam), RIDGE_SCALE) * identity, rhs[:, c]
            )
            for c, lam in enumerate(lams)
        ]
    )


def approximation_report(
    trace: SimTrace,
    networks: Sequence[RbfNetwork],
    nn_input: str = "nu",
    start_time: float | None = None,
    penalties: Sequence[ArrayLike] | None = None,
) -> ApproximationReport:
    """How well constant weights reproduce the ground-truth nonlinearity.

    Also reports the online network output recorded during the run and a ridge
    least-squares fit on the same samples. ``penalties`` holds one per-channel
    ridge penalty per agent (see ``ridge_fit``); without it the fit is the
    plain least-squares bound of what constant weights on this lattice reach.
    """
    if penalties is not None and len(penalties) != len(networks):
        raise ValueError(f"{len(penalties)} penalties for {len(networks)} networks")
    if not trace.has_oracle() or not np.any(trace.F):
        raise MissingOracleSeriesError("trace carries no ground-truth nonlinearity series")
    if len(networks) != trace.n_agents:
        raise ValueError(f"{len(networks)} networks for {trace.n_agents} agents")
    if start_time is None:
        start_time = float(trace.t[steady_mask(trace.t)][0])
    window = trace.t >= start_time
    if np.count_nonzero(window) < 2:
        raise DegenerateSegmentError(f"fewer than 2 samples after t={start_time:g}")

    inputs = _network_inputs(trace, nn_input)[window]
    learned, online, oracle = [], [], []
    for k, net in enumerate(networks):
        S = regressor_matrix(net.lattice, inputs[:, k])
        F = trace.F[window, k]
        predicted = S @ net.weights.T
        penalty = None if penalties is None else penalties[k]
        fitted = S @ ridge_fit(S, F, penalty).T
        learned.append([_stats(relative_error(predicted[:, c], F[:, c])) for c in range(3)])
        online.append(
            [_stats(relative_error(trace.nn_out[window, k, c], F[:, c])) for c in range(3)]
        )
        oracle.append([_stats(relative_error(fitted[:, c], F[:, c])) for c in range(3)])
    return ApproximationReport(learned, online, oracle, float(start_time))


def weight_settling(trace: SimTrace, fraction: float = STEADY_FRACTION) -> WeightSettling:
    """Per agent and channel drift and spread of the weights over the final window.

    ``drift`` is ``||W(t_b) - W(t_a)|| / ||W(t_b)||``; ``std_ratio`` is the
    largest per-weight standard deviation over the channel's largest ``|W(t_b)|``.
    """
    if trace.weights.shape[0] < 2:
        raise DegenerateSegmentError("need at least 2 weight snapshots")
    inside = steady_mask(trace.weight_times, fraction)
    snaps = trace.weights[inside]
    if snaps.shape[0] < 2:
        snaps = trace.weights[-2:]
    first, last = snaps[0], snaps[-1]

    def scaled(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
        out = np.where(numerator > 0.0, np.inf, 0.0)
        np.divide(numerator, denominator, out=out, where=denominator > 0.0)
        return out

    drift = scaled(np.linalg.norm(last - first, axis=2), np.linalg.norm(last, axis=2))
    std_ratio = scaled(snaps.std(axis=0).max(axis=2), np.abs(last).max(axis=2))
    return WeightSettling(drift, std_ratio)


def lyapunov_diagnostic(
    trace: SimTrace,
    params: Sequence[VehicleParams],
    start_time: float | None = None,
) -> LyapunovSeries:
    """``V = z1'z1/2 + z2'M z2/2`` per agent and the share of compliant steps.

    A step after ``start_time`` is compliant when ``V`` does not increase or
    stays within ``RESIDUAL_MARGIN`` times the largest ``V`` of the final
    quarter, the residual set the errors end up in.
    """
    masses = np.stack([mass_matrix(p) for p in params])
    values = 0.5 * np.einsum("snk,snk->sn", trace.z1, trace.z1) + 0.5 * np.einsum(
        "snk,nkj,snj->sn", trace.z2, masses, trace.z2
    )
    window = trace.t >= (trace.t[0] if start_time is None else start_time)
    tail = values[window]
    if tail.shape[0] < 2:
        ones = np.ones(trace.n_agents)
        return LyapunovSeries(values, ones, ones.copy())
    residual = RESIDUAL_MARGIN * values[steady_mask(trace.t)].max(axis=0)
    steps = np.diff(tail, axis=0) <= 0.0
    decreasing = np.mean(steps, axis=0)
    compliant = np.mean(steps | (tail[1:] <= residual), axis=0)
    return LyapunovSeries(values, decreasing, compliant)


@dataclass(eq=False)
class ConvergenceReport:
    """Everything the verify pipeline and the ``analyze`` command report."""

    scenario: str
    n_agents: int
    orbit_radius: float
    formation_mean: np.ndarray
    formation_max: np.ndarray
    settling_time: np.ndarray
    observer_fits: list[DecayFit | None]
    observer_state_ratio: np.ndarray
    observer_matrix_ratio: np.ndarray
    weights: WeightSettling | None
    approximation: ApproximationReport | None
    lyapunov: LyapunovSeries | None
    checks: dict[str, bool] = field(default_factory=dict)

    def passed(self) -> bool:
        return all(self.checks.values())

    def to_text(self) -> str:
        """One ``key=value`` line per metric, in a fixed order."""
        lines = [
            f"scenario={self.scenario}",
            f"agents={self.n_agents}",
            f"orbit_radius={self.orbit_radius:.9g}",
        ]
        for k in range(self.n_agents):
            a = f"agent{k + 1}"
            lines.append(f"{a}.formation_error_mean={self.formation_mean[k]:.9g}")
            lines.append(f"{a}.formation_error_max={self.formation_max[k]:.9g}")
            lines.append(f"{a}.settling_time={self.settling_time[k]:.9g}")
            fit = self.observer_fits[k]
            if fit is not None:
                lines.append(f"{a}.observer_rate={fit.rate:.9g}")
                lines.append(f"{a}.observer_fit_r2={fit.r_squared:.9g}")
            lines.append(f"{a}.observer_state_ratio={self.observer_state_ratio[k]:.9g}")
            lines.append(f"{a}.observer_matrix_ratio={self.observer_matrix_ratio[k]:.9g}")
            if self.weights is not None:
                for c in range(3):
                    lines.append(f"{a}.weight_drift_{c}={self.weights.drift[k, c]:.9g}")
                    lines.append(f"{a}.weight_std_ratio_{c}={self.weights.std_ratio[k, c]:.9g}")
            if self.approximation is not None:
                for c in range(3):
                    for label, table in (
                        ("learned", self.approximation.learned),
                        ("online", self.approximation.online),
                        ("oracle", self.approximation.oracle),
                    ):
                        s = table[k][c]
                        lines.append(f"{a}.{label}_error_median_{c}={s.median:.9g}")
                        lines.append(f"{a}.{label}_error_p95_{c}={s.p95:.9g}")
            if self.lyapunov is not None:
                lines.append(f"{a}.lyapunov_decreasing={self.lyapunov.decreasing_fraction[k]:.9g}")
                lines.append(f"{a}.lyapunov_compliant={self.lyapunov.compliant_fraction[k]:.9g}")
        for name in sorted(self.checks):
            lines.append(f"check.{name}={'PASS' if self.checks[name] else 'FAIL'}")
        return "\n".join(lines) + "\n"


def build_report(
    trace: SimTrace,
    cfg: SimConfig,
    networks: Sequence[RbfNetwork] | None = None,
    logger: Logger | None = None,
) -> ConvergenceReport:
    """Compute every metric and check it against the scenario's thresholds."""
    log = LoggingContext(logger, "ANALYSIS") if logger else None
    settings = cfg.analysis
    thr = settings.threshold
    formation = formation_error_series(trace, cfg.offsets)
    radius = orbit_radius(trace)
    settling = settling_times(trace, cfg.offsets, settings.transient_factor)

    fits: list[DecayFit | None] = []
    for k in range(trace.n_agents):
        try:
            fits.append(fit_exponential_decay(trace.t, trace.err_chi[:, k]))
        except DegenerateSegmentError as e:
            if log:
                log.warning(f"agent {k + 1}: observer decay fit skipped ({e})")
            fits.append(None)
    state_ratio, matrix_ratio = observer_final_ratios(trace)

    weights = weight_settling(trace) if trace.weights.shape[0] >= 2 else None

    approximation = None
    if networks is not None:
        try:
            penalties = [g.sigma * np.diag(g.K2) for g in cfg.controller_gains]
            approximation = approximation_report(
                trace, networks, cfg.nn.input, float(np.max(settling)), penalties
            )
        except (MissingOracleSeriesError, DegenerateSegmentError) as e:
            if log:
                log.warning(str(e))

    lyapunov = None
    if cfg.plants:
        start = float(np.max(settling)) if settling.size else None
        lyapunov = lyapunov_diagnostic(trace, cfg.params, start)

    checks: dict[str, bool] = {
        "observer_convergence": bool(
            np.all(state_ratio <= thr("observer_final_ratio"))
            and np.all(matrix_ratio <= thr("observer_final_ratio"))
            and all(
                f is not None and f.rate < 0.0 and f.r_squared >= thr("observer_fit_r2")
                for f in fits
            )
        )
    }
    if cfg.plants:
        checks["formation_tracking"] = bool(
            np.all(formation.steady_mean <= thr("formation_mean_fraction") * radius)
            and np.all(formation.steady_max <= thr("formation_max_fraction") * radius)
        )
    if weights is not None and cfg.mode == "adaptive" and cfg.plants:
        checks["weight_convergence"] = bool(
            np.all(weights.drift <= thr("weight_drift_fraction"))
            and np.all(weights.std_ratio <= thr("weight_std_fraction"))
        )
    if lyapunov is not None:
        checks["lyapunov_decrease"] = bool(
            np.all(lyapunov.compliant_fraction >= thr("lyapunov_decreasing_fraction"))
        )
    if approximation is not None:
        learned = np.array([[s.median for s in row] for row in approximation.learned])
        oracle = np.array([[s.median for s in row] for row in approximation.oracle])
        checks["learning_accuracy"] = bool(
            np.all(learned <= thr("approximation_median"))
            and np.all(learned <= thr("approximation_oracle_factor") * np.maximum(oracle, 1e-12))
        )

    report = ConvergenceReport(
        scenario=cfg.name,
        n_agents=trace.n_agents,
        orbit_radius=radius,
        formation_mean=formation.steady_mean,
        formation_max=formation.steady_max,
        settling_time=settling,
        observer_fits=fits,
        observer_state_ratio=state_ratio,
        observer_matrix_ratio=matrix_ratio,
        weights=weights,
        approximation=approximation,
        lyapunov=lyapunov,
        checks=checks,
    )
    if log:
        failed = [name for name, ok in checks.items() if not ok]
        log.info(
            f"Report for '{cfg.name}': {len(checks) - len(failed)}/{len(checks)} checks pass"
            + (f", failing: {', '.join(failed)}" if failed else "")
        )
    return report


def write_report(report: ConvergenceReport, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(report.to_text(), encoding="utf-8", newline="\n")
    return target


# Figure data -----------------------------------------------------------------


def estimator_figure(trace: SimTrace) -> pd.DataFrame:
    """Leader pose and every agent's estimate of it."""
    data: dict[str, np.ndarray] = {
        "t": trace.t,
        "leader_x": trace.chi0[:, 0],
        "leader_y": trace.chi0[:, 1],
        "leader_psi_deg": np.degrees(trace.chi0[:, 2]),
    }
    for k in range(trace.n_agents):
        data[f"a{k + 1}_x_hat"] = trace.chi_hat[:, k, 0]
        data[f"a{k + 1}_y_hat"] = trace.chi_hat[:, k, 1]
        data[f"a{k + 1}_psi_hat_deg"] = np.degrees(trace.chi_hat[:, k, 2])
    return pd.DataFrame(data)


def tracking_figure(trace: SimTrace, offsets: FormationOffsets) -> pd.DataFrame:
    """Each agent's slot on the formation and its actual pose."""
    data: dict[str, np.ndarray] = {"t": trace.t}
    for k in range(trace.n_agents):
        ref = trace.chi0[:, :3] + offsets.d_star[k]
        a = f"a{k + 1}"
        data[f"{a}_x_ref"] = ref[:, 0]
        data[f"{a}_y_ref"] = ref[:, 1]
        data[f"{a}_psi_ref_deg"] = np.degrees(ref[:, 2])
        data[f"{a}_x"] = trace.eta[:, k, 0]
        data[f"{a}_y"] = trace.eta[:, k, 1]
        data[f"{a}_psi_deg"] = np.degrees(trace.eta[:, k, 2])
    return pd.DataFrame(data)


def weight_norm_figure(trace: SimTrace) -> pd.DataFrame:
    data: dict[str, np.ndarray] = {"t": trace.t}
    for k in range(trace.n_agents):
        for c in range(3):
            data[f"a{k + 1}_wnorm_{c}"] = trace.weight_norm[:, k, c]
    return pd.DataFrame(data)


def approximation_figure(
    trace: SimTrace, networks: Sequence[RbfNetwork] | None, nn_input: str = "nu"
) -> pd.DataFrame:
    """Ground truth, online output and (if given) constant-weight output."""
    data: dict[str, np.ndarray] = {"t": trace.t}
    inputs = _network_inputs(trace, nn_input)
    for k in range(trace.n_agents):
        learned = None
        if networks is not None:
            learned = regressor_matrix(networks[k].lattice, inputs[:, k]) @ networks[k].weights.T
        for c in range(3):
            a = f"a{k + 1}"
            data[f"{a}_F_{c}"] = trace.F[:, k, c]
            data[f"{a}_online_{c}"] = trace.nn_out[:, k, c]
            if learned is not None:
                data[f"{a}_learned_{c}"] = learned[:, c]
    return pd.DataFrame(data)


def write_figures(
    trace: SimTrace,
    cfg: SimConfig,
    directory: str | Path,
    networks: Sequence[RbfNetwork] | None = None,
    replay: SimTrace | None = None,
) -> list[Path]:
    """Write the per-figure CSVs into ``directory``."""
    out = Path(directory)
    written = [
        write_figure_csv(estimator_figure(trace), out / "estimator.csv"),
        write_figure_csv(tracking_figure(trace, cfg.offsets), out / "tracking.csv"),
        write_figure_csv(weight_norm_figure(trace), out / "weight_norms.csv"),
    ]
    if trace.has_oracle() and np.any(trace.F):
        written.append(
            write_figure_csv(
                approximation_figure(trace, networks, cfg.nn.input),
                out / "approximation.csv",
            )
        )
    if replay is not None:
        written.append(
            write_figure_csv(tracking_figure(replay, cfg.offsets), out / "replay_tracking.csv")
        )
    return written
