#!/usr/bin/env python3
"""
Simulation engine: global state assembly, fixed-step RK4 and trace recording.

Global state layout, version 1 (``StateLayout``)::

    [ chi0 (6)
    | per agent: eta (3), nu (3)                      N blocks of 6
    | per agent: chi_hat (6), vec(A_hat) (36, row-major)   N blocks of 42
    | per agent: W channel 0 (P), W channel 1 (P), W channel 2 (P) ]

Each derivative evaluation runs three passes over the agents: observer
derivatives, observer second derivatives, then controller, plant and weight
derivatives. Every pass reads only what the modelled protocol allows, and the
agents are visited in ascending order so results are bit-reproducible.
"""

import math
import time
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .controller import (
    ControllerGains,
    FormationOffsets,
    adaptation_derivative,
    alpha_dot,
    backstepping_errors,
    gain_relation_message,
    ddl_control,
    pretrained_control,
    true_nonlinearity_oracle,
)
from .dynamics import (
    CORIOLIS_VARIANTS,
    UNCERTAINTIES,
    AgentState,
    LeaderModel,
    RestoringForce,
    VehicleParams,
    mass_matrix,
    vehicle_derivative,
    zero_restoring,
)
from .errors import (
    DimensionMismatchError,
    GainRelationWarning,
    LeaderStabilityWarning,
    MissingWeightsFileError,
    NonFiniteStateError,
    SimulationInterrupted,
    SpanningTreeWarning,
    UnknownUncertaintyIdError,
)
from .estimator import (
    ObserverGains,
    ObserverState,
    estimation_errors,
    observer_derivative,
    observer_second_derivative,
)
from .graph import Topology, has_leader_rooted_spanning_tree
from .logger import Logger, LoggingContext
from .metrics import SimulationMetrics
from .rbf import (
    RbfLattice,
    RbfNetwork,
    average_weights,
    build_lattice,
    lattice_regressor,
    load_weights,
    save_weights,
)

LAYOUT_VERSION = 1
CONTROLLER_MODES = ("adaptive", "pretrained")
NN_INPUTS = ("nu", "chi")

Derivative = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class NnSpec:
    """Lattice specification of every agent's network."""

    input: str
    bounds: np.ndarray
    counts: tuple[int, ...]
    width: float

    def __post_init__(self) -> None:
        if self.input not in NN_INPUTS:
            raise ValueError(f"nn input must be one of {NN_INPUTS}, got {self.input!r}")
        expected = 3 if self.input == "nu" else 6
        if len(self.counts) != expected:
            raise DimensionMismatchError(
                f"nn input {self.input!r} needs {expected} axes, got {len(self.counts)}"
            )

    def lattice(self) -> RbfLattice:
        return build_lattice(self.bounds, self.counts, self.width)


# Acceptance thresholds; scenarios may override any of them.
DEFAULT_THRESHOLDS: dict[str, float] = {
    "observer_final_ratio": 1e-3,
    "observer_fit_r2": 0.99,
    "formation_mean_fraction": 0.01,
    "formation_max_fraction": 0.03,
    "weight_drift_fraction": 0.01,
    "weight_std_fraction": 0.01,
    "approximation_median": 0.15,
    "approximation_oracle_factor": 3.0,
    "replay_error_factor": 2.0,
    "leader_tolerance": 1e-6,
    "rk4_ratio_low": 12.0,
    "rk4_ratio_high": 20.0,
    "lyapunov_decreasing_fraction": 0.95,
}


@dataclass(frozen=True)
class AnalysisSettings:
    """Post-run settings carried with a scenario."""

    learn_window: tuple[float, float] | None = None
    transient_factor: float = 2.0
    thresholds: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = sorted(set(self.thresholds) - set(DEFAULT_THRESHOLDS))
        if unknown:
            raise ValueError(f"unknown threshold(s): {', '.join(unknown)}")

    def threshold(self, name: str) -> float:
        return float(self.thresholds.get(name, DEFAULT_THRESHOLDS[name]))


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything a run needs; per-agent tuples are indexed by follower (0-based)."""

    name: str
    topology: Topology
    params: tuple[VehicleParams, ...]
    leader: LeaderModel
    observer_gains: tuple[ObserverGains, ...]
    controller_gains: tuple[ControllerGains, ...]
    mode: str
    nn: NnSpec
    offsets: FormationOffsets
    initial: tuple[AgentState, ...]
    dt: float
    t_end: float
    decimation: int = 1
    weight_decimation: int = 1
    weights_path: str | None = None
    plants: bool = True
    coriolis: str = "reference"
    seed: int = 0
    restoring: RestoringForce = zero_restoring
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    pretrained: tuple[RbfNetwork, ...] | None = None

    def __post_init__(self) -> None:
        n = self.topology.n_followers
        for label, seq in (
            ("params", self.params),
            ("observer_gains", self.observer_gains),
            ("controller_gains", self.controller_gains),
            ("initial", self.initial),
        ):
            if len(seq) != n:
                raise DimensionMismatchError(
                    f"{label}: {len(seq)} entries for {n} followers"
                )
        if self.offsets.d_star.shape[0] != n:
            raise DimensionMismatchError(
                f"offsets: {self.offsets.d_star.shape[0]} entries for {n} followers"
            )
        if self.mode not in CONTROLLER_MODES:
            raise ValueError(
                f"controller mode must be one of {CONTROLLER_MODES}, got {self.mode!r}"
            )
        if self.coriolis not in CORIOLIS_VARIANTS:
            raise ValueError(f"coriolis must be one of {CORIOLIS_VARIANTS}, got {self.coriolis!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.decimation < 1 or self.weight_decimation < 1:
            raise ValueError("decimation and weight_decimation must be at least 1")

    @property
    def n_agents(self) -> int:
        return self.topology.n_followers

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class StateLayout:
    """Offsets and named views into the flat global state vector."""

    version = LAYOUT_VERSION
    OBSERVER_BLOCK = 42

    def __init__(self, n_agents: int, n_nodes: int) -> None:
        self.n_agents = n_agents
        self.n_nodes = n_nodes
        self.plant_start = 6
        self.observer_start = self.plant_start + 6 * n_agents
        self.weights_start = self.observer_start + self.OBSERVER_BLOCK * n_agents
        self.size = self.weights_start + 3 * n_nodes * n_agents

    def leader(self, x: np.ndarray) -> np.ndarray:
        return x[:6]

    def plants(self, x: np.ndarray) -> np.ndarray:
        """``(N, 6)`` view of ``[eta, nu]`` per agent."""
        return x[self.plant_start : self.observer_start].reshape(self.n_agents, 6)

    def observers(self, x: np.ndarray) -> np.ndarray:
        return x[self.observer_start : self.weights_start].reshape(
            self.n_agents, self.OBSERVER_BLOCK
        )

    def chi_hat(self, x: np.ndarray) -> np.ndarray:
        return self.observers(x)[:, :6]

    def A_hat(self, x: np.ndarray) -> np.ndarray:
        return self.observers(x)[:, 6:].reshape(self.n_agents, 6, 6)

    def weights(self, x: np.ndarray) -> np.ndarray:
        """``(N, 3, P)`` view of every agent's weight matrix."""
        return x[self.weights_start :].reshape(self.n_agents, 3, self.n_nodes)

    def component_name(self, k: int) -> str:
        """Human-readable name of global index ``k``."""
        if not 0 <= k < self.size:
            raise IndexError(f"state index {k} outside 0..{self.size - 1}")
        if k < self.plant_start:
            return f"leader.chi0[{k}]"
        if k < self.observer_start:
            agent, offset = divmod(k - self.plant_start, 6)
            part = "eta" if offset < 3 else "nu"
            return f"agent{agent + 1}.{part}[{offset % 3}]"
        if k < self.weights_start:
            agent, offset = divmod(k - self.observer_start, self.OBSERVER_BLOCK)
            if offset < 6:
                return f"agent{agent + 1}.chi_hat[{offset}]"
            row, col = divmod(offset - 6, 6)
            return f"agent{agent + 1}.A_hat[{row},{col}]"
        agent, offset = divmod(k - self.weights_start, 3 * self.n_nodes)
        channel, node = divmod(offset, self.n_nodes)
        return f"agent{agent + 1}.W[{channel},{node}]"


def _finite_stage(x: np.ndarray) -> np.ndarray:
    finite = np.isfinite(x)
    if not finite.all():
        raise NonFiniteStateError(None, int(np.flatnonzero(~finite)[0]))
    return x


def step_rk4(
    derivative_fn: Derivative, state: np.ndarray, dt: float, k1: np.ndarray | None = None
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step.

    ``k1`` may be supplied when the caller has already evaluated the
    derivative at ``state``. Every stage is checked before the derivative sees
    it, so a blow-up is reported at the component that went non-finite first.

    Raises:
        NonFiniteStateError: With ``component`` set to the first bad index, or
            to the largest-magnitude index when an overflow is raised instead
    """
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            if k1 is None:
                k1 = derivative_fn(state)
            k2 = derivative_fn(_finite_stage(state + (0.5 * dt) * k1))
            k3 = derivative_fn(_finite_stage(state + (0.5 * dt) * k2))
            k4 = derivative_fn(_finite_stage(state + dt * k3))
            return _finite_stage(state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    except (OverflowError, FloatingPointError) as e:
        raise NonFiniteStateError(None, int(np.argmax(np.abs(state)))) from e


@dataclass(eq=False)
class SimTrace:
    """Decimated record of a run. Per-agent arrays are ``(samples, N, ...)``."""

    t: np.ndarray
    chi0: np.ndarray
    eta: np.ndarray
    nu: np.ndarray
    chi_hat: np.ndarray
    err_chi: np.ndarray
    err_A: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    tau: np.ndarray
    weight_norm: np.ndarray
    F: np.ndarray
    nn_out: np.ndarray
    weight_times: np.ndarray
    weights: np.ndarray
    adaptation_evaluations: int = 0

    @property
    def n_agents(self) -> int:
        return self.eta.shape[1]

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    def has_oracle(self) -> bool:
        return self.F.size > 0 and bool(np.all(np.isfinite(self.F)))


def scenario_warnings(cfg: SimConfig) -> list[str]:
    """Emit (through ``warnings``) and return every scenario-quality warning."""
    found: list[tuple[str, type[Warning]]] = []
    if not cfg.leader.is_marginally_stable():
        found.append(
            (
                "leader matrix has eigenvalues off the imaginary axis: "
                f"{np.linalg.eigvals(cfg.leader.A0)}",
                LeaderStabilityWarning,
            )
        )
    if not has_leader_rooted_spanning_tree(cfg.topology):
        found.append(
            (
                "topology has no spanning tree rooted at the leader; "
                "some followers never see the reference",
                SpanningTreeWarning,
            )
        )
    for i, gains in enumerate(cfg.controller_gains, start=1):
        message = gain_relation_message(gains, agent=i)
        if message:
            found.append((message, GainRelationWarning))
    for message, category in found:
        warnings.warn(message, category, stacklevel=2)
    return [message for message, _ in found]


def weights_file_path(prefix: str | Path, agent: int) -> Path:
    """Weights file of follower ``agent`` (1-based) under ``prefix``."""
    return Path(f"{prefix}.agent{agent}.rbfw")


def load_pretrained_networks(prefix: str | Path | None, n_agents: int) -> tuple[RbfNetwork, ...]:
    if prefix is None:
        raise MissingWeightsFileError("<no weights path configured>")
    return tuple(load_weights(weights_file_path(prefix, i)) for i in range(1, n_agents + 1))


def learned_networks(
    trace: SimTrace, window: tuple[float, float], lattice: RbfLattice
) -> list[RbfNetwork]:
    """Window-averaged constant weights, one network per agent."""
    averaged = average_weights(trace.weight_times, trace.weights, window)
    return [RbfNetwork(lattice, averaged[i]) for i in range(averaged.shape[0])]


def export_learned_weights(
    trace: SimTrace,
    window: tuple[float, float],
    path_prefix: str | Path,
    lattice: RbfLattice,
) -> list[Path]:
    """Average the weights over ``window`` and write one weights file per agent."""
    return [
        save_weights(net, weights_file_path(path_prefix, i))
        for i, net in enumerate(learned_networks(trace, window, lattice), start=1)
    ]


class Simulator:
    """Integrates one scenario and records its trace."""

    def __init__(
        self,
        cfg: SimConfig,
        logger: Logger | None = None,
        metrics: SimulationMetrics | None = None,
        progress_interval: int = 10,
    ) -> None:
        self.cfg = cfg
        self.engine_logger = LoggingContext(logger, "ENGINE") if logger else None
        self.metrics = metrics or SimulationMetrics(logger)
        self.progress_interval = progress_interval
        self._stop_requested = False

        self.warnings = scenario_warnings(cfg)
        for message in self.warnings:
            self._log("warning", message)

        for p in cfg.params:
            if p.uncertainty_id not in UNCERTAINTIES:
                raise UnknownUncertaintyIdError(p.uncertainty_id)
        self.mass = tuple(mass_matrix(p) for p in cfg.params)

        if cfg.mode == "pretrained":
            frozen = cfg.pretrained or load_pretrained_networks(cfg.weights_path, cfg.n_agents)
            if len(frozen) != cfg.n_agents:
                raise DimensionMismatchError(
                    f"{len(frozen)} pretrained networks for {cfg.n_agents} agents"
                )
            self.lattice = frozen[0].lattice
            for i, net in enumerate(frozen, start=1):
                if not net.lattice.same_grid(self.lattice) or net.channels != 3:
                    raise DimensionMismatchError(f"agent {i}: pretrained network grid differs")
            if self.lattice.input_dim != len(cfg.nn.counts):
                raise DimensionMismatchError(
                    f"pretrained networks take {self.lattice.input_dim}-D input, "
                    f"scenario nn input {cfg.nn.input!r} is {len(cfg.nn.counts)}-D"
                )
            if not self.lattice.same_grid(cfg.nn.lattice()):
                raise DimensionMismatchError(
                    f"pretrained lattice {self.lattice.counts} on "
                    f"{self.lattice.bounds.tolist()} (width {self.lattice.width:g}) differs "
                    f"from the scenario nn section"
                )
            self.frozen: tuple[RbfNetwork, ...] | None = tuple(frozen)
        else:
            self.lattice = cfg.nn.lattice()
            self.frozen = None

        self.layout = StateLayout(cfg.n_agents, self.lattice.n_nodes)
        self._adaptive = cfg.mode == "adaptive" and cfg.plants

    def _log(self, level: str, message: str) -> None:
        if self.engine_logger:
            getattr(self.engine_logger, level)(message)

    def request_stop(self) -> None:
        """Ask the running integration to stop at the next step."""
        self._stop_requested = True

    def initial_state(self) -> np.ndarray:
        cfg, layout = self.cfg, self.layout
        x = np.zeros(layout.size)
        layout.leader(x)[:] = cfg.leader.chi0
        for i, s in enumerate(cfg.initial):
            layout.plants(x)[i] = s.chi
        if self.frozen is not None:
            for i, net in enumerate(self.frozen):
                layout.weights(x)[i] = net.weights
        return x

    def _network_input(self, s: AgentState) -> np.ndarray:
        return s.nu if self.cfg.nn.input == "nu" else s.chi

    def derivative(self, x: np.ndarray, signals: dict[str, np.ndarray] | None = None) -> np.ndarray:
        """Global state derivative; fills ``signals`` with recorded quantities if given."""
        cfg, layout = self.cfg, self.layout
        topology = cfg.topology
        n = cfg.n_agents
        dx = np.zeros_like(x)
        self.metrics.derivative_evaluations.inc()

        chi0 = layout.leader(x)
        A0 = cfg.leader.A0
        leader_dot = A0 @ chi0
        layout.leader(dx)[:] = leader_dot

        chi_hat = layout.chi_hat(x)
        A_hat = layout.A_hat(x)
        states: dict[int, ObserverState] = {0: ObserverState(chi0, A0)}
        for i in range(1, n + 1):
            states[i] = ObserverState(chi_hat[i - 1], A_hat[i - 1])

        # Pass 1: observer derivatives
        first: dict[int, tuple[np.ndarray, np.ndarray]] = {0: (leader_dot, np.zeros((6, 6)))}
        chi_hat_dot = layout.chi_hat(dx)
        A_hat_dot = layout.A_hat(dx)
        for i in range(1, n + 1):
            first[i] = observer_derivative(
                i, states[i], states, topology, cfg.observer_gains[i - 1]
            )
            chi_hat_dot[i - 1] = first[i][0]
            A_hat_dot[i - 1] = first[i][1]

        if not cfg.plants:
            return dx

        # Pass 2: observer second derivatives
        second = {
            i: observer_second_derivative(i, first, states[i], topology, cfg.observer_gains[i - 1])
            for i in range(1, n + 1)
        }

        # Pass 3: controller, plant and weights
        plants = layout.plants(x)
        plants_dot = layout.plants(dx)
        weights = layout.weights(x)
        weights_dot = layout.weights(dx)
        for i in range(1, n + 1):
            k = i - 1
            s = AgentState(plants[k, :3], plants[k, 3:])
            gains = cfg.controller_gains[k]
            d_star = cfg.offsets[i]
            eta_hat_d = states[i].chi_hat[:3] + d_star
            eta_hat_d_dot = first[i][0][:3]
            eta_hat_d_ddot = second[i][:3]
            z1, _, z2 = backstepping_errors(s, eta_hat_d, eta_hat_d_dot, gains)

            net = RbfNetwork(self.lattice, weights[k])
            Z = self._network_input(s)
            S = lattice_regressor(self.lattice, Z)
            psi = float(s.eta[2])
            if self.frozen is None:
                tau = ddl_control(z1, z2, psi, net, Z, gains, S)
            else:
                tau = pretrained_control(z1, z2, psi, net, Z, gains, S)
            if self._adaptive:
                weights_dot[k] = adaptation_derivative(net, Z, z2, gains, S)

            eta_dot, nu_dot = vehicle_derivative(
                cfg.params[k], s, tau, cfg.restoring, cfg.coriolis, self.mass[k]
            )
            plants_dot[k, :3] = eta_dot
            plants_dot[k, 3:] = nu_dot

            if signals is not None:
                ad = alpha_dot(s, z1, eta_hat_d_dot, eta_hat_d_ddot, gains)
                signals["z1"][k] = z1
                signals["z2"][k] = z2
                signals["tau"][k] = tau
                signals["nn_out"][k] = net.weights @ S
                signals["F"][k] = true_nonlinearity_oracle(
                    cfg.params[k], s, ad, cfg.restoring, cfg.coriolis, self.mass[k]
                )
        if self._adaptive:
            self.metrics.adaptation_evaluations.inc(n)
        return dx

    def run(self) -> SimTrace:
        cfg, layout = self.cfg, self.layout
        n, n_steps = cfg.n_agents, cfg.n_steps
        if not math.isclose(n_steps * cfg.dt, cfg.t_end, rel_tol=1e-9, abs_tol=1e-12):
            self._log(
                "warning",
                f"t_end={cfg.t_end} is not a multiple of dt={cfg.dt}; "
                f"running {n_steps} steps to t={n_steps * cfg.dt:g}",
            )
        n_samples = n_steps // cfg.decimation + 1
        weight_samples = list(range(0, n_samples, cfg.weight_decimation))
        if weight_samples[-1] != n_samples - 1:
            weight_samples.append(n_samples - 1)
        weight_slot = {s: k for k, s in enumerate(weight_samples)}

        rec = _Recorder(n_samples, n, len(weight_samples), self.lattice.n_nodes)
        self._log(
            "info",
            f"Running '{cfg.name}': {n} agents, {self.lattice.n_nodes} centers/agent, "
            f"mode={cfg.mode}, dt={cfg.dt:g}, t_end={cfg.t_end:g} ({n_steps} steps, "
            f"{n_samples} samples), state size {layout.size}",
        )

        progress_every = max(1, n_steps * self.progress_interval // 100)
        wall_start = time.perf_counter()
        x = self.initial_state()
        sample = 0
        for step in range(n_steps + 1):
            if self._stop_requested:
                raise SimulationInterrupted(f"stopped at t={step * cfg.dt:g} s")
            t = step * cfg.dt
            k1 = None
            if step % cfg.decimation == 0:
                signals = rec.signals(sample)
                with np.errstate(over="ignore", invalid="ignore"):
                    k1 = self.derivative(x, signals)
                self._record(rec, sample, t, x)
                if sample in weight_slot:
                    slot = weight_slot[sample]
                    rec.weight_times[slot] = t
                    rec.weights[slot] = layout.weights(x)
                sample += 1
            if step == n_steps:
                break
            try:
                x = step_rk4(self.derivative, x, cfg.dt, k1)
            except NonFiniteStateError as e:
                component = layout.component_name(int(e.component))
                self._log("error", f"Non-finite state at t={t + cfg.dt:g} s in {component}")
                raise NonFiniteStateError(t + cfg.dt, component) from e
            self.metrics.steps.inc()
            self.metrics.simulated_time.set((step + 1) * cfg.dt)
            if (step + 1) % progress_every == 0 and step + 1 < n_steps:
                self._log(
                    "info",
                    f"t={(step + 1) * cfg.dt:.3f}/{cfg.t_end:g} s "
                    f"({100 * (step + 1) // n_steps}%)",
                )

        elapsed = time.perf_counter() - wall_start
        self.metrics.wall_time.set(elapsed)
        trace = rec.finish(int(self.metrics.value("auvsim_weight_adaptation_evaluations")))
        if cfg.plants:
            self.metrics.max_formation_error.set(float(_last_formation_error(trace, cfg)))
        self._log("info", f"Finished '{cfg.name}' in {elapsed:.2f} s wall clock")
        return trace

    def _record(self, rec: "_Recorder", sample: int, t: float, x: np.ndarray) -> None:
        layout = self.layout
        plants = layout.plants(x)
        chi0 = layout.leader(x)
        rec.t[sample] = t
        rec.chi0[sample] = chi0
        rec.eta[sample] = plants[:, :3]
        rec.nu[sample] = plants[:, 3:]
        rec.chi_hat[sample] = layout.chi_hat(x)
        leader = LeaderModel(self.cfg.leader.A0, chi0)
        observers = [ObserverState(c, a) for c, a in zip(layout.chi_hat(x), layout.A_hat(x))]
        rec.err_chi[sample], rec.err_A[sample] = estimation_errors(observers, leader)
        rec.weight_norm[sample] = np.linalg.norm(layout.weights(x), axis=2)


class _Recorder:
    """Preallocated trace buffers."""

    def __init__(self, n_samples: int, n_agents: int, n_snapshots: int, n_nodes: int) -> None:
        s, n = n_samples, n_agents
        self.t = np.zeros(s)
        self.chi0 = np.zeros((s, 6))
        self.eta = np.zeros((s, n, 3))
        self.nu = np.zeros((s, n, 3))
        self.chi_hat = np.zeros((s, n, 6))
        self.err_chi = np.zeros((s, n))
        self.err_A = np.zeros((s, n))
        self.z1 = np.zeros((s, n, 3))
        self.z2 = np.zeros((s, n, 3))
        self.tau = np.zeros((s, n, 3))
        self.weight_norm = np.zeros((s, n, 3))
        self.F = np.zeros((s, n, 3))
        self.nn_out = np.zeros((s, n, 3))
        self.weight_times = np.zeros(n_snapshots)
        self.weights = np.zeros((n_snapshots, n, 3, n_nodes))

    def signals(self, sample: int) -> dict[str, np.ndarray]:
        return {
            "z1": self.z1[sample],
            "z2": self.z2[sample],
            "tau": self.tau[sample],
            "F": self.F[sample],
            "nn_out": self.nn_out[sample],
        }

    def finish(self, adaptation_evaluations: int) -> SimTrace:
        return SimTrace(
            t=self.t,
            chi0=self.chi0,
            eta=self.eta,
            nu=self.nu,
            chi_hat=self.chi_hat,
            err_chi=self.err_chi,
            err_A=self.err_A,
            z1=self.z1,
            z2=self.z2,
            tau=self.tau,
            weight_norm=self.weight_norm,
            F=self.F,
            nn_out=self.nn_out,
            weight_times=self.weight_times,
            weights=self.weights,
            adaptation_evaluations=adaptation_evaluations,
        )


def _last_formation_error(trace: SimTrace, cfg: SimConfig) -> float:
    target = trace.chi0[-1, :3][None, :] + cfg.offsets.d_star
    return float(np.linalg.norm(trace.eta[-1] - target, axis=1).max())


def run_scenario(
    cfg: SimConfig,
    logger: Logger | None = None,
    metrics: SimulationMetrics | None = None,
    progress_interval: int = 10,
) -> SimTrace:
    """Integrate ``cfg`` from t=0 to ``t_end`` and return the decimated trace."""
    return Simulator(cfg, logger, metrics, progress_interval).run()


def with_overrides(cfg: SimConfig, **changes: object) -> SimConfig:
    """Copy of ``cfg`` with some fields replaced (validation re-runs)."""
    return replace(cfg, **changes)  # type: ignore[arg-type]
