#!/usr/bin/env python3
"""
Scenario files: parsing, validation, built-in presets and serialization.

A scenario is a JSON document (format 1) with the sections ``topology``,
``leader``, ``agents``, ``observer``, ``controller``, ``nn``, ``sim`` and
optionally ``vehicles``, ``analysis``, ``name`` and ``preset``. A ``preset``
key names a built-in scenario whose sections are inherited; every section
present in the file replaces the inherited one as a whole. The grammar is
documented in ``docs/scenario-format.md``.
"""

import json
import math
from importlib import resources
try:
    from importlib.resources.abc import Traversable
except ImportError:  # Python < 3.11
    from importlib.abc import Traversable
from pathlib import Path
from typing import Any

import numpy as np

from .controller import ControllerGains, FormationOffsets
from .dynamics import UNCERTAINTIES, AgentState, LeaderModel, VehicleParams
from .engine import AnalysisSettings, NnSpec, SimConfig
from .errors import DimensionMismatchError, ScenarioParseError, ScenarioValidationError
from .estimator import ObserverGains
from .graph import build_topology

FORMAT_VERSION = 1
PRESET_DIR = "presets"

SECTIONS = {
    "format",
    "name",
    "preset",
    "vehicles",
    "topology",
    "leader",
    "agents",
    "observer",
    "controller",
    "nn",
    "sim",
    "analysis",
}
REQUIRED_SECTIONS = ("topology", "leader", "agents", "observer", "controller", "nn", "sim")
AGENT_KEYS = {"params", "eta0", "nu0", "d_star", "uncertainty_id", "observer", "controller"}
OBSERVER_KEYS = {"beta1", "beta2"}
CONTROLLER_KEYS = {"mode", "K1", "K2", "gamma", "sigma", "weights"}
AGENT_CONTROLLER_KEYS = {"K1", "K2", "gamma", "sigma"}
NN_KEYS = {"input", "bounds", "counts", "width"}
SIM_KEYS = {"dt", "t_end", "decimation", "weight_decimation", "plants", "coriolis", "seed"}
ANALYSIS_KEYS = {"learn_window", "transient_factor", "thresholds"}


# Presets ---------------------------------------------------------------------


def _presets_root() -> Traversable:
    return resources.files("auv_formation").joinpath(PRESET_DIR)


def available_presets() -> list[str]:
    """Names of the built-in scenarios."""
    return sorted(
        entry.name.removesuffix(".json")
        for entry in _presets_root().iterdir()
        if entry.name.endswith(".json")
    )


def _preset_text(name: str) -> str:
    if name not in available_presets():
        raise ScenarioValidationError(
            "preset", f"unknown preset {name!r} (available: {', '.join(available_presets())})"
        )
    return _presets_root().joinpath(f"{name}.json").read_text(encoding="utf-8")


def _load_json(text: str, source: str) -> dict[str, Any]:
    if not text.strip():
        raise ScenarioParseError(f"{source} is empty", 1, 1)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"{source}: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(document, dict):
        raise ScenarioParseError(f"{source}: top level must be an object", 1, 1)
    return document


def _resolve_inheritance(document: dict[str, Any], chain: tuple[str, ...] = ()) -> dict[str, Any]:
    """Merge a document over the preset it names, section by section."""
    base_name = document.get("preset")
    if base_name is None:
        return dict(document)
    if not isinstance(base_name, str):
        raise ScenarioValidationError("preset", "must be a preset name")
    if base_name in chain:
        raise ScenarioValidationError(
            "preset", f"inheritance cycle: {' -> '.join(chain + (base_name,))}"
        )
    base = _resolve_inheritance(
        _load_json(_preset_text(base_name), f"preset {base_name}"), chain + (base_name,)
    )
    merged = {k: v for k, v in base.items() if k != "name"}
    merged.update({k: v for k, v in document.items() if k != "preset"})
    merged.setdefault("name", base_name)
    return merged


# Field helpers ----------------------------------------------------------------


def _section(document: dict[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    value = document.get(name)
    if not isinstance(value, dict):
        raise ScenarioValidationError(name, "section must be an object")
    _reject_unknown(value, allowed, name)
    return value


def _reject_unknown(value: dict[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ScenarioValidationError(f"{where}.{unknown[0]}", "unknown key")


def _number(value: Any, field: str, *, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(field, f"expected a number, got {value!r}")
    number = float(value)
    if not math.isfinite(number):
        raise ScenarioValidationError(field, "must be finite")
    if positive and not number > 0.0:
        raise ScenarioValidationError(field, f"must be positive, got {number:g}")
    if nonnegative and number < 0.0:
        raise ScenarioValidationError(field, f"must be non-negative, got {number:g}")
    return number


def _integer(value: Any, field: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioValidationError(field, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ScenarioValidationError(field, f"must be at least {minimum}, got {value}")
    return value


def _array(value: Any, field: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioValidationError(field, "expected a numeric array") from None
    if shape is not None and arr.shape != shape:
        expected = "x".join(str(n) for n in shape)
        raise ScenarioValidationError(field, f"expected shape {expected}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioValidationError(field, "entries must be finite")
    return arr


def _gain_matrix(value: Any, field: str) -> np.ndarray:
    """A 3x3 matrix, or three numbers meaning its diagonal."""
    arr = _array(value, field)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ScenarioValidationError(
        field, f"expected 3 diagonal entries or a 3x3 matrix, got {arr.shape}"
    )


def _per_channel(value: Any, field: str, **checks: bool) -> float | list[float]:
    if isinstance(value, list):
        if len(value) != 3:
            raise ScenarioValidationError(
                field, f"expected a number or 3 numbers, got {len(value)}"
            )
        return [_number(v, f"{field}[{k}]", **checks) for k, v in enumerate(value)]
    return _number(value, field, **checks)


# Section parsers --------------------------------------------------------------


def _vehicle(value: Any, field: str) -> VehicleParams:
    if not isinstance(value, dict):
        raise ScenarioValidationError(field, "vehicle parameters must be an object")
    known = set(VehicleParams.field_names())
    _reject_unknown(value, known, field)
    for required in ("m", "I_z"):
        if required not in value:
            raise ScenarioValidationError(f"{field}.{required}", "missing")
    kwargs: dict[str, Any] = {}
    for key, raw in value.items():
        if key == "uncertainty_id":
            kwargs[key] = _integer(raw, f"{field}.{key}", 1)
        else:
            kwargs[key] = _number(raw, f"{field}.{key}")
    return VehicleParams(**kwargs)


def _observer_gains(
    value: dict[str, Any], field: str, base: ObserverGains | None = None
) -> ObserverGains:
    _reject_unknown(value, OBSERVER_KEYS, field)
    beta1 = value.get("beta1", base.beta1 if base else None)
    beta2 = value.get("beta2", base.beta2 if base else None)
    if beta1 is None or beta2 is None:
        raise ScenarioValidationError(field, "beta1 and beta2 are required")
    return ObserverGains(
        _number(beta1, f"{field}.beta1", positive=True),
        _number(beta2, f"{field}.beta2", positive=True),
    )


def _controller_gains(
    value: dict[str, Any], field: str, base: ControllerGains | None = None
) -> ControllerGains:
    def pick(key: str, fallback: Any) -> Any:
        if key in value:
            return value[key]
        if base is None:
            raise ScenarioValidationError(f"{field}.{key}", "missing")
        return fallback

    K1 = pick("K1", None if base is None else base.K1)
    K2 = pick("K2", None if base is None else base.K2)
    gamma = pick("gamma", None if base is None else base.gamma.tolist())
    sigma = pick("sigma", None if base is None else base.sigma.tolist())
    K1_arr = _gain_matrix(K1, f"{field}.K1")
    K2_arr = _gain_matrix(K2, f"{field}.K2")
    gamma_v = _per_channel(gamma, f"{field}.gamma", positive=True)
    sigma_v = _per_channel(sigma, f"{field}.sigma", nonnegative=True)
    try:
        return ControllerGains.build(K1_arr, K2_arr, gamma_v, sigma_v)
    except ValueError as e:
        raise ScenarioValidationError(field, str(e)) from e


def _agents(
    document: dict[str, Any],
    vehicles: dict[str, VehicleParams],
    observer: ObserverGains,
    controller: ControllerGains,
) -> tuple[
    list[VehicleParams], list[AgentState], np.ndarray, list[ObserverGains], list[ControllerGains]
]:
    entries = document.get("agents")
    if not isinstance(entries, list) or not entries:
        raise ScenarioValidationError("agents", "must be a non-empty list")
    params, initial, offsets, observers, controllers = [], [], [], [], []
    for index, entry in enumerate(entries):
        field = f"agents[{index}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(field, "agent entry must be an object")
        _reject_unknown(entry, AGENT_KEYS, field)
        for required in ("params", "eta0"):
            if required not in entry:
                raise ScenarioValidationError(f"{field}.{required}", "missing")

        ref = entry["params"]
        if isinstance(ref, str):
            if ref not in vehicles:
                raise ScenarioValidationError(f"{field}.params", f"unknown vehicle {ref!r}")
            p = vehicles[ref]
        else:
            p = _vehicle(ref, f"{field}.params")
        if "uncertainty_id" in entry:
            uid = _integer(entry["uncertainty_id"], f"{field}.uncertainty_id", 1)
            p = VehicleParams(**{**p.to_dict(), "uncertainty_id": uid})
        if p.uncertainty_id not in UNCERTAINTIES:
            raise ScenarioValidationError(
                f"{field}.uncertainty_id", f"unknown uncertainty id {p.uncertainty_id}"
            )
        params.append(p)

        eta0 = _array(entry["eta0"], f"{field}.eta0", (3,))
        nu0 = _array(entry.get("nu0", [0.0, 0.0, 0.0]), f"{field}.nu0", (3,))
        initial.append(AgentState(eta0, nu0))
        offsets.append(_array(entry.get("d_star", [0.0, 0.0, 0.0]), f"{field}.d_star", (3,)))

        own_observer = entry.get("observer")
        if own_observer is None:
            observers.append(observer)
        elif isinstance(own_observer, dict):
            observers.append(_observer_gains(own_observer, f"{field}.observer", observer))
        else:
            raise ScenarioValidationError(f"{field}.observer", "must be an object")

        own_controller = entry.get("controller")
        if own_controller is None:
            controllers.append(controller)
        elif isinstance(own_controller, dict):
            _reject_unknown(own_controller, AGENT_CONTROLLER_KEYS, f"{field}.controller")
            controllers.append(_controller_gains(own_controller, f"{field}.controller", controller))
        else:
            raise ScenarioValidationError(f"{field}.controller", "must be an object")
    return params, initial, np.array(offsets), observers, controllers


def _nn(document: dict[str, Any]) -> NnSpec:
    section = _section(document, "nn", NN_KEYS)
    for key in ("bounds", "counts", "width"):
        if key not in section:
            raise ScenarioValidationError(f"nn.{key}", "missing")
    nn_input = section.get("input", "nu")
    if nn_input not in ("nu", "chi"):
        raise ScenarioValidationError("nn.input", f"must be 'nu' or 'chi', got {nn_input!r}")
    bounds = _array(section["bounds"], "nn.bounds")
    counts_raw = section["counts"]
    if not isinstance(counts_raw, list):
        raise ScenarioValidationError("nn.counts", "must be a list of integers")
    counts = tuple(_integer(c, f"nn.counts[{k}]", 2) for k, c in enumerate(counts_raw))
    width = _number(section["width"], "nn.width", positive=True)
    expected = 3 if nn_input == "nu" else 6
    if bounds.shape != (expected, 2) or len(counts) != expected:
        raise DimensionMismatchError(
            f"nn: input {nn_input!r} needs {expected} bounds pairs and counts, "
            f"got bounds {bounds.shape} and {len(counts)} counts"
        )
    if not np.all(bounds[:, 0] < bounds[:, 1]):
        raise ScenarioValidationError("nn.bounds", "every axis needs lo < hi")
    return NnSpec(nn_input, bounds, counts, width)


def _analysis(document: dict[str, Any]) -> AnalysisSettings:
    if "analysis" not in document:
        return AnalysisSettings()
    section = _section(document, "analysis", ANALYSIS_KEYS)
    window = section.get("learn_window")
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise ScenarioValidationError("analysis.learn_window", "expected [t_a, t_b]")
        t_a = _number(window[0], "analysis.learn_window[0]", nonnegative=True)
        t_b = _number(window[1], "analysis.learn_window[1]", nonnegative=True)
        if not t_b > t_a:
            raise ScenarioValidationError("analysis.learn_window", "t_b must exceed t_a")
        window = (t_a, t_b)
    factor = _number(
        section.get("transient_factor", 2.0), "analysis.transient_factor", positive=True
    )
    thresholds_raw = section.get("thresholds", {})
    if not isinstance(thresholds_raw, dict):
        raise ScenarioValidationError("analysis.thresholds", "must be an object")
    thresholds = {
        key: _number(value, f"analysis.thresholds.{key}") for key, value in thresholds_raw.items()
    }
    try:
        return AnalysisSettings(window, factor, thresholds)
    except ValueError as e:
        raise ScenarioValidationError("analysis.thresholds", str(e)) from e


def build_config(document: dict[str, Any]) -> SimConfig:
    """Validate a (preset-resolved) scenario document and build its ``SimConfig``."""
    _reject_unknown(document, SECTIONS, "scenario")
    version = document.get("format", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ScenarioValidationError("format", f"unsupported scenario format {version!r}")
    for name in REQUIRED_SECTIONS:
        if name not in document:
            raise ScenarioValidationError(name, "missing section")

    vehicles_raw = document.get("vehicles", {})
    if not isinstance(vehicles_raw, dict):
        raise ScenarioValidationError("vehicles", "section must be an object")
    vehicles = {name: _vehicle(v, f"vehicles.{name}") for name, v in vehicles_raw.items()}

    topology_section = _section(document, "topology", {"weights"})
    if "weights" not in topology_section:
        raise ScenarioValidationError("topology.weights", "missing")
    topology = build_topology(_array(topology_section["weights"], "topology.weights"))

    leader_section = _section(document, "leader", {"A0", "chi0"})
    leader = LeaderModel(
        _array(leader_section.get("A0"), "leader.A0", (6, 6)),
        _array(leader_section.get("chi0"), "leader.chi0", (6,)),
    )

    observer = _observer_gains(_section(document, "observer", OBSERVER_KEYS), "observer")
    controller_section = _section(document, "controller", CONTROLLER_KEYS)
    controller = _controller_gains(controller_section, "controller")
    mode = controller_section.get("mode", "adaptive")
    if mode not in ("adaptive", "pretrained"):
        raise ScenarioValidationError(
            "controller.mode", f"must be 'adaptive' or 'pretrained', got {mode!r}"
        )
    weights_path = controller_section.get("weights")
    if weights_path is not None and not isinstance(weights_path, str):
        raise ScenarioValidationError("controller.weights", "must be a path prefix string")

    params, initial, offsets, observers, controllers = _agents(
        document, vehicles, observer, controller
    )
    if len(params) != topology.n_followers:
        raise DimensionMismatchError(
            f"{len(params)} agent entries but the topology has {topology.n_followers} followers"
        )

    sim = _section(document, "sim", SIM_KEYS)
    for key in ("dt", "t_end"):
        if key not in sim:
            raise ScenarioValidationError(f"sim.{key}", "missing")
    plants = sim.get("plants", True)
    if not isinstance(plants, bool):
        raise ScenarioValidationError("sim.plants", "must be true or false")
    coriolis = sim.get("coriolis", "reference")
    if coriolis not in ("reference", "skew"):
        raise ScenarioValidationError(
            "sim.coriolis", f"must be 'reference' or 'skew', got {coriolis!r}"
        )

    name = document.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioValidationError("name", "must be a string")

    return SimConfig(
        name=name,
        topology=topology,
        params=tuple(params),
        leader=leader,
        observer_gains=tuple(observers),
        controller_gains=tuple(controllers),
        mode=mode,
        nn=_nn(document),
        offsets=FormationOffsets(offsets),
        initial=tuple(initial),
        dt=_number(sim["dt"], "sim.dt", positive=True),
        t_end=_number(sim["t_end"], "sim.t_end", nonnegative=True),
        decimation=_integer(sim.get("decimation", 1), "sim.decimation", 1),
        weight_decimation=_integer(sim.get("weight_decimation", 1), "sim.weight_decimation", 1),
        weights_path=weights_path,
        plants=plants,
        coriolis=coriolis,
        seed=_integer(sim.get("seed", 0), "sim.seed", 0),
        analysis=_analysis(document),
    )


def parse_scenario_text(text: str, source: str = "<scenario>") -> SimConfig:
    return build_config(_resolve_inheritance(_load_json(text, source)))


def parse_scenario(path: str | Path) -> SimConfig:
    """Read, resolve and validate a scenario file."""
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ScenarioParseError(f"{source} is not UTF-8 text", 1, e.start + 1) from e
    return parse_scenario_text(text, str(source))


def load_preset(name: str) -> SimConfig:
    return parse_scenario_text(_preset_text(name), f"preset {name}")


def resolve_scenario(ref: str | Path) -> SimConfig:
    """Scenario from a file path, or a built-in preset by name."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path)
    if str(ref) in available_presets():
        return load_preset(str(ref))
    raise FileNotFoundError(f"no scenario file or preset named {str(ref)!r}")


# Serialization ----------------------------------------------------------------


def _vehicle_dict(p: VehicleParams) -> dict[str, Any]:
    return {
        key: (int(v) if key == "uncertainty_id" else float(v)) for key, v in p.to_dict().items()
    }


def _gains_dict(g: ControllerGains) -> dict[str, Any]:
    return {
        "K1": g.K1.tolist(),
        "K2": g.K2.tolist(),
        "gamma": g.gamma.tolist(),
        "sigma": g.sigma.tolist(),
    }


def _same_gains(a: ControllerGains, b: ControllerGains) -> bool:
    return all(
        np.array_equal(x, y)
        for x, y in ((a.K1, b.K1), (a.K2, b.K2), (a.gamma, b.gamma), (a.sigma, b.sigma))
    )


def scenario_to_dict(cfg: SimConfig) -> dict[str, Any]:
    """Self-contained scenario document for ``cfg`` (no preset references).

    Agent 1's gains become the shared section values; other agents carry an
    override only where theirs differ.
    """
    shared_observer = cfg.observer_gains[0]
    shared_controller = cfg.controller_gains[0]
    agents = []
    for k in range(cfg.n_agents):
        entry: dict[str, Any] = {
            "params": _vehicle_dict(cfg.params[k]),
            "eta0": cfg.initial[k].eta.tolist(),
            "nu0": cfg.initial[k].nu.tolist(),
            "d_star": cfg.offsets.d_star[k].tolist(),
        }
        if cfg.observer_gains[k] != shared_observer:
            entry["observer"] = {
                "beta1": cfg.observer_gains[k].beta1,
                "beta2": cfg.observer_gains[k].beta2,
            }
        if not _same_gains(cfg.controller_gains[k], shared_controller):
            entry["controller"] = _gains_dict(cfg.controller_gains[k])
        agents.append(entry)

    analysis = cfg.analysis
    return {
        "format": FORMAT_VERSION,
        "name": cfg.name,
        "topology": {"weights": cfg.topology.adjacency.tolist()},
        "leader": {"A0": cfg.leader.A0.tolist(), "chi0": cfg.leader.chi0.tolist()},
        "agents": agents,
        "observer": {"beta1": shared_observer.beta1, "beta2": shared_observer.beta2},
        "controller": {
            "mode": cfg.mode,
            **_gains_dict(shared_controller),
            "weights": cfg.weights_path,
        },
        "nn": {
            "input": cfg.nn.input,
            "bounds": cfg.nn.bounds.tolist(),
            "counts": list(cfg.nn.counts),
            "width": cfg.nn.width,
        },
        "sim": {
            "dt": cfg.dt,
            "t_end": cfg.t_end,
            "decimation": cfg.decimation,
            "weight_decimation": cfg.weight_decimation,
            "plants": cfg.plants,
            "coriolis": cfg.coriolis,
            "seed": cfg.seed,
        },
        "analysis": {
            "learn_window": list(analysis.learn_window) if analysis.learn_window else None,
            "transient_factor": analysis.transient_factor,
            "thresholds": dict(analysis.thresholds),
        },
    }


def serialize_scenario(cfg: SimConfig) -> str:
    return json.dumps(scenario_to_dict(cfg), indent=2) + "\n"


def write_scenario(cfg: SimConfig, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(serialize_scenario(cfg), encoding="utf-8", newline="\n")
    return target
