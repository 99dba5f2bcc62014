#!/usr/bin/env python3
"""
Test suite for scenario parsing, presets and serialization.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.engine import scenario_warnings
from auv_formation.errors import (
    DimensionMismatchError,
    GainRelationWarning,
    ScenarioParseError,
    ScenarioValidationError,
)
from auv_formation.scenario import (
    available_presets,
    build_config,
    load_preset,
    parse_scenario,
    parse_scenario_text,
    resolve_scenario,
    scenario_to_dict,
    serialize_scenario,
    write_scenario,
)


@pytest.mark.unit
class TestPresets:
    """Test cases for the built-in scenarios."""

    def test_available(self):
        assert available_presets() == ["desk-5auv", "paper-5auv", "paper-5auv-scaled"]

    def test_paper_fleet(self):
        cfg = load_preset("paper-5auv")
        assert cfg.n_agents == 5
        assert cfg.dt == 2e-4
        assert cfg.t_end == 80.0
        assert cfg.nn.counts == (16, 16, 16)
        assert cfg.nn.width == 60.0
        np.testing.assert_array_equal(cfg.leader.chi0, [0, 80, 0, 80, 0, 80])
        np.testing.assert_array_equal(np.diag(cfg.controller_gains[0].K1), [960, 800, 800])
        assert [p.m for p in cfg.params] == [23.0, 25.0, 20.0, 30.0, 35.0]
        assert [p.uncertainty_id for p in cfg.params] == [1, 2, 3, 4, 5]
        assert cfg.analysis.learn_window == (60.0, 80.0)
        np.testing.assert_array_equal(np.diag(cfg.controller_gains[0].K2), [1440, 1200, 1200])

    def test_paper_gains_violate_gain_relation(self):
        # lambda_min(K2) = 1200 is below 2 lambda_max(K1) = 1920
        cfg = load_preset("paper-5auv")
        assert not any(g.satisfies_gain_relation() for g in cfg.controller_gains)
        with pytest.warns(GainRelationWarning, match=r"lambda_min\(K2\)=1200"):
            messages = scenario_warnings(cfg)
        assert len(messages) == cfg.n_agents

    def test_desk_gains_satisfy_gain_relation(self):
        cfg = load_preset("desk-5auv")
        assert all(g.satisfies_gain_relation() for g in cfg.controller_gains)

    def test_scaled_paper_fleet(self):
        paper = load_preset("paper-5auv")
        cfg = load_preset("paper-5auv-scaled")
        assert cfg.name == "paper-5auv-scaled"
        np.testing.assert_array_equal(cfg.leader.chi0, paper.leader.chi0 / 10)
        for k in range(cfg.n_agents):
            np.testing.assert_allclose(cfg.initial[k].eta, paper.initial[k].eta / 10)
        np.testing.assert_allclose(np.diag(cfg.controller_gains[0].K1), [9.6, 8, 8])
        np.testing.assert_array_equal(np.diag(cfg.controller_gains[0].K2), [1440, 1200, 1200])
        np.testing.assert_array_equal(
            cfg.controller_gains[0].gamma, paper.controller_gains[0].gamma
        )
        assert cfg.nn.counts == paper.nn.counts
        assert (cfg.dt, cfg.t_end) == (paper.dt, paper.t_end)
        assert all(g.satisfies_gain_relation() for g in cfg.controller_gains)

    def test_desk_inherits_vehicles(self):
        cfg = load_preset("desk-5auv")
        assert cfg.name == "desk-5auv"
        assert cfg.params[4].m == 35.0
        assert cfg.observer_gains[0].beta1 == 5.0
        assert cfg.nn.counts == (11, 11, 5)
        assert cfg.nn.width == 0.4
        np.testing.assert_array_equal(cfg.offsets[2], [0.125, -0.125, 0])
        np.testing.assert_array_equal(cfg.leader.chi0, [0, 1, 0, 1, 0, 0.3])
        assert cfg.analysis.transient_factor == 4.0
        assert cfg.analysis.threshold("weight_drift_fraction") == 0.02
        assert cfg.analysis.threshold("formation_mean_fraction") == 0.01

    def test_unknown_preset(self):
        with pytest.raises(ScenarioValidationError) as info:
            load_preset("nope")
        assert info.value.field == "preset"

    def test_preset_reference_in_file(self, temp_dir):
        path = temp_dir / "short.json"
        path.write_text(json.dumps({"preset": "desk-5auv", "sim": {"dt": 0.01, "t_end": 1.0}}))
        cfg = parse_scenario(path)
        assert cfg.name == "desk-5auv"
        assert cfg.dt == 0.01
        assert cfg.decimation == 1
        assert cfg.nn.counts == (11, 11, 5)


@pytest.mark.unit
class TestBuildConfig:
    """Test cases for validating scenario documents."""

    def test_small_scenario(self, small_config):
        assert small_config.n_agents == 2
        assert small_config.mode == "adaptive"
        assert small_config.n_steps == 50
        np.testing.assert_array_equal(np.diag(small_config.controller_gains[1].K2), [6, 5, 5])

    def test_agent_overrides(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"][1]["controller"] = {"gamma": 4.0}
        doc["agents"][1]["observer"] = {"beta1": 7.0}
        doc["agents"][1]["uncertainty_id"] = 4
        cfg = build_config(doc)
        np.testing.assert_array_equal(cfg.controller_gains[1].gamma, [4.0] * 3)
        np.testing.assert_array_equal(cfg.controller_gains[1].K1, cfg.controller_gains[0].K1)
        assert cfg.observer_gains[1].beta1 == 7.0
        assert cfg.observer_gains[1].beta2 == 5.0
        assert cfg.params[1].uncertainty_id == 4

    def test_inline_vehicle(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"][0]["params"] = {"m": 10.0, "I_z": 1.0}
        assert build_config(doc).params[0].m == 10.0

    def test_agent_count_mismatch(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"].pop()
        with pytest.raises(DimensionMismatchError):
            build_config(doc)

    def test_nn_input_dimension_mismatch(self, scenario_doc):
        with pytest.raises(DimensionMismatchError):
            build_config(scenario_doc(nn={"input": "chi"}))

    @pytest.mark.parametrize(
        "sections,field",
        [
            ({"bogus": 1}, "scenario.bogus"),
            ({"format": 2}, "format"),
            ({"sim": {"dt": True}}, "sim.dt"),
            ({"sim": {"dt": 0.0}}, "sim.dt"),
            ({"sim": {"t_end": -1.0}}, "sim.t_end"),
            ({"sim": {"extra": 1}}, "sim.extra"),
            ({"sim": {"coriolis": "exact"}}, "sim.coriolis"),
            ({"controller": {"mode": "frozen"}}, "controller.mode"),
            ({"controller": {"gamma": 0.0}}, "controller.gamma"),
            ({"controller": {"sigma": -1.0}}, "controller.sigma"),
            ({"controller": {"K1": [1.0, -1.0, 1.0]}}, "controller"),
            ({"observer": {"beta1": -5.0}}, "observer.beta1"),
            ({"nn": {"counts": [3, 3, 1]}}, "nn.counts[2]"),
            ({"nn": {"bounds": [[5, -5], [-5, 5], [-5, 5]]}}, "nn.bounds"),
            ({"analysis": {"learn_window": [0.4, 0.2]}}, "analysis.learn_window"),
            ({"analysis": {"thresholds": {"made_up": 1.0}}}, "analysis.thresholds"),
            ({"leader": {"chi0": [1, 2, 3]}}, "leader.chi0"),
        ],
    )
    def test_invalid_field(self, scenario_doc, sections, field):
        with pytest.raises(ScenarioValidationError) as info:
            build_config(scenario_doc(**sections))
        assert info.value.field == field

    def test_unknown_vehicle_reference(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"][0]["params"] = "auv9"
        with pytest.raises(ScenarioValidationError) as info:
            build_config(doc)
        assert info.value.field == "agents[0].params"

    def test_unknown_uncertainty_id(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"][0]["uncertainty_id"] = 6
        with pytest.raises(ScenarioValidationError):
            build_config(doc)

    def test_missing_section(self, scenario_doc):
        doc = scenario_doc()
        del doc["observer"]
        with pytest.raises(ScenarioValidationError) as info:
            build_config(doc)
        assert info.value.field == "observer"


@pytest.mark.unit
class TestParsing:
    """Test cases for reading scenario text and files."""

    def test_empty_text(self):
        with pytest.raises(ScenarioParseError) as info:
            parse_scenario_text("   \n")
        assert (info.value.line, info.value.column) == (1, 1)

    def test_malformed_json_position(self):
        with pytest.raises(ScenarioParseError) as info:
            parse_scenario_text('{\n  "name": ,\n}')
        assert info.value.line == 2
        assert "line 2" in str(info.value)

    def test_top_level_not_object(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario_text("[1, 2]")

    def test_not_utf8(self, temp_dir):
        path = temp_dir / "bad.json"
        path.write_bytes(b'{"name": "\xff"}')
        with pytest.raises(ScenarioParseError):
            parse_scenario(path)

    def test_resolve_file_and_preset(self, temp_dir, small_config):
        path = write_scenario(small_config, temp_dir / "small.json")
        assert resolve_scenario(path).name == "small"
        assert resolve_scenario("desk-5auv").name == "desk-5auv"

    def test_resolve_unknown(self, temp_dir):
        with pytest.raises(FileNotFoundError):
            resolve_scenario(temp_dir / "absent.json")


@pytest.mark.unit
class TestSerialization:
    """Test cases for writing scenarios back out."""

    def test_serialization_is_stable(self, small_config):
        text = serialize_scenario(small_config)
        assert serialize_scenario(parse_scenario_text(text)) == text

    def test_preset_flattened(self):
        document = scenario_to_dict(load_preset("desk-5auv"))
        assert "preset" not in document
        assert document["agents"][3]["params"]["m"] == 30.0

    def test_per_agent_gains_survive(self, scenario_doc):
        doc = scenario_doc()
        doc["agents"][1]["controller"] = {"K2": [7.0, 6.0, 6.0]}
        cfg = parse_scenario_text(json.dumps(doc))
        again = parse_scenario_text(serialize_scenario(cfg))
        np.testing.assert_array_equal(np.diag(again.controller_gains[1].K2), [7.0, 6.0, 6.0])
        np.testing.assert_array_equal(np.diag(again.controller_gains[0].K2), [6.0, 5.0, 5.0])


if __name__ == "__main__":
    pytest.main([__file__])
