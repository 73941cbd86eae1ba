"""Scenario schema: strict parsing, generator geometry, round-tripping,
and run output files."""

import json
import math

import numpy as np
import pytest
import yaml

from tethernet.scenario import (
    SCENARIO_SCHEMA,
    Scenario,
    ScenarioError,
    XConfigSpec,
    build_engine,
    build_network,
    build_geometry,
    build_target_state,
    generate_x_configuration,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_outputs,
)
from tethernet.tether import TetherMaterial, element_mass, element_stiffness

STATIC_YAML = "scenarios/capture_static.yaml"
ROTATING_YAML = "scenarios/capture_rotating.yaml"


def tiny_scenario_dict(**overrides):
    """Small, fast explicit-net scenario used as a parsing baseline."""
    data = {
        "schema": SCENARIO_SCHEMA,
        "material": {
            "youngs_modulus": 1.0e6,
            "density": 1390.0,
            "diameter": 0.001,
            "damping_ratio": 0.1,
        },
        "net": {
            "generator": "explicit",
            "nodes": [
                {"position": [0.0, 3.0, 0.0], "mass": 0.5, "radius": 0.01},
                {"position": [0.5, 3.0, 0.0], "mass": 0.5, "radius": 0.05, "is_robot": True},
            ],
            "elements": [{"i": 0, "j": 1, "rest_length": 0.5}],
        },
        "target": {"geometry": {"type": "box", "edge_lengths": [1.15, 1.15, 1.15]}},
        "contact": {
            "stiffness": 500.0,
            "static_friction": 0.7,
            "dynamic_friction": 0.5,
            "sliding_speed_coeff": 0.001,
            "stribeck_exponent": 2.0,
            "slope_param": 10000.0,
        },
        "integrator": {"dt": 1e-4, "duration": 0.01},
    }
    data.update(overrides)
    return data


# --------------------------------------------------------------- bundled files


@pytest.mark.parametrize("path", [STATIC_YAML, ROTATING_YAML])
def test_bundled_scenarios_load(path):
    s = load_scenario(path)
    assert s.material.youngs_modulus == 25.0e9
    assert s.material.damping_ratio == 0.3
    assert s.material.density == 1390.0
    assert s.contact.stiffness == 500.0
    assert s.contact.static_friction == 0.7
    assert s.contact.dynamic_friction == 0.5
    assert s.contact.sliding_speed_coeff == 0.001
    assert s.contact.stribeck_exponent == 2.0
    assert s.contact.slope_param == 10000.0
    assert s.target.box_edges == (1.15, 1.15, 1.15)
    assert s.initial_velocity == (0.0, -15.0, 0.0)
    assert s.net.nodes_total == 121
    assert s.robot_mass == 3.0


def test_bundled_scenarios_differ_only_in_spin_and_output():
    a = load_scenario(STATIC_YAML)
    b = load_scenario(ROTATING_YAML)
    assert a.target.angular_velocity_deg == (0.0, 0.0, 0.0)
    assert b.target.angular_velocity_deg == (1.0, 0.5, 0.2)
    da, db = scenario_to_dict(a), scenario_to_dict(b)
    da["target"]["angular_velocity_deg"] = db["target"]["angular_velocity_deg"]
    da["output"]["directory"] = db["output"]["directory"]
    assert da == db


# ----------------------------------------------------------------- generators


@pytest.fixture
def x_material():
    return TetherMaterial(25.0e9, 1390.0, 0.001, 0.3, 2.2)


def test_x_configuration_counts_and_geometry(x_material):
    spec = XConfigSpec(arm_length=6.0, nodes_total=121, hub_offset=2.0)
    nodes, elements, robots = generate_x_configuration(
        spec, x_material, robot_mass=3.0, robot_radius=0.1, initial_velocity=(0, -15, 0)
    )
    assert len(nodes) == 121
    assert len(elements) == 120
    assert len(robots) == 4
    hub = nodes[0].position
    assert hub == pytest.approx([0.0, 2.0, 0.0])
    # robots sit at the arm tips, radius arm_length from the hub, 90 deg apart
    tips = [nodes[r].position for r in robots]
    for tip in tips:
        assert np.linalg.norm(tip - hub) == pytest.approx(6.0)
        assert tip[1] == pytest.approx(2.0)  # in the deployment plane
    dots = [float((tips[i] - hub) @ (tips[(i + 1) % 4] - hub)) for i in range(4)]
    assert dots == pytest.approx([0.0] * 4, abs=1e-9)
    # every element starts exactly at rest length: zero initial tension
    for e in elements:
        r = np.linalg.norm(nodes[e.j].position - nodes[e.i].position)
        assert r == pytest.approx(e.rest_length, rel=1e-12)
        assert e.rest_length == pytest.approx(0.2)
    # whole pattern carries the closing velocity
    for n in nodes:
        assert n.velocity == pytest.approx([0.0, -15.0, 0.0])


def test_x_configuration_mass_lumping(x_material):
    spec = XConfigSpec(arm_length=6.0, nodes_total=121)
    nodes, _, robots = generate_x_configuration(spec, x_material, 3.0, 0.1, (0, 0, 0))
    seg = element_mass(x_material, 0.2)
    assert nodes[0].mass == pytest.approx(4 * seg / 2.0)  # hub: four half-segments
    assert nodes[1].mass == pytest.approx(seg)  # interior: two half-segments
    for r in robots:
        assert nodes[r].mass == pytest.approx(3.0 + seg / 2.0)
        assert nodes[r].radius == 0.1
        assert nodes[r].is_robot
    total = sum(n.mass for n in nodes)
    assert total == pytest.approx(4 * 3.0 + 120 * seg)


def test_x_configuration_rejects_bad_counts(x_material):
    with pytest.raises(ScenarioError, match="nodes_total"):
        generate_x_configuration(
            XConfigSpec(nodes_total=120), x_material, 3.0, 0.1, (0, 0, 0)
        )
    with pytest.raises(ScenarioError, match="arm_length"):
        generate_x_configuration(
            XConfigSpec(arm_length=-1.0), x_material, 3.0, 0.1, (0, 0, 0)
        )
    with pytest.raises(ScenarioError, match="plane_normal"):
        generate_x_configuration(
            XConfigSpec(plane_normal=(0.0, 0.0, 0.0)), x_material, 3.0, 0.1, (0, 0, 0)
        )


def test_explicit_net_builds_elements_from_material():
    s = scenario_from_dict(tiny_scenario_dict())
    net = build_network(s)
    assert len(net.nodes) == 2
    assert net.nodes[1].is_robot
    k = element_stiffness(s.material, 0.5)
    assert net.elements[0].stiffness == pytest.approx(k)


# -------------------------------------------------------------- strict parsing


def test_unknown_keys_are_rejected_with_paths():
    data = tiny_scenario_dict()
    data["material"]["color"] = "red"
    data["typo_section"] = {}
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(data)
    msg = str(excinfo.value)
    assert "material.color: unknown key" in msg
    assert "typo_section: unknown key" in msg


def test_missing_required_sections_are_listed():
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict({"schema": SCENARIO_SCHEMA})
    msg = str(excinfo.value)
    for section in ("material", "net", "target", "contact", "integrator"):
        assert f"{section}: missing required section" in msg


def test_type_errors_name_the_field():
    data = tiny_scenario_dict()
    data["material"]["density"] = "heavy"
    data["initial_velocity"] = [1.0, 2.0]
    with pytest.raises(ScenarioError) as excinfo:
        scenario_from_dict(data)
    msg = str(excinfo.value)
    assert "material.density: expected a number" in msg
    assert "initial_velocity: expected 3 numbers" in msg


def test_wrong_schema_is_rejected():
    with pytest.raises(ScenarioError, match="schema"):
        scenario_from_dict(tiny_scenario_dict(schema="other-v9"))


def test_yaml_exponent_strings_parse_as_floats():
    # YAML 1.1 reads '25.0e9' (no exponent sign) as a string
    data = tiny_scenario_dict()
    data["material"]["youngs_modulus"] = "25.0e9"
    s = scenario_from_dict(data)
    assert s.material.youngs_modulus == 25.0e9


def test_friction_ordering_is_enforced():
    data = tiny_scenario_dict()
    data["contact"]["dynamic_friction"] = 0.9  # above static 0.7
    with pytest.raises(ScenarioError, match="dynamic_friction"):
        scenario_from_dict(data)


def test_semantic_validation_happens_at_parse_time():
    # dt above the stiffness stability bound is caught before any stepping
    data = tiny_scenario_dict()
    data["integrator"]["dt"] = 10.0
    with pytest.raises(ScenarioError, match="stability"):
        scenario_from_dict(data)


# ------------------------------------------------------------- target building


def test_angular_velocity_is_converted_to_radians():
    data = tiny_scenario_dict()
    data["target"]["angular_velocity_deg"] = [1.0, 0.5, 0.2]
    s = scenario_from_dict(data)
    state = build_target_state(s.target, build_geometry(s.target))
    assert state.angular_velocity == pytest.approx(
        [math.radians(1.0), math.radians(0.5), math.radians(0.2)]
    )


def test_dynamic_box_target_gets_uniform_box_inertia():
    data = tiny_scenario_dict()
    data["target"]["mode"] = "dynamic"
    data["target"]["mass"] = 120.0
    s = scenario_from_dict(data)
    state = build_target_state(s.target, build_geometry(s.target))
    expected = 120.0 / 12.0 * (1.15**2 + 1.15**2)
    assert np.diag(state.inertia) == pytest.approx([expected] * 3)
    assert state.mass == 120.0


def test_kinematic_target_reports_no_mass():
    s = scenario_from_dict(tiny_scenario_dict())
    state = build_target_state(s.target, build_geometry(s.target))
    assert state.mode == "kinematic"
    assert state.mass == 0.0


# ----------------------------------------------------------------- round-trip


@pytest.mark.parametrize("path", [STATIC_YAML])
def test_scenario_round_trips_through_dict(path):
    s = load_scenario(path)
    assert scenario_from_dict(scenario_to_dict(s)) == s


def test_explicit_scenario_round_trips():
    s = scenario_from_dict(tiny_scenario_dict())
    assert scenario_from_dict(scenario_to_dict(s)) == s


# --------------------------------------------------------------- output files


@pytest.fixture(scope="module")
def tiny_run():
    s = scenario_from_dict(tiny_scenario_dict())
    engine = build_engine(s)
    return s, engine.run(output_interval=0.002)


def test_write_outputs_files_and_headers(tiny_run, tmp_path):
    s, result = tiny_run
    paths = write_outputs(result, s, tmp_path)
    with open(paths["trajectory"]) as fh:
        assert fh.readline() == "# schema: tethernet-trajectory-v1\n"
        assert fh.readline() == "time,body_id,x,y,z,vx,vy,vz\n"
        rows = fh.read().splitlines()
    # 6 sampled instants (initial + 5), 3 bodies each (2 nodes + target)
    assert len(rows) == 6 * 3
    with open(paths["events"]) as fh:
        assert fh.readline() == "# schema: tethernet-events-v1\n"
    with open(paths["metrics"]) as fh:
        report = json.load(fh)
    assert report["schema"] == "tethernet-metrics-v1"
    assert report["completed"] is True
    assert report["captured"] is False


def test_manifest_reloads_to_the_same_scenario(tiny_run, tmp_path):
    s, result = tiny_run
    paths = write_outputs(result, s, tmp_path)
    with open(paths["manifest"]) as fh:
        manifest = yaml.safe_load(fh)
    assert scenario_from_dict(manifest) == s


def test_outputs_are_byte_identical_across_reruns(tiny_run, tmp_path):
    s, _ = tiny_run
    engine = build_engine(s)
    blobs = []
    for tag in ("a", "b"):
        result = engine.run(output_interval=0.002)
        paths = write_outputs(result, s, tmp_path / tag)
        blob = b""
        for name in ("trajectory", "events"):
            with open(paths[name], "rb") as fh:
                blob += fh.read()
        blobs.append(blob)
    assert blobs[0] == blobs[1]
