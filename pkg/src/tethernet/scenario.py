"""Scenario schema, deployment generators, and run output files.

A scenario is a single YAML document that fully determines one run. Every
free physical parameter of the force models has a named field; nothing is
hard-coded. Loading is strict: unknown keys and invariant violations are
reported with their field path, and no invalid scenario reaches the engine.

Output files (all carry a versioned schema identifier in their header):
  trajectory.csv  one row per sampled body state (body id -1 is the target)
  events.csv      one row per logged contact event
  metrics.json    capture metrics plus diagnostics counters
  manifest.yaml   the fully resolved scenario; reloadable to reproduce the run
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .collision import ConvexPolyhedron, GeometryError, make_box
from .contact import ContactParams
from .engine import CaptureCriteria, IntegratorConfig, SimEngine
from .target import TargetBodyState
from .tether import (
    TetherConfigError,
    TetherElement,
    TetherMaterial,
    TetherNetwork,
    TetherNode,
    element_damping,
    element_mass,
    element_stiffness,
)

SCENARIO_SCHEMA = "tethernet-scenario-v1"
TRAJECTORY_SCHEMA = "tethernet-trajectory-v1"
EVENTS_SCHEMA = "tethernet-events-v1"
METRICS_SCHEMA = "tethernet-metrics-v1"

__all__ = [
    "Scenario",
    "ScenarioError",
    "XConfigSpec",
    "ExplicitNetSpec",
    "TargetSpec",
    "generate_x_configuration",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "build_network",
    "build_engine",
    "write_outputs",
]


class ScenarioError(ValueError):
    """Validation failure(s); message lists each offending field path."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class XConfigSpec:
    arm_length: float = 6.0  # m, hub to robot
    nodes_total: int = 121  # 4*k + 1
    arm_count: int = 4
    hub_offset: float = 0.0  # m, pattern-center standoff along the plane normal
    plane_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)


@dataclass(frozen=True)
class ExplicitNetSpec:
    # node entries: (position xyz, mass, radius, is_robot)
    nodes: tuple[tuple, ...]
    # element entries: (i, j, rest_length)
    elements: tuple[tuple, ...]


@dataclass(frozen=True)
class TargetSpec:
    box_edges: tuple[float, float, float] | None = (1.15, 1.15, 1.15)
    vertices: tuple[tuple, ...] | None = None
    faces: tuple[tuple, ...] | None = None
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    angular_velocity_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mode: str = "kinematic"
    mass: float = 100.0
    inertia_diagonal: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class Scenario:
    material: TetherMaterial
    net: XConfigSpec | ExplicitNetSpec
    target: TargetSpec
    contact: ContactParams
    integrator: IntegratorConfig
    capture: CaptureCriteria = CaptureCriteria()
    robot_mass: float = 3.0
    robot_radius: float = 0.1
    initial_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    aero_enabled: bool = False
    aero_density: float = 0.0
    gravity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    output_interval: float = 0.002
    output_directory: str = "out"
    seed: int = 0


# ---------------------------------------------------------------- generators


def generate_x_configuration(
    spec: XConfigSpec,
    material: TetherMaterial,
    robot_mass: float,
    robot_radius: float,
    initial_velocity,
) -> tuple[list[TetherNode], list[TetherElement], list[int]]:
    """Four straight arms radiating from a hub at 90 deg spacing.

    All elements are created exactly at rest length (zero initial tension);
    the outermost node of each arm is a robot. Interior node masses follow the
    half-segment lumping of the tether mass.
    """
    if spec.arm_count != 4:
        raise ScenarioError("net.arm_count: only 4-arm 'x' patterns are supported")
    if spec.nodes_total < 5 or (spec.nodes_total - 1) % 4 != 0:
        raise ScenarioError(
            f"net.nodes_total: {spec.nodes_total} is not 4*k + 1 (four arms plus hub)"
        )
    if spec.arm_length <= 0.0:
        raise ScenarioError("net.arm_length: must be > 0")
    per_arm = (spec.nodes_total - 1) // 4
    rest = spec.arm_length / per_arm

    normal = np.asarray(spec.plane_normal, dtype=float)
    norm = np.linalg.norm(normal)
    if norm == 0.0:
        raise ScenarioError("net.plane_normal: must be nonzero")
    normal = normal / norm
    seed_axis = np.array([1.0, 0.0, 0.0])
    if abs(normal @ seed_axis) > 0.9:
        seed_axis = np.array([0.0, 0.0, 1.0])
    u = seed_axis - (seed_axis @ normal) * normal
    u /= np.linalg.norm(u)
    w = np.cross(normal, u)
    directions = [u, w, -u, -w]

    center = spec.hub_offset * normal
    velocity = np.asarray(initial_velocity, dtype=float)

    segment_mass = element_mass(material, rest)
    stiffness = element_stiffness(material, rest)
    damping = element_damping(material, segment_mass, stiffness)
    interior_radius = material.diameter / 2.0

    nodes: list[TetherNode] = []
    elements: list[TetherElement] = []
    robots: list[int] = []

    hub_mass = spec.arm_count * segment_mass / 2.0  # four adjacent half-segments
    nodes.append(
        TetherNode(0, center.copy(), velocity.copy(), hub_mass, interior_radius)
    )
    for arm, direction in enumerate(directions):
        prev = 0
        for s in range(1, per_arm + 1):
            node_id = 1 + arm * per_arm + (s - 1)
            tip = s == per_arm
            mass = segment_mass / 2.0 if tip else segment_mass
            if tip:
                mass += robot_mass
            nodes.append(
                TetherNode(
                    node_id,
                    center + direction * (s * rest),
                    velocity.copy(),
                    mass,
                    robot_radius if tip else interior_radius,
                    is_robot=tip,
                )
            )
            elements.append(TetherElement(prev, node_id, rest, stiffness, damping))
            if tip:
                robots.append(node_id)
            prev = node_id
    return nodes, elements, robots


def build_network(scenario: Scenario) -> TetherNetwork:
    if isinstance(scenario.net, XConfigSpec):
        nodes, elements, _ = generate_x_configuration(
            scenario.net,
            scenario.material,
            scenario.robot_mass,
            scenario.robot_radius,
            scenario.initial_velocity,
        )
        return TetherNetwork(nodes, elements, scenario.material)

    spec = scenario.net
    velocity = np.asarray(scenario.initial_velocity, dtype=float)
    nodes = [
        TetherNode(i, np.asarray(pos, dtype=float), velocity.copy(), mass, radius, bool(robot))
        for i, (pos, mass, radius, robot) in enumerate(spec.nodes)
    ]
    elements = []
    for i, j, rest in spec.elements:
        k = element_stiffness(scenario.material, rest)
        d = element_damping(scenario.material, element_mass(scenario.material, rest), k)
        elements.append(TetherElement(int(i), int(j), rest, k, d))
    return TetherNetwork(nodes, elements, scenario.material)


def build_geometry(spec: TargetSpec) -> ConvexPolyhedron:
    if spec.vertices is not None:
        return ConvexPolyhedron(np.asarray(spec.vertices, dtype=float), [list(f) for f in spec.faces])
    return make_box(spec.box_edges)


def build_target_state(spec: TargetSpec, geometry: ConvexPolyhedron) -> TargetBodyState:
    inertia = None
    if spec.mode == "dynamic":
        if spec.inertia_diagonal is not None:
            inertia = np.diag(spec.inertia_diagonal)
        elif spec.box_edges is not None:
            ex, ey, ez = spec.box_edges
            inertia = np.diag(
                [
                    spec.mass / 12.0 * (ey**2 + ez**2),
                    spec.mass / 12.0 * (ex**2 + ez**2),
                    spec.mass / 12.0 * (ex**2 + ey**2),
                ]
            )
        else:
            raise ScenarioError("target.inertia_diagonal: required for a dynamic mesh target")
    return TargetBodyState(
        position=np.asarray(spec.position, dtype=float),
        orientation=np.asarray(spec.orientation, dtype=float),
        velocity=np.asarray(spec.velocity, dtype=float),
        angular_velocity=np.deg2rad(np.asarray(spec.angular_velocity_deg, dtype=float)),
        mode=spec.mode,
        mass=spec.mass if spec.mode == "dynamic" else 0.0,
        inertia=inertia,
    )


def build_engine(scenario: Scenario) -> SimEngine:
    """Construct the fully validated engine for a scenario."""
    try:
        network = build_network(scenario)
        geometry = build_geometry(scenario.target)
        target = build_target_state(scenario.target, geometry)
        return SimEngine(
            network=network,
            target=target,
            geometry=geometry,
            contact_params=scenario.contact,
            integrator=scenario.integrator,
            capture=scenario.capture,
            atmosphere_density=scenario.aero_density if scenario.aero_enabled else 0.0,
            gravity=np.asarray(scenario.gravity, dtype=float),
        )
    except (TetherConfigError, GeometryError, ValueError) as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError(str(err)) from err


# ---------------------------------------------------------------- parsing


class _Reader:
    """Strict dict reader that tracks field paths for error messages."""

    def __init__(self, data: dict, path: str, problems: list[str]):
        if not isinstance(data, dict):
            problems.append(f"{path or '<root>'}: expected a mapping")
            data = {}
        self.data = data
        self.path = path
        self.problems = problems
        self.seen: set[str] = set()

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def section(self, key: str, required: bool = False) -> "_Reader | None":
        self.seen.add(key)
        if key not in self.data:
            if required:
                self.problems.append(f"{self._at(key)}: missing required section")
            return None
        return _Reader(self.data[key], self._at(key), self.problems)

    def value(self, key: str, kind, default=None, required: bool = False):
        self.seen.add(key)
        if key not in self.data:
            if required:
                self.problems.append(f"{self._at(key)}: missing required field")
            return default
        raw = self.data[key]
        if kind is float:
            # YAML 1.1 reads exponents like 25.0e9 (no sign) as strings
            if isinstance(raw, str):
                try:
                    return float(raw)
                except ValueError:
                    pass
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                self.problems.append(f"{self._at(key)}: expected a number, got {raw!r}")
                return default
            return float(raw)
        if kind is int:
            if isinstance(raw, bool) or not isinstance(raw, int):
                self.problems.append(f"{self._at(key)}: expected an integer, got {raw!r}")
                return default
            return int(raw)
        if kind is bool:
            if not isinstance(raw, bool):
                self.problems.append(f"{self._at(key)}: expected a boolean, got {raw!r}")
                return default
            return raw
        if kind is str:
            if not isinstance(raw, str):
                self.problems.append(f"{self._at(key)}: expected a string, got {raw!r}")
                return default
            return raw
        raise AssertionError(kind)

    def vector(self, key: str, length: int, default=None, required: bool = False):
        self.seen.add(key)
        if key not in self.data:
            if required:
                self.problems.append(f"{self._at(key)}: missing required field")
            return default
        raw = self.data[key]
        if (
            not isinstance(raw, (list, tuple))
            or len(raw) != length
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)
        ):
            self.problems.append(f"{self._at(key)}: expected {length} numbers, got {raw!r}")
            return default
        return tuple(float(v) for v in raw)

    def finish(self) -> None:
        unknown = set(self.data) - self.seen
        for key in sorted(unknown):
            self.problems.append(f"{self._at(key)}: unknown key")


def _parse_net(reader: _Reader, problems: list[str]):
    generator = reader.value("generator", str, default="x_configuration")
    if generator == "x_configuration":
        spec = XConfigSpec(
            arm_length=reader.value("arm_length", float, default=6.0),
            nodes_total=reader.value("nodes_total", int, default=121),
            arm_count=reader.value("arm_count", int, default=4),
            hub_offset=reader.value("hub_offset", float, default=0.0),
            plane_normal=reader.vector("plane_normal", 3, default=(0.0, 1.0, 0.0)),
        )
        reader.finish()
        return spec
    if generator == "explicit":
        reader.seen.update(("nodes", "elements"))
        nodes_raw = reader.data.get("nodes")
        elems_raw = reader.data.get("elements")
        nodes, elements = [], []
        if not isinstance(nodes_raw, list) or not nodes_raw:
            problems.append(f"{reader.path}.nodes: expected a non-empty list")
        else:
            for idx, entry in enumerate(nodes_raw):
                sub = _Reader(entry, f"{reader.path}.nodes[{idx}]", problems)
                pos = sub.vector("position", 3, required=True)
                mass = sub.value("mass", float, required=True)
                radius = sub.value("radius", float, required=True)
                robot = sub.value("is_robot", bool, default=False)
                sub.finish()
                if pos is None or mass is None or radius is None:
                    continue
                nodes.append((pos, mass, radius, robot))
        if not isinstance(elems_raw, list):
            problems.append(f"{reader.path}.elements: expected a list")
        else:
            for idx, entry in enumerate(elems_raw):
                sub = _Reader(entry, f"{reader.path}.elements[{idx}]", problems)
                i = sub.value("i", int, required=True)
                j = sub.value("j", int, required=True)
                rest = sub.value("rest_length", float, required=True)
                sub.finish()
                if None not in (i, j, rest):
                    elements.append((i, j, rest))
        reader.finish()
        return ExplicitNetSpec(tuple(nodes), tuple(elements))
    problems.append(f"{reader.path}.generator: unknown generator {generator!r}")
    return None


def scenario_from_dict(data: dict) -> Scenario:
    problems: list[str] = []
    root = _Reader(data, "", problems)

    schema = root.value("schema", str, default=SCENARIO_SCHEMA)
    if schema != SCENARIO_SCHEMA:
        problems.append(f"schema: expected {SCENARIO_SCHEMA!r}, got {schema!r}")

    material = None
    sec = root.section("material", required=True)
    if sec is not None:
        kwargs = dict(
            youngs_modulus=sec.value("youngs_modulus", float, required=True),
            density=sec.value("density", float, required=True),
            diameter=sec.value("diameter", float, default=0.001),
            damping_ratio=sec.value("damping_ratio", float, required=True),
            drag_coefficient=sec.value("drag_coefficient", float, default=2.2),
        )
        sec.finish()
        if None not in kwargs.values():
            try:
                material = TetherMaterial(**kwargs)
            except TetherConfigError as err:
                problems.append(f"material: {err}")

    net = None
    sec = root.section("net", required=True)
    if sec is not None:
        net = _parse_net(sec, problems)

    target = None
    sec = root.section("target", required=True)
    if sec is not None:
        geom = sec.section("geometry", required=True)
        box_edges, vertices, faces = None, None, None
        if geom is not None:
            gtype = geom.value("type", str, default="box")
            if gtype == "box":
                box_edges = geom.vector("edge_lengths", 3, default=(1.15, 1.15, 1.15))
            elif gtype == "mesh":
                geom.seen.update(("vertices", "faces"))
                vraw = geom.data.get("vertices")
                fraw = geom.data.get("faces")
                if not isinstance(vraw, list) or not isinstance(fraw, list):
                    problems.append(f"{geom.path}: mesh needs vertices and faces lists")
                else:
                    vertices = tuple(tuple(float(c) for c in v) for v in vraw)
                    faces = tuple(tuple(int(i) for i in f) for f in fraw)
            else:
                problems.append(f"{geom.path}.type: unknown geometry type {gtype!r}")
            geom.finish()
        mode = sec.value("mode", str, default="kinematic")
        if mode not in ("kinematic", "dynamic"):
            problems.append(f"{sec.path}.mode: must be 'kinematic' or 'dynamic'")
            mode = "kinematic"
        target = TargetSpec(
            box_edges=box_edges,
            vertices=vertices,
            faces=faces,
            position=sec.vector("position", 3, default=(0.0, 0.0, 0.0)),
            orientation=sec.vector("orientation", 4, default=(1.0, 0.0, 0.0, 0.0)),
            velocity=sec.vector("velocity", 3, default=(0.0, 0.0, 0.0)),
            angular_velocity_deg=sec.vector("angular_velocity_deg", 3, default=(0.0, 0.0, 0.0)),
            mode=mode,
            mass=sec.value("mass", float, default=100.0),
            inertia_diagonal=sec.vector("inertia_diagonal", 3, default=None),
        )
        sec.finish()

    contact = None
    sec = root.section("contact", required=True)
    if sec is not None:
        mu_s = sec.value("static_friction", float, required=True)
        mu_d = sec.value("dynamic_friction", float, required=True)
        kwargs = dict(
            stiffness=sec.value("stiffness", float, required=True),
            restitution=sec.value("restitution", float, default=0.5),
            static_friction=mu_s,
            dynamic_friction=mu_d,
            sliding_speed_coeff=sec.value("sliding_speed_coeff", float, required=True),
            stribeck_exponent=sec.value("stribeck_exponent", float, required=True),
            slope_param=sec.value("slope_param", float, required=True),
            fixed_damping=sec.value("fixed_damping", float, default=None),
        )
        sec.finish()
        if mu_s is not None and mu_d is not None and mu_d > mu_s:
            problems.append(
                "contact.dynamic_friction: must not exceed contact.static_friction "
                f"({mu_d} > {mu_s})"
            )
        elif not any(v is None for k, v in kwargs.items() if k != "fixed_damping"):
            try:
                contact = ContactParams(**kwargs)
            except ValueError as err:
                problems.append(f"contact: {err}")

    integrator = None
    sec = root.section("integrator", required=True)
    if sec is not None:
        kwargs = dict(
            dt=sec.value("dt", float, required=True),
            duration=sec.value("duration", float, required=True),
            scheme=sec.value("scheme", str, default="semi_implicit_euler"),
            stability_check=sec.value("stability_check", bool, default=True),
        )
        sec.finish()
        if None not in kwargs.values():
            try:
                integrator = IntegratorConfig(**kwargs)
            except ValueError as err:
                problems.append(f"integrator: {err}")

    capture = CaptureCriteria()
    sec = root.section("capture")
    if sec is not None:
        capture = CaptureCriteria(
            wrap_threshold=sec.value("wrap_threshold", float, default=0.5),
            speed_threshold=sec.value("speed_threshold", float, default=0.5),
            hold_time=sec.value("hold_time", float, default=0.5),
            grace_period=sec.value("grace_period", float, default=2.0),
        )
        sec.finish()

    aero_enabled, aero_density = False, 0.0
    sec = root.section("aero")
    if sec is not None:
        aero_enabled = sec.value("enabled", bool, default=False)
        aero_density = sec.value("density", float, default=0.0)
        if aero_density < 0.0:
            problems.append("aero.density: must be >= 0")
        sec.finish()

    output_interval, output_directory = 0.002, "out"
    sec = root.section("output")
    if sec is not None:
        output_interval = sec.value("interval", float, default=0.002)
        output_directory = sec.value("directory", str, default="out")
        if output_interval <= 0.0:
            problems.append("output.interval: must be > 0")
        sec.finish()

    robots_mass, robots_radius = 3.0, 0.1
    sec = root.section("robots")
    if sec is not None:
        robots_mass = sec.value("mass", float, default=3.0)
        robots_radius = sec.value("radius", float, default=0.1)
        if robots_mass <= 0.0:
            problems.append("robots.mass: must be > 0")
        if robots_radius <= 0.0:
            problems.append("robots.radius: must be > 0")
        sec.finish()

    initial_velocity = root.vector("initial_velocity", 3, default=(0.0, 0.0, 0.0))
    gravity = root.vector("gravity", 3, default=(0.0, 0.0, 0.0))
    seed = root.value("seed", int, default=0)
    root.finish()

    if problems:
        raise ScenarioError(problems)

    scenario = Scenario(
        material=material,
        net=net,
        target=target,
        contact=contact,
        integrator=integrator,
        capture=capture,
        robot_mass=robots_mass,
        robot_radius=robots_radius,
        initial_velocity=initial_velocity,
        aero_enabled=aero_enabled,
        aero_density=aero_density,
        gravity=gravity,
        output_interval=output_interval,
        output_directory=output_directory,
        seed=seed,
    )
    build_engine(scenario)  # full semantic validation before anything steps
    return scenario


def load_scenario(path: str | os.PathLike) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise
    except yaml.YAMLError as err:
        raise ScenarioError(f"{path}: YAML parse error: {err}") from err
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario file must contain a mapping")
    return scenario_from_dict(data)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Plain-dict form of a scenario; loading it back yields an equal Scenario."""
    if isinstance(scenario.net, XConfigSpec):
        net = {
            "generator": "x_configuration",
            "arm_length": scenario.net.arm_length,
            "nodes_total": scenario.net.nodes_total,
            "arm_count": scenario.net.arm_count,
            "hub_offset": scenario.net.hub_offset,
            "plane_normal": list(scenario.net.plane_normal),
        }
    else:
        net = {
            "generator": "explicit",
            "nodes": [
                {
                    "position": list(pos),
                    "mass": mass,
                    "radius": radius,
                    "is_robot": bool(robot),
                }
                for pos, mass, radius, robot in scenario.net.nodes
            ],
            "elements": [
                {"i": i, "j": j, "rest_length": rest}
                for i, j, rest in scenario.net.elements
            ],
        }
    t = scenario.target
    if t.vertices is not None:
        geometry = {
            "type": "mesh",
            "vertices": [list(v) for v in t.vertices],
            "faces": [list(f) for f in t.faces],
        }
    else:
        geometry = {"type": "box", "edge_lengths": list(t.box_edges)}
    target = {
        "geometry": geometry,
        "position": list(t.position),
        "orientation": list(t.orientation),
        "velocity": list(t.velocity),
        "angular_velocity_deg": list(t.angular_velocity_deg),
        "mode": t.mode,
        "mass": t.mass,
    }
    if t.inertia_diagonal is not None:
        target["inertia_diagonal"] = list(t.inertia_diagonal)
    c = scenario.contact
    contact = {
        "stiffness": c.stiffness,
        "restitution": c.restitution,
        "static_friction": c.static_friction,
        "dynamic_friction": c.dynamic_friction,
        "sliding_speed_coeff": c.sliding_speed_coeff,
        "stribeck_exponent": c.stribeck_exponent,
        "slope_param": c.slope_param,
    }
    if c.fixed_damping is not None:
        contact["fixed_damping"] = c.fixed_damping
    return {
        "schema": SCENARIO_SCHEMA,
        "seed": scenario.seed,
        "material": {
            "youngs_modulus": scenario.material.youngs_modulus,
            "density": scenario.material.density,
            "diameter": scenario.material.diameter,
            "damping_ratio": scenario.material.damping_ratio,
            "drag_coefficient": scenario.material.drag_coefficient,
        },
        "net": net,
        "robots": {"mass": scenario.robot_mass, "radius": scenario.robot_radius},
        "initial_velocity": list(scenario.initial_velocity),
        "target": target,
        "contact": contact,
        "aero": {"enabled": scenario.aero_enabled, "density": scenario.aero_density},
        "gravity": list(scenario.gravity),
        "integrator": {
            "dt": scenario.integrator.dt,
            "duration": scenario.integrator.duration,
            "scheme": scenario.integrator.scheme,
            "stability_check": scenario.integrator.stability_check,
        },
        "capture": {
            "wrap_threshold": scenario.capture.wrap_threshold,
            "speed_threshold": scenario.capture.speed_threshold,
            "hold_time": scenario.capture.hold_time,
            "grace_period": scenario.capture.grace_period,
        },
        "output": {
            "interval": scenario.output_interval,
            "directory": scenario.output_directory,
        },
    }


# ---------------------------------------------------------------- outputs


def _fmt(value: float) -> str:
    return repr(float(value))


def write_outputs(result, scenario: Scenario, directory: str | os.PathLike | None = None) -> dict[str, str]:
    """Write trajectory, event log, metrics report, and run manifest.

    Returns the mapping of logical name to file path. Files are written with
    shortest-round-trip float formatting, so identical runs produce identical
    bytes.
    """
    out_dir = str(directory if directory is not None else scenario.output_directory)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "trajectory": os.path.join(out_dir, "trajectory.csv"),
        "events": os.path.join(out_dir, "events.csv"),
        "metrics": os.path.join(out_dir, "metrics.json"),
        "manifest": os.path.join(out_dir, "manifest.yaml"),
    }

    with open(paths["trajectory"], "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
        fh.write("time,body_id,x,y,z,vx,vy,vz\n")
        for row in result.trajectory:
            t, body, *rest = row
            fh.write(f"{_fmt(t)},{body}," + ",".join(_fmt(v) for v in rest) + "\n")

    with open(paths["events"], "w", encoding="utf-8") as fh:
        fh.write(f"# schema: {EVENTS_SCHEMA}\n")
        fh.write(
            "time,node_id,penetration,penetration_rate,compression_start_rate,"
            "vt_x,vt_y,vt_z,fn_x,fn_y,fn_z,ft_x,ft_y,ft_z,face_index\n"
        )
        for ev in result.events:
            values = [
                ev.penetration,
                ev.penetration_rate,
                ev.compression_start_rate,
                *ev.tangential_velocity,
                *ev.normal_force,
                *ev.friction_force,
            ]
            fh.write(
                f"{_fmt(ev.time)},{ev.node_id},"
                + ",".join(_fmt(v) for v in values)
                + f",{ev.face_index}\n"
            )

    metrics = result.metrics
    report = {
        "schema": METRICS_SCHEMA,
        "captured": metrics.captured,
        "capture_time": metrics.capture_time,
        "first_contact_time": metrics.first_contact_time,
        "wrap_score": metrics.wrap_score,
        "faces_in_contact_max": metrics.faces_in_contact_max,
        "robot_relative_speed": metrics.robot_relative_speed,
        "completed": result.completed,
        "failure": result.failure,
        "diagnostics": result.diagnostics,
        "wall_time": result.wall_time,
    }
    with open(paths["metrics"], "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=True)

    return paths
