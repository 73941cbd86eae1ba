"""Deterministic multibody simulator for tethered-net capture of a satellite.

Lumped-mass viscoelastic tether networks, Hertz contact with hysteresis
damping, Stribeck-regularized friction, GJK narrow phase against a convex
target, and a fixed-step simulation engine with capture metrics.
"""

from .collision import ContactManifold, ContactQuery, ConvexPolyhedron, gjk_distance, make_box, support
from .contact import ContactEvent, ContactParams, friction_force, hertz_stiffness, normal_force, resolve_contact
from .engine import CaptureCriteria, CaptureMetrics, IntegratorConfig, RunResult, SimEngine, SimState
from .scenario import Scenario, ScenarioError, build_engine, generate_x_configuration, load_scenario, write_outputs
from .target import TargetBodyState, apply_wrench, propagate_pose, surface_velocity
from .tether import (
    AeroEnvironment,
    TetherElement,
    TetherMaterial,
    TetherNetwork,
    TetherNode,
    aero_force,
    assemble_internal_forces,
    element_damping,
    element_stiffness,
    element_tension,
)

__version__ = "0.1.0"
