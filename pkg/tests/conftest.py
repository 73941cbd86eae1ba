"""Shared fixtures: reference material, contact parameters, and small nets."""

import numpy as np
import pytest

from tethernet.collision import make_box
from tethernet.contact import ContactParams
from tethernet.target import TargetBodyState
from tethernet.tether import (
    TetherElement,
    TetherMaterial,
    TetherNetwork,
    TetherNode,
    element_damping,
    element_mass,
    element_stiffness,
)


@pytest.fixture
def material():
    """Technora-class line used by the bundled capture scenario."""
    return TetherMaterial(
        youngs_modulus=25.0e9,
        density=1390.0,
        diameter=0.001,
        damping_ratio=0.3,
        drag_coefficient=2.2,
    )


@pytest.fixture
def contact_params():
    """Contact parameter set of the bundled capture scenario."""
    return ContactParams(
        stiffness=500.0,
        restitution=0.5,
        static_friction=0.7,
        dynamic_friction=0.5,
        sliding_speed_coeff=0.001,
        stribeck_exponent=2.0,
        slope_param=10000.0,
    )


@pytest.fixture
def cube():
    """1.15 m cube of the bundled capture scenario."""
    return make_box((1.15, 1.15, 1.15))


@pytest.fixture
def static_pose():
    return TargetBodyState(
        position=np.zeros(3),
        orientation=np.array([1.0, 0.0, 0.0, 0.0]),
        velocity=np.zeros(3),
        angular_velocity=np.zeros(3),
    )


def make_chain(material, positions, velocities=None, rest_length=None, masses=None, radii=None):
    """Straight chain network through the given node positions."""
    positions = [np.asarray(p, dtype=float) for p in positions]
    n = len(positions)
    if velocities is None:
        velocities = [np.zeros(3)] * n
    if masses is None:
        masses = [1.0] * n
    if radii is None:
        radii = [0.01] * n
    nodes = [
        TetherNode(i, positions[i], np.asarray(velocities[i], dtype=float), masses[i], radii[i])
        for i in range(n)
    ]
    elements = []
    for i in range(n - 1):
        l0 = rest_length if rest_length is not None else float(
            np.linalg.norm(positions[i + 1] - positions[i])
        )
        k = element_stiffness(material, l0)
        d = element_damping(material, element_mass(material, l0), k)
        elements.append(TetherElement(i, i + 1, l0, k, d))
    return TetherNetwork(nodes, elements, material)
