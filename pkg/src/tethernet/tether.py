"""Lumped-mass tether network: graph of point masses joined by one-sided
Kelvin-Voigt elements, plus the per-node aerodynamic drag model.

Elements only pull (a slack tether cannot push); the damping term is active
only while the element is stretched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TetherMaterial",
    "TetherNode",
    "TetherElement",
    "TetherNetwork",
    "AeroEnvironment",
    "ForceDiagnostics",
    "element_stiffness",
    "element_damping",
    "element_tension",
    "aero_force",
    "assemble_internal_forces",
]

DEGENERATE_LENGTH = 1e-12  # m; below this a segment is treated as coincident nodes


class TetherConfigError(ValueError):
    """Invalid tether material, node, element, or network definition."""


@dataclass(frozen=True)
class TetherMaterial:
    youngs_modulus: float  # Pa
    density: float  # kg/m^3
    diameter: float  # m
    damping_ratio: float  # dimensionless, 0 <= xi < 1
    drag_coefficient: float

    def __post_init__(self) -> None:
        if self.youngs_modulus <= 0.0:
            raise TetherConfigError("youngs_modulus must be > 0")
        if self.density <= 0.0:
            raise TetherConfigError("density must be > 0")
        if self.diameter <= 0.0:
            raise TetherConfigError("diameter must be > 0")
        if not 0.0 <= self.damping_ratio < 1.0:
            raise TetherConfigError("damping_ratio must be in [0, 1)")
        if self.drag_coefficient <= 0.0:
            raise TetherConfigError("drag_coefficient must be > 0")

    @property
    def cross_section(self) -> float:
        return math.pi * self.diameter**2 / 4.0


@dataclass
class TetherNode:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    mass: float
    radius: float
    is_robot: bool = False

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.id < 0:
            raise TetherConfigError(f"node id {self.id} must be >= 0")
        if self.mass <= 0.0:
            raise TetherConfigError(f"node {self.id}: mass must be > 0")
        if self.radius <= 0.0:
            raise TetherConfigError(f"node {self.id}: radius must be > 0")


@dataclass(frozen=True)
class TetherElement:
    i: int
    j: int
    rest_length: float  # m
    stiffness: float  # N/m
    damping: float  # N s/m

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise TetherConfigError("element endpoints must differ")
        if self.rest_length <= 0.0:
            raise TetherConfigError("rest_length must be > 0")
        if self.stiffness <= 0.0:
            raise TetherConfigError("stiffness must be > 0")
        if self.damping < 0.0:
            raise TetherConfigError("damping must be >= 0")


def element_stiffness(material: TetherMaterial, rest_length: float) -> float:
    """Axial stiffness A*E/l0 of one element."""
    if rest_length <= 0.0:
        raise TetherConfigError("rest_length must be > 0")
    return material.cross_section * material.youngs_modulus / rest_length


def element_mass(material: TetherMaterial, rest_length: float) -> float:
    return rest_length * material.cross_section * material.density


def element_damping(material: TetherMaterial, elem_mass: float, stiffness: float) -> float:
    """Viscous coefficient 2*xi*sqrt(m*k) of one element."""
    if elem_mass <= 0.0 or stiffness <= 0.0:
        raise TetherConfigError("element mass and stiffness must be > 0")
    return 2.0 * material.damping_ratio * math.sqrt(elem_mass * stiffness)


@dataclass
class TetherNetwork:
    nodes: list[TetherNode]
    elements: list[TetherElement]
    material: TetherMaterial

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if sorted(ids) != list(range(len(self.nodes))):
            raise TetherConfigError("node ids must be unique and contiguous from 0")
        n = len(self.nodes)
        seen: set[tuple[int, int]] = set()
        for e in self.elements:
            if not (0 <= e.i < n and 0 <= e.j < n):
                raise TetherConfigError(f"element ({e.i},{e.j}) references unknown node")
            key = (min(e.i, e.j), max(e.i, e.j))
            if key in seen:
                raise TetherConfigError(f"duplicate element between nodes {key}")
            seen.add(key)
            expected_k = element_stiffness(self.material, e.rest_length)
            if abs(e.stiffness - expected_k) > 1e-12 * max(abs(expected_k), 1.0):
                raise TetherConfigError(
                    f"element ({e.i},{e.j}) stiffness {e.stiffness} inconsistent with "
                    f"material value {expected_k}"
                )
        if n > 1 and not self._connected():
            raise TetherConfigError("tether network must be a single connected piece")
        self.nodes = sorted(self.nodes, key=lambda nd: nd.id)

    def _connected(self) -> bool:
        adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for e in self.elements:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
        stack, seen = [0], {0}
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)

    def adjacent_elements(self, node_id: int) -> list[TetherElement]:
        return [e for e in self.elements if node_id in (e.i, e.j)]


@dataclass(frozen=True)
class AeroEnvironment:
    density: float  # kg/m^3

    def __post_init__(self) -> None:
        if self.density < 0.0:
            raise TetherConfigError("atmospheric density must be >= 0")


@dataclass
class ForceDiagnostics:
    degenerate_elements: int = 0
    degenerate_aero_segments: int = 0


def element_tension(
    net: TetherNetwork,
    e: TetherElement,
    diagnostics: ForceDiagnostics | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Tension forces (on node i, on node j) for one element.

    Zero in the slack branch; the viscous term only acts while stretched.
    """
    ni, nj = net.nodes[e.i], net.nodes[e.j]
    r_ij = ni.position - nj.position
    length = float(np.linalg.norm(r_ij))
    if length < DEGENERATE_LENGTH:
        if diagnostics is not None:
            diagnostics.degenerate_elements += 1
        return np.zeros(3), np.zeros(3)
    if length <= e.rest_length:
        return np.zeros(3), np.zeros(3)
    unit = r_ij / length
    v_ij = ni.velocity - nj.velocity
    magnitude = -e.stiffness * (length - e.rest_length) - e.damping * float(v_ij @ unit)
    force_i = magnitude * unit
    return force_i, -force_i


def _segment_drag_term(
    velocity: np.ndarray,
    segment: np.ndarray,
    diagnostics: ForceDiagnostics | None,
) -> np.ndarray:
    """n / |r| for one adjacent segment, with n = (v x rhat) x rhat."""
    length = float(np.linalg.norm(segment))
    if length < DEGENERATE_LENGTH:
        if diagnostics is not None:
            diagnostics.degenerate_aero_segments += 1
        return np.zeros(3)
    unit = segment / length
    n = np.cross(np.cross(velocity, unit), unit)
    return n / length


def aero_force(
    net: TetherNetwork,
    node_id: int,
    atmosphere: AeroEnvironment,
    diagnostics: ForceDiagnostics | None = None,
) -> np.ndarray:
    """Aerodynamic drag on one node from its rigid half-segments.

    End nodes use their single adjacent segment; hub-like nodes sum over all
    adjacent segments.
    """
    if atmosphere.density == 0.0:
        return np.zeros(3)
    adjacent = net.adjacent_elements(node_id)
    if not adjacent:
        raise TetherConfigError(f"node {node_id} has no adjacent elements")
    node = net.nodes[node_id]
    speed = float(np.linalg.norm(node.velocity))
    if speed == 0.0:
        return np.zeros(3)
    total = np.zeros(3)
    for e in adjacent:
        other = net.nodes[e.j if e.i == node_id else e.i]
        total = total + _segment_drag_term(node.velocity, node.position - other.position, diagnostics)
    prefactor = (
        atmosphere.density * speed * net.material.diameter / 4.0 * net.material.drag_coefficient
    )
    return prefactor * total


def assemble_internal_forces(
    net: TetherNetwork,
    atmosphere: AeroEnvironment | None = None,
    diagnostics: ForceDiagnostics | None = None,
) -> np.ndarray:
    """Per-node total of element tensions plus aerodynamic drag.

    Tension contributions cancel pairwise, so with no atmosphere the array
    sums to zero.
    """
    forces = np.zeros((len(net.nodes), 3))
    for e in net.elements:
        f_i, f_j = element_tension(net, e, diagnostics)
        forces[e.i] += f_i
        forces[e.j] += f_j
    if atmosphere is not None and atmosphere.density > 0.0:
        for node in net.nodes:
            forces[node.id] += aero_force(net, node.id, atmosphere, diagnostics)
    return forces


def tension_forces_batch(
    positions: np.ndarray,
    velocities: np.ndarray,
    idx_i: np.ndarray,
    idx_j: np.ndarray,
    stiffness: np.ndarray,
    damping: np.ndarray,
    rest_length: np.ndarray,
    diagnostics: ForceDiagnostics | None = None,
) -> np.ndarray:
    """Vectorized equivalent of summing element_tension over all elements.

    Used by the engine inner loop; tests pin it against the per-element path.
    """
    r = positions[idx_i] - positions[idx_j]
    length = np.sqrt(np.einsum("ij,ij->i", r, r))
    degenerate = length < DEGENERATE_LENGTH
    if diagnostics is not None and degenerate.any():
        diagnostics.degenerate_elements += int(degenerate.sum())
    safe = np.where(degenerate, 1.0, length)
    unit = r / safe[:, None]
    stretch = length - rest_length
    active = (stretch > 0.0) & ~degenerate
    rate = np.einsum("ij,ij->i", velocities[idx_i] - velocities[idx_j], unit)
    magnitude = np.where(active, -stiffness * stretch - damping * rate, 0.0)
    per_element = magnitude[:, None] * unit
    forces = np.zeros_like(positions)
    np.add.at(forces, idx_i, per_element)
    np.add.at(forces, idx_j, -per_element)
    return forces


def aero_forces_batch(
    positions: np.ndarray,
    velocities: np.ndarray,
    idx_i: np.ndarray,
    idx_j: np.ndarray,
    density: float,
    diameter: float,
    drag_coefficient: float,
    diagnostics: ForceDiagnostics | None = None,
) -> np.ndarray:
    """Vectorized per-node drag: each element contributes one segment term to
    both of its endpoints."""
    forces = np.zeros_like(positions)
    if density == 0.0:
        return forces
    speed = np.linalg.norm(velocities, axis=1)
    prefactor = density * speed * diameter / 4.0 * drag_coefficient

    for node_idx, other_idx in ((idx_i, idx_j), (idx_j, idx_i)):
        seg = positions[node_idx] - positions[other_idx]
        length = np.linalg.norm(seg, axis=1)
        degenerate = length < DEGENERATE_LENGTH
        if diagnostics is not None and degenerate.any():
            diagnostics.degenerate_aero_segments += int(degenerate.sum())
        safe = np.where(degenerate, 1.0, length)
        unit = seg / safe[:, None]
        v = velocities[node_idx]
        n = np.cross(np.cross(v, unit), unit)
        term = np.where(degenerate[:, None], 0.0, n / safe[:, None])
        np.add.at(forces, node_idx, prefactor[node_idx, None] * term)
    return forces
