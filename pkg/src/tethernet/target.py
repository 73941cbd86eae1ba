"""Rigid target satellite: pose propagation, surface kinematics, wrench accumulation.

The target is either *kinematic* (prescribed constant linear/angular velocity,
infinite effective inertia) or *dynamic* (Newton-Euler response to accumulated
contact wrenches). Quaternions are stored [w, x, y, z], world-frame angular
velocity in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TargetBodyState",
    "quat_normalize",
    "quat_multiply",
    "quat_to_matrix",
    "quat_exp_map",
    "propagate_pose",
    "surface_velocity",
    "apply_wrench",
]


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_exp_map(rotation_vector: np.ndarray) -> np.ndarray:
    """Quaternion for a rotation of |v| radians about v/|v|."""
    angle = math.sqrt(float(rotation_vector @ rotation_vector))
    if angle < 1e-14:
        # second-order series; keeps the map smooth through zero
        half = 0.5 * rotation_vector
        return quat_normalize(np.array([1.0, half[0], half[1], half[2]]))
    axis = rotation_vector / angle
    s = math.sin(0.5 * angle)
    return np.array([math.cos(0.5 * angle), s * axis[0], s * axis[1], s * axis[2]])


@dataclass
class TargetBodyState:
    """Pose and velocities of the rigid target.

    mode is "kinematic" or "dynamic"; mass/inertia are only meaningful in
    dynamic mode. Accumulated force/torque are cleared by propagate_pose.
    """

    position: np.ndarray
    orientation: np.ndarray  # unit quaternion [w, x, y, z]
    velocity: np.ndarray
    angular_velocity: np.ndarray  # world frame, rad/s
    mode: str = "kinematic"
    mass: float = 0.0
    inertia: np.ndarray | None = None  # body-frame tensor, kg m^2
    accumulated_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accumulated_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ignored_wrench_count: int = 0

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        self.orientation = quat_normalize(np.asarray(self.orientation, dtype=float))
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)
        if self.mode not in ("kinematic", "dynamic"):
            raise ValueError(f"unknown target mode {self.mode!r}")
        if self.mode == "dynamic":
            if self.mass <= 0.0:
                raise ValueError("dynamic target requires mass > 0")
            if self.inertia is None:
                raise ValueError("dynamic target requires an inertia tensor")
            self.inertia = np.asarray(self.inertia, dtype=float)
            if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
                raise ValueError("inertia tensor must be symmetric")
            if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
                raise ValueError("inertia tensor must be positive definite")
        self._rotation: np.ndarray | None = None

    @property
    def rotation(self) -> np.ndarray:
        if self._rotation is None:
            self._rotation = quat_to_matrix(self.orientation)
        return self._rotation

    def copy(self) -> "TargetBodyState":
        # bypasses __init__/__post_init__: copies are made every step
        out = object.__new__(TargetBodyState)
        out.position = self.position.copy()
        out.orientation = self.orientation.copy()
        out.velocity = self.velocity.copy()
        out.angular_velocity = self.angular_velocity.copy()
        out.mode = self.mode
        out.mass = self.mass
        out.inertia = self.inertia
        out.accumulated_force = self.accumulated_force.copy()
        out.accumulated_torque = self.accumulated_torque.copy()
        out.ignored_wrench_count = self.ignored_wrench_count
        out._rotation = self._rotation
        return out


def surface_velocity(state: TargetBodyState, world_point: np.ndarray) -> np.ndarray:
    """Velocity of the body-fixed point currently at world_point."""
    return state.velocity + np.cross(state.angular_velocity, world_point - state.position)


def apply_wrench(state: TargetBodyState, force: np.ndarray, world_point: np.ndarray) -> None:
    """Accumulate a force applied at a world point (dynamic mode only)."""
    if state.mode != "dynamic":
        state.ignored_wrench_count += 1
        return
    state.accumulated_force = state.accumulated_force + force
    state.accumulated_torque = state.accumulated_torque + np.cross(
        world_point - state.position, force
    )


def world_inertia(state: TargetBodyState) -> np.ndarray:
    r = state.rotation
    return r @ state.inertia @ r.T


def propagate_pose(state: TargetBodyState, dt: float) -> TargetBodyState:
    """Advance pose by one fixed step; consumes any accumulated wrench."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    out = state.copy()
    if state.mode == "dynamic":
        iw = world_inertia(state)
        gyro = np.cross(state.angular_velocity, iw @ state.angular_velocity)
        out.velocity = state.velocity + (state.accumulated_force / state.mass) * dt
        out.angular_velocity = state.angular_velocity + np.linalg.solve(
            iw, state.accumulated_torque - gyro
        ) * dt
    out.position = out.position + out.velocity * dt
    out.orientation = quat_normalize(
        quat_multiply(quat_exp_map(out.angular_velocity * dt), out.orientation)
    )
    out._rotation = None
    out.accumulated_force = np.zeros(3)
    out.accumulated_torque = np.zeros(3)
    return out
