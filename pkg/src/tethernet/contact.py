"""Contact forces: Hertz normal force with hysteresis damping, and
Stribeck-regularized Coulomb friction.

The normal law is f_N = K*delta^n + d_c*delta_dot with n = 3/2. The damping
coefficient is either a fixed scenario override, or the hysteresis form
d_c = mu_h * delta^n with mu_h = 3K(1 - e^2) / (4 * delta_dot_minus), where
delta_dot_minus is the penetration speed at the start of the compression
phase. The result is clamped at zero: a contact cannot pull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import ContactManifold
from .target import TargetBodyState, surface_velocity

__all__ = [
    "ContactParams",
    "ContactEvent",
    "hertz_stiffness",
    "hysteresis_factor",
    "normal_force",
    "friction_force",
    "resolve_contact",
]

HERTZ_EXPONENT = 1.5
MIN_COMPRESSION_SPEED = 1e-9  # m/s, floor for contacts born already separating


class ContactConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ContactParams:
    stiffness: float  # K, N/m^(3/2)
    restitution: float  # e, (0, 1]
    static_friction: float  # mu_s
    dynamic_friction: float  # mu_d
    sliding_speed_coeff: float  # v_s, m/s
    stribeck_exponent: float  # p
    slope_param: float  # k_t, s/m
    exponent: float = HERTZ_EXPONENT
    fixed_damping: float | None = None  # d_c override, N s/m; None -> hysteresis model

    def __post_init__(self) -> None:
        if self.stiffness <= 0.0:
            raise ContactConfigError("stiffness must be > 0")
        if not 0.0 < self.restitution <= 1.0:
            raise ContactConfigError("restitution must be in (0, 1]")
        if self.dynamic_friction < 0.0 or self.static_friction < self.dynamic_friction:
            raise ContactConfigError("need static_friction >= dynamic_friction >= 0")
        if self.sliding_speed_coeff <= 0.0:
            raise ContactConfigError("sliding_speed_coeff must be > 0")
        if self.slope_param <= 0.0:
            raise ContactConfigError("slope_param must be > 0")
        if self.fixed_damping is not None and self.fixed_damping < 0.0:
            raise ContactConfigError("fixed_damping must be >= 0")


@dataclass
class ContactEvent:
    node_id: int
    time: float
    penetration: float
    penetration_rate: float  # positive while compressing
    compression_start_rate: float
    tangential_velocity: np.ndarray
    normal_force: np.ndarray
    friction_force: np.ndarray
    face_index: int


def hertz_stiffness(
    radius_i: float,
    radius_j: float,
    poisson_i: float,
    modulus_i: float,
    poisson_j: float = 0.0,
    modulus_j: float = math.inf,
) -> float:
    """Hertz coefficient for two colliding spheres.

    Pass radius_j = inf for sphere-on-flat-face contact and modulus_j = inf
    for a rigid partner.
    """
    if radius_i <= 0.0 or radius_j <= 0.0:
        raise ContactConfigError("radii must be > 0")
    for nu, modulus in ((poisson_i, modulus_i), (poisson_j, modulus_j)):
        if modulus <= 0.0:
            raise ContactConfigError("elastic moduli must be > 0")
        if not 0.0 <= nu < 0.5:
            raise ContactConfigError("Poisson ratio must be in [0, 0.5)")
    h_i = (1.0 - poisson_i**2) / (math.pi * modulus_i)
    h_j = 0.0 if math.isinf(modulus_j) else (1.0 - poisson_j**2) / (math.pi * modulus_j)
    if math.isinf(radius_j):
        effective = math.sqrt(radius_i)
    else:
        effective = math.sqrt(radius_i * radius_j / (radius_i + radius_j))
    return 4.0 / (3.0 * math.pi * (h_i + h_j)) * effective


def hysteresis_factor(params: ContactParams, compression_start_rate: float) -> float:
    """mu_h = 3K(1 - e^2) / (4 * delta_dot_minus); 0 for a degenerate start rate."""
    if compression_start_rate <= 0.0:
        return 0.0
    return 3.0 * params.stiffness * (1.0 - params.restitution**2) / (4.0 * compression_start_rate)


def normal_force(
    params: ContactParams,
    penetration: float,
    penetration_rate: float,
    compression_start_rate: float,
) -> float:
    """Scalar normal force magnitude, clamped at zero from below."""
    if penetration < 0.0:
        raise ValueError("penetration must be >= 0")
    elastic = params.stiffness * penetration**params.exponent
    if params.fixed_damping is not None:
        d_c = params.fixed_damping
    else:
        d_c = hysteresis_factor(params, compression_start_rate) * penetration**params.exponent
    return max(0.0, elastic + d_c * penetration_rate)


def friction_coefficient(params: ContactParams, slip_speed: float) -> float:
    """Stribeck-regularized coefficient, smooth and zero at zero slip."""
    stribeck = params.dynamic_friction + (
        params.static_friction - params.dynamic_friction
    ) * math.exp(-((slip_speed / params.sliding_speed_coeff) ** params.stribeck_exponent))
    return stribeck * math.tanh(params.slope_param * slip_speed)


def friction_force(params: ContactParams, normal_magnitude: float, tangential_velocity: np.ndarray) -> np.ndarray:
    """Friction opposing the tangential slip; zero vector at zero slip."""
    if normal_magnitude < 0.0:
        raise ValueError("normal force magnitude must be >= 0")
    speed = float(np.linalg.norm(tangential_velocity))
    if speed == 0.0 or normal_magnitude == 0.0:
        return np.zeros(3)
    magnitude = normal_magnitude * friction_coefficient(params, speed)
    return -magnitude / speed * tangential_velocity


def resolve_contact(
    manifold: ContactManifold,
    node_id: int,
    node_position: np.ndarray,
    node_velocity: np.ndarray,
    target: TargetBodyState,
    params: ContactParams,
    compression_start_rate: float | None,
    time: float,
) -> ContactEvent:
    """Turn an intersecting manifold into normal + friction forces on the node.

    compression_start_rate is the registry value captured when the contact
    activated; None marks a contact first seen this step.
    """
    if not manifold.intersecting:
        raise ValueError("resolve_contact requires an intersecting manifold")
    normal = manifold.contact_normal
    v_rel = node_velocity - surface_velocity(target, manifold.contact_point)
    rate = -float(v_rel @ normal)  # positive while penetrating deeper
    if compression_start_rate is None:
        compression_start_rate = max(rate, MIN_COMPRESSION_SPEED)
    v_t = v_rel + rate * normal

    f_n = normal_force(params, manifold.penetration_depth, rate, compression_start_rate)
    f_t = friction_force(params, f_n, v_t)
    return ContactEvent(
        node_id=node_id,
        time=time,
        penetration=manifold.penetration_depth,
        penetration_rate=rate,
        compression_start_rate=compression_start_rate,
        tangential_velocity=v_t,
        normal_force=f_n * normal,
        friction_force=f_t,
        face_index=manifold.face_index,
    )
