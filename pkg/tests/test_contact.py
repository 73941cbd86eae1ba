"""Hertz normal force, hysteresis damping, Stribeck friction, and contact
resolution. Scalar oracles are independent hand evaluations of the model
formulas; invariants are exercised with hypothesis."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tethernet.collision import ContactManifold
from tethernet.contact import (
    MIN_COMPRESSION_SPEED,
    ContactConfigError,
    ContactParams,
    friction_coefficient,
    friction_force,
    hertz_stiffness,
    hysteresis_factor,
    normal_force,
    resolve_contact,
)
from tethernet.target import TargetBodyState

# ------------------------------------------------------------ hertz stiffness


def test_hertz_stiffness_steel_pair_hand_value():
    # two identical steel spheres: h = (1 - nu^2)/(pi E) each,
    # K = 4 / (3 pi (h_i + h_j)) * sqrt(R/2)
    nu, E, R = 0.3, 200e9, 0.1
    h = (1.0 - nu**2) / (math.pi * E)
    expected = 4.0 / (3.0 * math.pi * (2.0 * h)) * math.sqrt(R / 2.0)
    got = hertz_stiffness(R, R, nu, E, nu, E)
    assert got == pytest.approx(expected, rel=1e-14)
    # cross-check against the classical Hertz form K = 4/3 E* sqrt(R_eff)
    e_star = 1.0 / (2.0 * (1.0 - nu**2) / E)
    classical = 4.0 / 3.0 * e_star * math.sqrt(R / 2.0)
    assert got == pytest.approx(classical, rel=1e-12)


def test_hertz_stiffness_flat_rigid_partner():
    # R_j -> inf: effective radius term becomes sqrt(R_i);
    # E_j -> inf: partner compliance vanishes
    nu, E, R = 0.3, 200e9, 0.1
    h = (1.0 - nu**2) / (math.pi * E)
    expected = 4.0 / (3.0 * math.pi * h) * math.sqrt(R)
    assert hertz_stiffness(R, math.inf, nu, E) == pytest.approx(expected, rel=1e-14)


def test_hertz_stiffness_validation():
    with pytest.raises(ContactConfigError):
        hertz_stiffness(-0.1, 0.1, 0.3, 1e9)
    with pytest.raises(ContactConfigError):
        hertz_stiffness(0.1, 0.1, 0.6, 1e9)
    with pytest.raises(ContactConfigError):
        hertz_stiffness(0.1, 0.1, 0.3, -1e9)


# ------------------------------------------------------------- params checks


@pytest.mark.parametrize(
    "overrides",
    [
        {"stiffness": 0.0},
        {"restitution": 0.0},
        {"restitution": 1.5},
        {"static_friction": 0.3, "dynamic_friction": 0.5},
        {"dynamic_friction": -0.1, "static_friction": 0.1},
        {"sliding_speed_coeff": 0.0},
        {"slope_param": 0.0},
        {"fixed_damping": -1.0},
    ],
)
def test_params_validation(overrides):
    kwargs = dict(
        stiffness=500.0,
        restitution=0.5,
        static_friction=0.7,
        dynamic_friction=0.5,
        sliding_speed_coeff=0.001,
        stribeck_exponent=2.0,
        slope_param=10000.0,
    )
    kwargs.update(overrides)
    with pytest.raises(ContactConfigError):
        ContactParams(**kwargs)


# -------------------------------------------------------------- normal force


def test_normal_force_pure_elastic(contact_params):
    # delta = 0.01 m, no approach rate: f = K delta^1.5
    assert normal_force(contact_params, 0.01, 0.0, 1.0) == pytest.approx(
        500.0 * 0.01**1.5, rel=1e-14
    )


def test_normal_force_hysteresis_hand_value(contact_params):
    # mu_h = 3 K (1 - e^2) / (4 rate0); f = (K + mu_h * rate) delta^1.5
    delta, rate, rate0 = 0.01, 0.2, 1.0
    mu_h = 3.0 * 500.0 * (1.0 - 0.25) / (4.0 * rate0)
    expected = 500.0 * delta**1.5 + mu_h * delta**1.5 * rate
    assert normal_force(contact_params, delta, rate, rate0) == pytest.approx(expected, rel=1e-14)
    assert hysteresis_factor(contact_params, rate0) == pytest.approx(mu_h, rel=1e-14)


def test_normal_force_fixed_damping_override(contact_params):
    import dataclasses

    params = dataclasses.replace(contact_params, fixed_damping=0.5)
    assert normal_force(params, 0.01, 0.2, 1.0) == pytest.approx(
        500.0 * 0.01**1.5 + 0.5 * 0.2, rel=1e-14
    )


def test_normal_force_clamped_during_fast_separation(contact_params):
    # strongly negative rate makes the raw sum negative; contact cannot pull
    assert normal_force(contact_params, 1e-4, -100.0, 1e-3) == 0.0


def test_normal_force_rejects_negative_penetration(contact_params):
    with pytest.raises(ValueError):
        normal_force(contact_params, -0.01, 0.0, 1.0)


def test_hysteresis_factor_degenerate_start_rate(contact_params):
    assert hysteresis_factor(contact_params, 0.0) == 0.0
    assert hysteresis_factor(contact_params, -1.0) == 0.0


REFERENCE_PARAMS = ContactParams(
    stiffness=500.0,
    restitution=0.5,
    static_friction=0.7,
    dynamic_friction=0.5,
    sliding_speed_coeff=0.001,
    stribeck_exponent=2.0,
    slope_param=10000.0,
)


@settings(max_examples=200, deadline=None)
@given(
    delta=st.floats(0.0, 0.5),
    rate=st.floats(-50.0, 50.0),
    rate0=st.floats(1e-9, 50.0),
)
def test_normal_force_never_negative(delta, rate, rate0):
    assert normal_force(REFERENCE_PARAMS, delta, rate, rate0) >= 0.0


# ----------------------------------------------------------------- friction


def test_friction_zero_at_zero_slip(contact_params):
    assert friction_coefficient(contact_params, 0.0) == 0.0
    assert not friction_force(contact_params, 10.0, np.zeros(3)).any()


def test_friction_hand_value(contact_params):
    # |v_t| = 0.01 = 10 v_s: bracket = mu_d + (mu_s - mu_d) e^{-100}
    v = 0.01
    bracket = 0.5 + 0.2 * math.exp(-((v / 0.001) ** 2))
    expected = bracket * math.tanh(10000.0 * v)
    assert friction_coefficient(contact_params, v) == pytest.approx(expected, rel=1e-14)


def test_friction_direction_opposes_slip(contact_params):
    v_t = np.array([0.3, -0.4, 0.0])
    f = friction_force(contact_params, 2.0, v_t)
    # antiparallel: f x v = 0 and f . v < 0
    assert np.allclose(np.cross(f, v_t), 0.0, atol=1e-12)
    assert float(f @ v_t) < 0.0


def test_friction_odd_symmetry(contact_params):
    v_t = np.array([0.02, 0.01, -0.005])
    f1 = friction_force(contact_params, 3.0, v_t)
    f2 = friction_force(contact_params, 3.0, -v_t)
    assert np.allclose(f1, -f2, atol=1e-15)


def test_friction_asymptotes_to_dynamic_level(contact_params):
    # for |v_t| >= 10 v_s the Stribeck bump is gone and tanh saturates
    for v in (0.01, 0.05, 1.0, 10.0):
        assert friction_coefficient(contact_params, v) == pytest.approx(0.5, rel=0.01)


def test_friction_peak_below_static_bound(contact_params):
    speeds = np.linspace(1e-6, 0.05, 4000)
    coeffs = np.array([friction_coefficient(contact_params, s) for s in speeds])
    assert coeffs.max() < 0.7
    assert coeffs.max() > 0.5  # the Stribeck bump is actually visible


def test_friction_rejects_negative_normal(contact_params):
    with pytest.raises(ValueError):
        friction_force(contact_params, -1.0, np.array([0.1, 0, 0]))


@settings(max_examples=200, deadline=None)
@given(
    v=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    f_n=st.floats(0.0, 100.0),
)
def test_friction_never_adds_energy(v, f_n):
    v_t = np.asarray(v)
    f = friction_force(REFERENCE_PARAMS, f_n, v_t)
    assert float(f @ v_t) <= 0.0
    assert np.linalg.norm(f) <= 0.7 * f_n + 1e-12


# ----------------------------------------------------------- resolve_contact


def flat_floor_manifold(penetration=0.01):
    return ContactManifold(
        intersecting=True,
        contact_point=np.array([0.0, 0.0, 0.575]),
        contact_normal=np.array([0.0, 0.0, 1.0]),
        face_index=5,
        penetration_depth=penetration,
    )


def static_target(omega=(0, 0, 0)):
    return TargetBodyState(
        position=np.zeros(3),
        orientation=np.array([1.0, 0, 0, 0]),
        velocity=np.zeros(3),
        angular_velocity=np.asarray(omega, float),
    )


def test_resolve_contact_decomposition(contact_params):
    # node sliding along -x while sinking along -z
    event = resolve_contact(
        manifold=flat_floor_manifold(),
        node_id=7,
        node_position=np.array([0.0, 0.0, 0.58]),
        node_velocity=np.array([-0.3, 0.0, -2.0]),
        target=static_target(),
        params=contact_params,
        compression_start_rate=2.0,
        time=1.25,
    )
    assert event.penetration_rate == pytest.approx(2.0)
    assert event.tangential_velocity == pytest.approx([-0.3, 0.0, 0.0])
    # normal force along +z only; friction along +x only
    assert event.normal_force[0] == 0.0 and event.normal_force[1] == 0.0
    assert event.normal_force[2] > 0.0
    assert event.friction_force[0] > 0.0
    assert abs(float(event.friction_force @ event.normal_force)) < 1e-12
    assert event.node_id == 7 and event.time == 1.25 and event.face_index == 5


def test_resolve_contact_rest_is_frictionless(contact_params):
    event = resolve_contact(
        flat_floor_manifold(), 0, np.array([0.0, 0.0, 0.58]), np.zeros(3),
        static_target(), contact_params, 1.0, 0.0,
    )
    assert event.normal_force[2] == pytest.approx(500.0 * 0.01**1.5)
    assert not event.friction_force.any()


def test_resolve_contact_spinning_target_drags_node(contact_params):
    # stationary node on a spinning target: slip comes from omega x r
    omega = np.deg2rad([1.0, 0.5, 0.2])
    event = resolve_contact(
        flat_floor_manifold(), 0, np.array([0.0, 0.0, 0.58]), np.zeros(3),
        static_target(omega), contact_params, 1.0, 0.0,
    )
    v_surf = np.cross(omega, np.array([0.0, 0.0, 0.575]))
    v_rel = -v_surf
    v_t = v_rel - float(v_rel @ [0, 0, 1]) * np.array([0.0, 0.0, 1.0])
    assert event.tangential_velocity == pytest.approx(v_t, abs=1e-12)
    assert float(event.friction_force @ v_t) < 0.0


def test_resolve_contact_new_contact_floors_start_rate(contact_params):
    # contact born separating (rate < 0): floor keeps the hysteresis finite
    event = resolve_contact(
        flat_floor_manifold(), 0, np.array([0.0, 0.0, 0.58]),
        np.array([0.0, 0.0, 0.5]),  # moving away
        static_target(), contact_params, None, 0.0,
    )
    assert event.compression_start_rate == MIN_COMPRESSION_SPEED
    assert event.penetration_rate == pytest.approx(-0.5)


def test_resolve_contact_requires_intersection(contact_params):
    manifold = ContactManifold(
        intersecting=False,
        contact_point=np.zeros(3),
        contact_normal=np.array([0.0, 0.0, 1.0]),
        face_index=0,
        separation=0.1,
    )
    with pytest.raises(ValueError):
        resolve_contact(
            manifold, 0, np.zeros(3), np.zeros(3), static_target(), contact_params, None, 0.0
        )
