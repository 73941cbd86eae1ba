"""Fixed-step simulation loop: tether forces, collision detection, contact
resolution, node/target integration, event logging, capture metrics.

Deterministic by construction: fixed step, id-ordered reductions, no RNG in
the dynamics. Two runs of the same scenario produce identical logs.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import fastpath, tether
from .collision import ConvexPolyhedron, broad_phase, sphere_batch_query
from .contact import ContactEvent, ContactParams, MIN_COMPRESSION_SPEED
from .target import TargetBodyState, propagate_pose, world_inertia

__all__ = [
    "IntegratorConfig",
    "CaptureCriteria",
    "CaptureMetrics",
    "SimState",
    "RunResult",
    "SimEngine",
    "InstabilityError",
    "stability_dt_bound",
]

SCHEMES = ("semi_implicit_euler", "rk4")


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product without np.cross's axis-handling overhead."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack((a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0), axis=-1)


class InstabilityError(RuntimeError):
    """NaN/Inf detected in the state; carries the offending node and step."""

    def __init__(self, message: str, step_index: int, node_id: int | None):
        super().__init__(message)
        self.step_index = step_index
        self.node_id = node_id


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    duration: float
    scheme: str = "semi_implicit_euler"
    stability_check: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.duration < 0.0:
            raise ValueError("duration must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class CaptureCriteria:
    wrap_threshold: float = 0.5  # fraction of target faces touched at once
    speed_threshold: float = 0.5  # m/s, robot speed relative to the target surface
    hold_time: float = 0.5  # s both conditions must persist
    grace_period: float = 2.0  # s simulated after capture before stopping


@dataclass
class CaptureMetrics:
    first_contact_time: float | None = None
    faces_in_contact_max: int = 0
    wrap_score: float = 0.0  # best simultaneous fraction seen
    robot_relative_speed: list[float] = field(default_factory=list)
    captured: bool = False
    capture_time: float | None = None


@dataclass
class SimState:
    time: float
    step_index: int
    positions: np.ndarray  # (n, 3)
    velocities: np.ndarray  # (n, 3)
    target: TargetBodyState
    # node id -> (compression-start rate, activation step)
    contact_registry: dict[int, tuple[float, int]] = field(default_factory=dict)
    diagnostics: dict[str, int] = field(default_factory=dict)
    # transient: contact batch from the force evaluation of the last step
    last_contacts: "_ContactBatch | None" = None

    def copy(self) -> "SimState":
        return SimState(
            time=self.time,
            step_index=self.step_index,
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            target=self.target.copy(),
            contact_registry=dict(self.contact_registry),
            diagnostics=dict(self.diagnostics),
        )

    def bump(self, key: str, count: int = 1) -> None:
        if count:
            self.diagnostics[key] = self.diagnostics.get(key, 0) + count


@dataclass
class RunResult:
    trajectory: list[tuple]  # (time, body id, x, y, z, vx, vy, vz); id -1 = target
    events: list[ContactEvent]
    metrics: CaptureMetrics
    diagnostics: dict[str, int]
    final_state: SimState
    completed: bool
    failure: str | None = None
    wall_time: float = 0.0


def stability_dt_bound(network: tether.TetherNetwork) -> float:
    """Stiffness-limited step bound 0.2 / max_e sqrt(k_e / min endpoint mass)."""
    omega_max = 0.0
    for e in network.elements:
        m = min(network.nodes[e.i].mass, network.nodes[e.j].mass)
        omega_max = max(omega_max, math.sqrt(e.stiffness / m))
    return math.inf if omega_max == 0.0 else 0.2 / omega_max


@dataclass
class _ContactBatch:
    """Per-step contact solution in node-id order."""

    node_ids: np.ndarray
    penetration: np.ndarray
    rate: np.ndarray
    start_rate: np.ndarray
    normals: np.ndarray
    points: np.ndarray
    faces: np.ndarray
    normal_force: np.ndarray  # scalar magnitudes
    tangential_velocity: np.ndarray
    friction: np.ndarray  # vectors


class SimEngine:
    """Owns the immutable problem description and advances SimStates."""

    def __init__(
        self,
        network: tether.TetherNetwork,
        target: TargetBodyState,
        geometry: ConvexPolyhedron,
        contact_params: ContactParams,
        integrator: IntegratorConfig,
        capture: CaptureCriteria = CaptureCriteria(),
        atmosphere_density: float = 0.0,
        gravity: np.ndarray | None = None,
        grace_period: float | None = None,
    ):
        self.network = network
        self.geometry = geometry
        self.params = contact_params
        self.integrator = integrator
        self.capture = capture
        self.atmosphere_density = float(atmosphere_density)
        self.gravity = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
        self._initial_target = target.copy()

        nodes = network.nodes
        self.mass = np.array([n.mass for n in nodes])
        self.radius = np.array([n.radius for n in nodes])
        self.robot_ids = np.array([n.id for n in nodes if n.is_robot], dtype=int)
        self.elem_i = np.array([e.i for e in network.elements], dtype=int)
        self.elem_j = np.array([e.j for e in network.elements], dtype=int)
        self.elem_k = np.array([e.stiffness for e in network.elements])
        self.elem_d = np.array([e.damping for e in network.elements])
        self.elem_l0 = np.array([e.rest_length for e in network.elements])

        if integrator.stability_check:
            bound = stability_dt_bound(network)
            if integrator.dt > bound:
                raise ValueError(
                    f"dt={integrator.dt:g} s violates the stiffness stability bound "
                    f"{bound:g} s (0.2/sqrt(max k / min adjacent node mass))"
                )

    def initial_state(self) -> SimState:
        nodes = self.network.nodes
        return SimState(
            time=0.0,
            step_index=0,
            positions=np.array([n.position for n in nodes]),
            velocities=np.array([n.velocity for n in nodes]),
            target=self._initial_target.copy(),
        )

    # ---------------- forces ----------------

    def _node_forces(self, state: SimState, positions: np.ndarray, velocities: np.ndarray):
        diag = tether.ForceDiagnostics()
        forces = tether.tension_forces_batch(
            positions, velocities, self.elem_i, self.elem_j,
            self.elem_k, self.elem_d, self.elem_l0, diag,
        )
        if self.atmosphere_density > 0.0 and len(self.elem_i):
            forces += tether.aero_forces_batch(
                positions, velocities, self.elem_i, self.elem_j,
                self.atmosphere_density, self.network.material.diameter,
                self.network.material.drag_coefficient, diag,
            )
        state.bump("degenerate_elements", diag.degenerate_elements)
        state.bump("degenerate_aero_segments", diag.degenerate_aero_segments)
        forces += self.mass[:, None] * self.gravity
        return forces

    def _solve_contacts(
        self,
        state: SimState,
        positions: np.ndarray,
        velocities: np.ndarray,
        registry: dict[int, tuple[float, int]],
        update_registry: bool,
    ) -> _ContactBatch | None:
        cand = broad_phase(positions, self.radius, self.geometry, state.target)
        if len(cand) == 0:
            if update_registry:
                registry.clear()
            return None
        signed, points, normals, faces = sphere_batch_query(
            positions[cand], self.radius[cand], self.geometry, state.target
        )
        pen = self.radius[cand] - signed
        hit = pen > 0.0
        if update_registry:
            active = set(int(i) for i in cand[hit])
            for key in [k for k in registry if k not in active]:
                del registry[key]
        if not hit.any():
            return None

        ids = cand[hit]
        pen = pen[hit]
        normals = normals[hit]
        points = points[hit]
        faces = faces[hit]

        tgt = state.target
        v_surf = tgt.velocity + _cross(tgt.angular_velocity, points - tgt.position)
        v_rel = velocities[ids] - v_surf
        rate = -np.einsum("ij,ij->i", v_rel, normals)

        start_rate = np.empty(len(ids))
        for k, node_id in enumerate(ids):
            entry = registry.get(int(node_id))
            if entry is None:
                value = max(float(rate[k]), MIN_COMPRESSION_SPEED)
                if rate[k] <= 0.0:
                    state.bump("contacts_born_separating")
                if update_registry:
                    registry[int(node_id)] = (value, state.step_index)
                start_rate[k] = value
            else:
                start_rate[k] = entry[0]

        p = self.params
        delta_n = pen**p.exponent
        elastic = p.stiffness * delta_n
        if p.fixed_damping is not None:
            damping = p.fixed_damping * rate
        else:
            mu_h = 3.0 * p.stiffness * (1.0 - p.restitution**2) / (4.0 * start_rate)
            damping = mu_h * delta_n * rate
        f_n = elastic + damping
        clamped = f_n < 0.0
        state.bump("clamped_normal_forces", int(clamped.sum()))
        f_n = np.maximum(f_n, 0.0)

        v_t = v_rel + rate[:, None] * normals
        speed = np.linalg.norm(v_t, axis=1)
        safe = np.maximum(speed, 1e-300)
        coeff = (
            p.dynamic_friction
            + (p.static_friction - p.dynamic_friction)
            * np.exp(-((speed / p.sliding_speed_coeff) ** p.stribeck_exponent))
        ) * np.tanh(p.slope_param * speed)
        friction = np.where(
            (speed > 0.0)[:, None], (-(f_n * coeff) / safe)[:, None] * v_t, 0.0
        )
        return _ContactBatch(
            node_ids=ids, penetration=pen, rate=rate, start_rate=start_rate,
            normals=normals, points=points, faces=faces,
            normal_force=f_n, tangential_velocity=v_t, friction=friction,
        )

    def _accumulate(self, positions: np.ndarray, target: TargetBodyState, forces: np.ndarray, batch: _ContactBatch | None):
        """Add contact forces to nodes; return the reaction wrench on the target.

        The reaction is applied at node centers so that the discrete system
        conserves momentum exactly in dynamic-target mode.
        """
        if batch is None:
            return np.zeros(3), np.zeros(3)
        total = batch.normal_force[:, None] * batch.normals + batch.friction
        np.add.at(forces, batch.node_ids, total)
        reaction = -total.sum(axis=0)
        arms = _cross(positions[batch.node_ids] - target.position, -total)
        return reaction, arms.sum(axis=0)

    # ---------------- stepping ----------------

    def step(self, state: SimState) -> SimState:
        dt = self.integrator.dt
        out = state.copy()
        if self.integrator.scheme == "semi_implicit_euler":
            forces = self._node_forces(out, out.positions, out.velocities)
            batch = self._solve_contacts(
                out, out.positions, out.velocities, out.contact_registry, update_registry=True
            )
            reaction_f, reaction_t = self._accumulate(out.positions, out.target, forces, batch)
            out.velocities = out.velocities + forces / self.mass[:, None] * dt
            out.positions = out.positions + out.velocities * dt
            out.target = self._propagate_target(out.target, reaction_f, reaction_t, dt)
            out.last_contacts = batch
        else:
            out.target, out.positions, out.velocities, out.last_contacts = self._rk4_step(out, dt)
        out.time = state.time + dt
        out.step_index = state.step_index + 1
        self._check_finite(out)
        return out

    def _propagate_target(self, target: TargetBodyState, force, torque, dt) -> TargetBodyState:
        if target.mode == "dynamic":
            target.accumulated_force = target.accumulated_force + force + target.mass * self.gravity
            target.accumulated_torque = target.accumulated_torque + torque
        return propagate_pose(target, dt)

    def _rk4_step(self, state: SimState, dt: float):
        """Classic RK4 on node states; contact-start rates are frozen at stage 1.

        The target advances once per step using the stage-weighted reaction
        wrench, matching the fixed-step contract.
        """

        def derivative(positions, velocities, registry, update):
            forces = self._node_forces(state, positions, velocities)
            batch = self._solve_contacts(state, positions, velocities, registry, update)
            reaction_f, reaction_t = self._accumulate(positions, state.target, forces, batch)
            return forces / self.mass[:, None], reaction_f, reaction_t, batch

        x0, v0 = state.positions, state.velocities
        reg = state.contact_registry
        a1, f1, t1, b1 = derivative(x0, v0, reg, update=True)
        a2, f2, t2, _ = derivative(x0 + 0.5 * dt * v0, v0 + 0.5 * dt * a1, reg, update=False)
        a3, f3, t3, _ = derivative(
            x0 + 0.5 * dt * (v0 + 0.5 * dt * a1), v0 + 0.5 * dt * a2, reg, update=False
        )
        a4, f4, t4, _ = derivative(x0 + dt * (v0 + 0.5 * dt * a2), v0 + dt * a3, reg, update=False)

        velocities = v0 + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        k1, k2, k3, k4 = v0, v0 + 0.5 * dt * a1, v0 + 0.5 * dt * a2, v0 + dt * a3
        positions = x0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        reaction_f = (f1 + 2 * f2 + 2 * f3 + f4) / 6.0
        reaction_t = (t1 + 2 * t2 + 2 * t3 + t4) / 6.0
        target = self._propagate_target(state.target, reaction_f, reaction_t, dt)
        return target, positions, velocities, b1

    def _check_finite(self, state: SimState) -> None:
        if not np.isfinite(state.positions).all() or not np.isfinite(state.velocities).all():
            bad = ~(
                np.isfinite(state.positions).all(axis=1)
                & np.isfinite(state.velocities).all(axis=1)
            )
            node = int(np.argmax(bad))
            raise InstabilityError(
                f"non-finite state at node {node}, step {state.step_index}, "
                f"t={state.time:.6g} s",
                step_index=state.step_index,
                node_id=node,
            )
        if not np.isfinite(state.target.position).all() or not np.isfinite(
            state.target.velocity
        ).all():
            raise InstabilityError(
                f"non-finite target state at step {state.step_index}",
                step_index=state.step_index,
                node_id=None,
            )

    # ---------------- observables ----------------

    def mechanical_energy(self, state: SimState) -> float:
        """Kinetic + tether elastic + contact elastic (+ dynamic target kinetic)."""
        kinetic = 0.5 * float(np.sum(self.mass * np.einsum("ij,ij->i", state.velocities, state.velocities)))
        if state.target.mode == "dynamic":
            kinetic += 0.5 * state.target.mass * float(state.target.velocity @ state.target.velocity)
            iw = world_inertia(state.target)
            kinetic += 0.5 * float(state.target.angular_velocity @ (iw @ state.target.angular_velocity))
        elastic = 0.0
        if len(self.elem_i):
            r = state.positions[self.elem_i] - state.positions[self.elem_j]
            stretch = np.linalg.norm(r, axis=1) - self.elem_l0
            stretch = np.maximum(stretch, 0.0)
            elastic = 0.5 * float(np.sum(self.elem_k * stretch**2))
        contact_elastic = 0.0
        batch = self._solve_contacts(
            state, state.positions, state.velocities, dict(state.contact_registry), update_registry=False
        )
        if batch is not None:
            contact_elastic = (2.0 / 5.0) * self.params.stiffness * float(
                np.sum(batch.penetration ** 2.5)
            )
        return kinetic + elastic + contact_elastic

    def total_momentum(self, state: SimState):
        p = (self.mass[:, None] * state.velocities).sum(axis=0)
        l = _cross(state.positions, self.mass[:, None] * state.velocities).sum(axis=0)
        tgt = state.target
        if tgt.mode == "dynamic":
            p = p + tgt.mass * tgt.velocity
            l = l + np.cross(tgt.position, tgt.mass * tgt.velocity)
            l = l + world_inertia(tgt) @ tgt.angular_velocity
        return p, l

    def contact_events(self, state: SimState, batch: _ContactBatch | None) -> list[ContactEvent]:
        if batch is None:
            return []
        return [
            ContactEvent(
                node_id=int(batch.node_ids[k]),
                time=state.time,
                penetration=float(batch.penetration[k]),
                penetration_rate=float(batch.rate[k]),
                compression_start_rate=float(batch.start_rate[k]),
                tangential_velocity=batch.tangential_velocity[k].copy(),
                normal_force=float(batch.normal_force[k]) * batch.normals[k],
                friction_force=batch.friction[k].copy(),
                face_index=int(batch.faces[k]),
            )
            for k in range(len(batch.node_ids))
        ]

    def robot_relative_speeds(self, state: SimState) -> np.ndarray:
        tgt = state.target
        pos = state.positions[self.robot_ids]
        v_surf = tgt.velocity + _cross(tgt.angular_velocity, pos - tgt.position)
        v_rel = state.velocities[self.robot_ids] - v_surf
        return np.sqrt(np.einsum("ij,ij->i", v_rel, v_rel))

    # ---------------- full runs ----------------

    def run(
        self,
        output_interval: float = 0.0,
        log_events: bool = True,
        compiled: bool | None = None,
    ) -> RunResult:
        """Step from t=0 to duration, capture + grace, or divergence.

        compiled=None picks the numba inner loop when it applies (semi-implicit
        Euler scheme, numba importable); the pure-numpy loop is the reference.
        """
        if compiled is None:
            compiled = fastpath.AVAILABLE and self.integrator.scheme == "semi_implicit_euler"
        if compiled:
            if not fastpath.AVAILABLE or self.integrator.scheme != "semi_implicit_euler":
                raise ValueError("compiled runs need numba and the semi_implicit_euler scheme")
            return self._run_compiled(output_interval, log_events)
        return self._run_reference(output_interval, log_events)

    def _run_reference(self, output_interval: float, log_events: bool) -> RunResult:
        started = _time.perf_counter()
        cfg = self.integrator
        state = self.initial_state()
        n_steps = int(round(cfg.duration / cfg.dt))
        sample_every = max(1, int(round(output_interval / cfg.dt))) if output_interval > 0 else max(1, n_steps)

        trajectory: list[tuple] = []
        events: list[ContactEvent] = []
        metrics = CaptureMetrics()
        n_faces = len(self.geometry.faces)
        streak_start: float | None = None
        failure = None
        completed = True

        def sample(st: SimState) -> None:
            for i in range(len(st.positions)):
                trajectory.append(
                    (st.time, i, *st.positions[i].tolist(), *st.velocities[i].tolist())
                )
            tgt = st.target
            trajectory.append((st.time, -1, *tgt.position.tolist(), *tgt.velocity.tolist()))

        if n_steps > 0:
            sample(state)
        try:
            for k in range(n_steps):
                state = self.step(state)
                batch = state.last_contacts

                faces_now = 0 if batch is None else len(set(batch.faces.tolist()))
                wrap = faces_now / n_faces
                metrics.faces_in_contact_max = max(metrics.faces_in_contact_max, faces_now)
                metrics.wrap_score = max(metrics.wrap_score, wrap)
                if batch is not None and metrics.first_contact_time is None:
                    metrics.first_contact_time = state.time

                speeds = self.robot_relative_speeds(state)
                ok = (
                    wrap >= self.capture.wrap_threshold
                    and (len(speeds) == 0 or speeds.max() < self.capture.speed_threshold)
                )
                if ok:
                    if streak_start is None:
                        streak_start = state.time
                    if not metrics.captured and state.time - streak_start >= self.capture.hold_time:
                        metrics.captured = True
                        metrics.capture_time = state.time
                else:
                    streak_start = None

                if (k + 1) % sample_every == 0 or k + 1 == n_steps:
                    sample(state)
                    if log_events:
                        events.extend(self.contact_events(state, batch))
                if metrics.captured and state.time >= metrics.capture_time + self.capture.grace_period:
                    break
        except InstabilityError as err:
            completed = False
            failure = str(err)

        metrics.robot_relative_speed = [float(s) for s in self.robot_relative_speeds(state)]
        return RunResult(
            trajectory=trajectory,
            events=events,
            metrics=metrics,
            diagnostics=dict(state.diagnostics),
            final_state=state,
            completed=completed,
            failure=failure,
            wall_time=_time.perf_counter() - started,
        )

    def _run_compiled(self, output_interval: float, log_events: bool) -> RunResult:
        """Chunked numba inner loop with the same sampling/termination points
        as the reference loop."""
        started = _time.perf_counter()
        cfg = self.integrator
        dt = cfg.dt
        n_steps = int(round(cfg.duration / dt))
        sample_every = max(1, int(round(output_interval / dt))) if output_interval > 0 else max(1, n_steps)
        max_chunk = 20_000

        state = self.initial_state()
        positions = state.positions
        velocities = state.velocities
        tgt = state.target
        tgt_pos = tgt.position
        tgt_quat = tgt.orientation
        tgt_vel = tgt.velocity
        tgt_omega = tgt.angular_velocity
        dynamic = tgt.mode == "dynamic"
        inertia = tgt.inertia if tgt.inertia is not None else np.eye(3)

        n = len(positions)
        geo = self.geometry
        reg_active = np.zeros(n, dtype=bool)
        reg_rate = np.zeros(n)
        reg_step = np.zeros(n, dtype=np.int64)
        faces_buf = np.zeros(max_chunk, dtype=np.int64)
        speed_buf = np.zeros(max_chunk)
        snap_ids = np.zeros(n, dtype=np.int64)
        snap_pen = np.zeros(n)
        snap_rate = np.zeros(n)
        snap_start = np.zeros(n)
        snap_normal = np.zeros((n, 3))
        snap_point = np.zeros((n, 3))
        snap_face = np.zeros(n, dtype=np.int64)
        snap_fn = np.zeros(n)
        snap_vt = np.zeros((n, 3))
        snap_friction = np.zeros((n, 3))
        diag = np.zeros(4, dtype=np.int64)
        fixed_damping = math.nan if self.params.fixed_damping is None else self.params.fixed_damping

        trajectory: list[tuple] = []
        events: list[ContactEvent] = []
        metrics = CaptureMetrics()
        n_faces = len(geo.faces)
        streak_start: float | None = None
        failure = None
        completed = True
        time = 0.0
        k = 0
        termination_step: int | None = None
        last_batch: _ContactBatch | None = None

        def sample() -> None:
            for i in range(n):
                trajectory.append((time, i, *positions[i].tolist(), *velocities[i].tolist()))
            trajectory.append((time, -1, *tgt_pos.tolist(), *tgt_vel.tolist()))

        if n_steps > 0:
            sample()
        while k < n_steps:
            next_sample = ((k // sample_every) + 1) * sample_every
            stop = min(n_steps, next_sample, k + max_chunk)
            if termination_step is not None:
                stop = min(stop, termination_step)
            else:
                # keep any capture-triggered early stop out of the chunk
                # currently being executed, so it can be honored exactly
                horizon = self.capture.hold_time + self.capture.grace_period
                if streak_start is not None:
                    horizon -= time - streak_start
                margin = int(math.floor(horizon / dt)) - 2
                stop = min(stop, max(k + 1, k + margin))
            chunk = stop - k
            snap_count, bad = fastpath.run_chunk(
                positions, velocities,
                self.mass, self.radius, self.robot_ids,
                self.elem_i, self.elem_j, self.elem_k, self.elem_d, self.elem_l0,
                self.atmosphere_density, self.network.material.diameter,
                self.network.material.drag_coefficient, self.gravity,
                tgt_pos, tgt_quat, tgt_vel, tgt_omega, dynamic, tgt.mass, inertia,
                geo.normals, geo.offsets, geo.tri_a, geo.tri_b, geo.tri_c,
                geo.tri_face, geo.centroid, geo.bounding_radius,
                self.params.stiffness, self.params.exponent, self.params.restitution,
                self.params.static_friction, self.params.dynamic_friction,
                self.params.sliding_speed_coeff, self.params.stribeck_exponent,
                self.params.slope_param, fixed_damping,
                reg_active, reg_rate, reg_step,
                dt, chunk, k,
                faces_buf, speed_buf,
                snap_ids, snap_pen, snap_rate, snap_start, snap_normal,
                snap_point, snap_face, snap_fn, snap_vt, snap_friction,
                diag,
            )
            steps_done = chunk if bad < 0 else bad + 1
            for s in range(steps_done):
                time = time + dt
                faces_now = int(faces_buf[s])
                wrap = faces_now / n_faces
                metrics.faces_in_contact_max = max(metrics.faces_in_contact_max, faces_now)
                metrics.wrap_score = max(metrics.wrap_score, wrap)
                if faces_now > 0 and metrics.first_contact_time is None:
                    metrics.first_contact_time = time
                ok = wrap >= self.capture.wrap_threshold and (
                    len(self.robot_ids) == 0 or speed_buf[s] < self.capture.speed_threshold
                )
                if ok:
                    if streak_start is None:
                        streak_start = time
                    if not metrics.captured and time - streak_start >= self.capture.hold_time:
                        metrics.captured = True
                        metrics.capture_time = time
                        # exact step at which the reference loop breaks
                        t_probe, m_probe = time, k + s + 1
                        deadline = metrics.capture_time + self.capture.grace_period
                        while t_probe < deadline and m_probe < n_steps:
                            t_probe += dt
                            m_probe += 1
                        termination_step = m_probe
                else:
                    streak_start = None
            k += steps_done

            if bad >= 0:
                completed = False
                bad_nodes = ~(
                    np.isfinite(positions).all(axis=1) & np.isfinite(velocities).all(axis=1)
                )
                node = int(np.argmax(bad_nodes)) if bad_nodes.any() else None
                failure = (
                    f"non-finite state at node {node}, step {k - 1}, t={time:.6g} s"
                    if node is not None
                    else f"non-finite target state at step {k - 1}"
                )
                break

            if snap_count > 0:
                sel = slice(0, snap_count)
                last_batch = _ContactBatch(
                    node_ids=snap_ids[sel].copy(),
                    penetration=snap_pen[sel].copy(),
                    rate=snap_rate[sel].copy(),
                    start_rate=snap_start[sel].copy(),
                    normals=snap_normal[sel].copy(),
                    points=snap_point[sel].copy(),
                    faces=snap_face[sel].copy(),
                    normal_force=snap_fn[sel].copy(),
                    tangential_velocity=snap_vt[sel].copy(),
                    friction=snap_friction[sel].copy(),
                )
            else:
                last_batch = None
            if k % sample_every == 0 or k == n_steps:
                sample()
                if log_events:
                    state_stub = SimState(
                        time=time, step_index=k, positions=positions,
                        velocities=velocities, target=tgt,
                    )
                    events.extend(self.contact_events(state_stub, last_batch))
            if termination_step is not None and k >= termination_step:
                break

        tgt._rotation = None  # orientation was advanced in place
        state.time = time
        state.step_index = k
        state.contact_registry = {
            int(i): (float(reg_rate[i]), int(reg_step[i])) for i in np.where(reg_active)[0]
        }
        for key, slot in (
            ("degenerate_elements", fastpath.DIAG_DEGENERATE_ELEMENTS),
            ("degenerate_aero_segments", fastpath.DIAG_DEGENERATE_AERO),
            ("contacts_born_separating", fastpath.DIAG_BORN_SEPARATING),
            ("clamped_normal_forces", fastpath.DIAG_CLAMPED),
        ):
            state.bump(key, int(diag[slot]))
        state.last_contacts = last_batch
        metrics.robot_relative_speed = [float(s) for s in self.robot_relative_speeds(state)]
        return RunResult(
            trajectory=trajectory,
            events=events,
            metrics=metrics,
            diagnostics=dict(state.diagnostics),
            final_state=state,
            completed=completed,
            failure=failure,
            wall_time=_time.perf_counter() - started,
        )
