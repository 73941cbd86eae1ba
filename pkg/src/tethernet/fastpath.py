"""Compiled inner loop for the semi-implicit Euler scheme.

This mirrors SimEngine.step() (tension + aero + gravity forces, sphere-vs-
convex narrow phase, Hertz/Stribeck contact, node integration, rigid-target
propagation) as a single numba kernel advancing a chunk of steps at a time.
The pure-numpy step() remains the reference implementation; the test suite
pins this kernel against it. Results agree to floating-point accumulation
noise (the kernel is not guaranteed bit-identical to numpy's SIMD math, but
is itself fully deterministic run-to-run).

The kernel returns per-step capture observables (distinct faces in contact,
max robot speed relative to the target surface) so the caller can evaluate
the capture criterion with per-step resolution, plus a contact snapshot of
the final step for event logging.
"""

import math

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


DEGENERATE_LENGTH = 1e-12
GJK_TOLERANCE = 1e-10
MIN_COMPRESSION_SPEED = 1e-9

# diagnostics counter slots
DIAG_DEGENERATE_ELEMENTS = 0
DIAG_DEGENERATE_AERO = 1
DIAG_BORN_SEPARATING = 2
DIAG_CLAMPED = 3


@njit(cache=True)
def _quat_to_matrix(q, out):
    w, x, y, z = q[0], q[1], q[2], q[3]
    out[0, 0] = 1 - 2 * (y * y + z * z)
    out[0, 1] = 2 * (x * y - w * z)
    out[0, 2] = 2 * (x * z + w * y)
    out[1, 0] = 2 * (x * y + w * z)
    out[1, 1] = 1 - 2 * (x * x + z * z)
    out[1, 2] = 2 * (y * z - w * x)
    out[2, 0] = 2 * (x * z - w * y)
    out[2, 1] = 2 * (y * z + w * x)
    out[2, 2] = 1 - 2 * (x * x + y * y)


@njit(cache=True)
def _quat_step(q, omega, dt):
    """exp-map increment by omega*dt, then renormalize (matches target module)."""
    rx, ry, rz = omega[0] * dt, omega[1] * dt, omega[2] * dt
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-14:
        ew, ex, ey, ez = 1.0, 0.5 * rx, 0.5 * ry, 0.5 * rz
        n = math.sqrt(ew * ew + ex * ex + ey * ey + ez * ez)
        ew, ex, ey, ez = ew / n, ex / n, ey / n, ez / n
    else:
        s = math.sin(0.5 * angle) / angle
        ew, ex, ey, ez = math.cos(0.5 * angle), s * rx, s * ry, s * rz
    w, x, y, z = q[0], q[1], q[2], q[3]
    nw = ew * w - ex * x - ey * y - ez * z
    nx = ew * x + ex * w + ey * z - ez * y
    ny = ew * y - ex * z + ey * w + ez * x
    nz = ew * z + ex * y - ey * x + ez * w
    n = math.sqrt(nw * nw + nx * nx + ny * ny + nz * nz)
    q[0], q[1], q[2], q[3] = nw / n, nx / n, ny / n, nz / n


@njit(cache=True)
def _solve33(a, b, out):
    """3x3 linear solve via the adjugate (inertia tensors are well conditioned)."""
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    c10 = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    c11 = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    c12 = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    c20 = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    c21 = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    c22 = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    out[0] = (c00 * b[0] + c10 * b[1] + c20 * b[2]) / det
    out[1] = (c01 * b[0] + c11 * b[1] + c21 * b[2]) / det
    out[2] = (c02 * b[0] + c12 * b[1] + c22 * b[2]) / det


@njit(cache=True)
def _closest_on_triangle(p, a, b, c, out):
    """Closest point on triangle abc to p (Ericson, real-time collision 5.1.5)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        out[0], out[1], out[2] = a[0], a[1], a[2]
        return
    bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        out[0], out[1], out[2] = b[0], b[1], b[2]
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        out[0], out[1], out[2] = a[0] + t * abx, a[1] + t * aby, a[2] + t * abz
        return
    cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        out[0], out[1], out[2] = c[0], c[1], c[2]
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        out[0], out[1], out[2] = a[0] + t * acx, a[1] + t * acy, a[2] + t * acz
        return
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = b[0] + t * (c[0] - b[0])
        out[1] = b[1] + t * (c[1] - b[1])
        out[2] = b[2] + t * (c[2] - b[2])
        return
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = a[0] + abx * v + acx * w
    out[1] = a[1] + aby * v + acy * w
    out[2] = a[2] + abz * v + acz * w


@njit(cache=True)
def run_chunk(
    # node state (updated in place)
    positions,
    velocities,
    # immutable node/element description
    mass,
    radius,
    robot_ids,
    elem_i,
    elem_j,
    elem_k,
    elem_d,
    elem_l0,
    # environment
    aero_density,
    line_diameter,
    drag_coefficient,
    gravity,
    # target state (updated in place)
    tgt_pos,
    tgt_quat,
    tgt_vel,
    tgt_omega,
    tgt_dynamic,
    tgt_mass,
    tgt_inertia,
    # geometry (body frame)
    face_normals,
    face_offsets,
    tri_a,
    tri_b,
    tri_c,
    tri_face,
    geo_centroid,
    geo_bounding_radius,
    # contact parameters
    c_stiffness,
    c_exponent,
    c_restitution,
    c_mu_s,
    c_mu_d,
    c_v_s,
    c_p,
    c_k_t,
    c_fixed_damping,  # nan -> hysteresis model
    # contact registry (updated in place)
    reg_active,
    reg_rate,
    reg_step,
    # stepping
    dt,
    n_steps,
    step_base,
    # per-step observables (length n_steps)
    faces_per_step,
    max_robot_speed,
    # final-step contact snapshot (capacity n_nodes)
    snap_ids,
    snap_pen,
    snap_rate,
    snap_start_rate,
    snap_normal,
    snap_point,
    snap_face,
    snap_fn,
    snap_vt,
    snap_friction,
    # diagnostics counters (4 slots)
    diag,
):
    """Advance n_steps; returns (final-step contact count, bad step or -1)."""
    n = positions.shape[0]
    n_elem = elem_i.shape[0]
    n_faces = face_normals.shape[0]
    n_tri = tri_a.shape[0]

    forces = np.zeros((n, 3))
    rot = np.empty((3, 3))
    body = np.empty(3)
    cp = np.empty(3)
    best_cp = np.empty(3)
    iw = np.empty((3, 3))
    tmp3 = np.empty(3)
    rhs = np.empty(3)
    face_touched = np.zeros(n_faces, dtype=np.bool_)
    snap_count = 0
    use_aero = aero_density > 0.0 and n_elem > 0
    aero_pref = aero_density * line_diameter / 4.0 * drag_coefficient

    for step in range(n_steps):
        last = step == n_steps - 1
        if last:
            snap_count = 0
        # ---------------- internal forces
        for a in range(n):
            forces[a, 0] = mass[a] * gravity[0]
            forces[a, 1] = mass[a] * gravity[1]
            forces[a, 2] = mass[a] * gravity[2]
        for e in range(n_elem):
            i = elem_i[e]
            j = elem_j[e]
            rx = positions[i, 0] - positions[j, 0]
            ry = positions[i, 1] - positions[j, 1]
            rz = positions[i, 2] - positions[j, 2]
            length = math.sqrt(rx * rx + ry * ry + rz * rz)
            if length < DEGENERATE_LENGTH:
                diag[DIAG_DEGENERATE_ELEMENTS] += 1
                continue
            stretch = length - elem_l0[e]
            if stretch <= 0.0:
                continue
            ux, uy, uz = rx / length, ry / length, rz / length
            vx = velocities[i, 0] - velocities[j, 0]
            vy = velocities[i, 1] - velocities[j, 1]
            vz = velocities[i, 2] - velocities[j, 2]
            rate = vx * ux + vy * uy + vz * uz
            mag = -elem_k[e] * stretch - elem_d[e] * rate
            forces[i, 0] += mag * ux
            forces[i, 1] += mag * uy
            forces[i, 2] += mag * uz
            forces[j, 0] -= mag * ux
            forces[j, 1] -= mag * uy
            forces[j, 2] -= mag * uz
        if use_aero:
            for e in range(n_elem):
                for side in range(2):
                    a = elem_i[e] if side == 0 else elem_j[e]
                    b = elem_j[e] if side == 0 else elem_i[e]
                    sx = positions[a, 0] - positions[b, 0]
                    sy = positions[a, 1] - positions[b, 1]
                    sz = positions[a, 2] - positions[b, 2]
                    length = math.sqrt(sx * sx + sy * sy + sz * sz)
                    if length < DEGENERATE_LENGTH:
                        diag[DIAG_DEGENERATE_AERO] += 1
                        continue
                    ux, uy, uz = sx / length, sy / length, sz / length
                    vx, vy, vz = velocities[a, 0], velocities[a, 1], velocities[a, 2]
                    speed = math.sqrt(vx * vx + vy * vy + vz * vz)
                    # (v x u) x u = (v.u) u - v
                    vdotu = vx * ux + vy * uy + vz * uz
                    nx = vdotu * ux - vx
                    ny = vdotu * uy - vy
                    nz = vdotu * uz - vz
                    scale = aero_pref * speed / length
                    forces[a, 0] += scale * nx
                    forces[a, 1] += scale * ny
                    forces[a, 2] += scale * nz

        # ---------------- contacts
        _quat_to_matrix(tgt_quat, rot)
        wcx = rot[0, 0] * geo_centroid[0] + rot[0, 1] * geo_centroid[1] + rot[0, 2] * geo_centroid[2] + tgt_pos[0]
        wcy = rot[1, 0] * geo_centroid[0] + rot[1, 1] * geo_centroid[1] + rot[1, 2] * geo_centroid[2] + tgt_pos[1]
        wcz = rot[2, 0] * geo_centroid[0] + rot[2, 1] * geo_centroid[1] + rot[2, 2] * geo_centroid[2] + tgt_pos[2]
        react_fx = react_fy = react_fz = 0.0
        react_tx = react_ty = react_tz = 0.0
        for f in range(n_faces):
            face_touched[f] = False
        faces_now = 0

        for a in range(n):
            dx = positions[a, 0] - wcx
            dy = positions[a, 1] - wcy
            dz = positions[a, 2] - wcz
            if math.sqrt(dx * dx + dy * dy + dz * dz) > geo_bounding_radius + radius[a]:
                reg_active[a] = False
                continue
            # body-frame center
            px = positions[a, 0] - tgt_pos[0]
            py = positions[a, 1] - tgt_pos[1]
            pz = positions[a, 2] - tgt_pos[2]
            body[0] = rot[0, 0] * px + rot[1, 0] * py + rot[2, 0] * pz
            body[1] = rot[0, 1] * px + rot[1, 1] * py + rot[2, 1] * pz
            body[2] = rot[0, 2] * px + rot[1, 2] * py + rot[2, 2] * pz
            max_plane = -1.0e300
            max_face = 0
            for f in range(n_faces):
                d = (
                    face_normals[f, 0] * body[0]
                    + face_normals[f, 1] * body[1]
                    + face_normals[f, 2] * body[2]
                    - face_offsets[f]
                )
                if d > max_plane:
                    max_plane = d
                    max_face = f
            if max_plane <= 0.0:
                # center contained: nearest-face-plane expansion
                signed = max_plane
                face = max_face
                nbx = face_normals[face, 0]
                nby = face_normals[face, 1]
                nbz = face_normals[face, 2]
                cbx = body[0] - signed * nbx
                cby = body[1] - signed * nby
                cbz = body[2] - signed * nbz
            else:
                best_d2 = 1.0e300
                best_t = 0
                for t in range(n_tri):
                    _closest_on_triangle(body, tri_a[t], tri_b[t], tri_c[t], cp)
                    ddx = body[0] - cp[0]
                    ddy = body[1] - cp[1]
                    ddz = body[2] - cp[2]
                    d2 = ddx * ddx + ddy * ddy + ddz * ddz
                    if d2 < best_d2:
                        best_d2 = d2
                        best_t = t
                        best_cp[0], best_cp[1], best_cp[2] = cp[0], cp[1], cp[2]
                dist = math.sqrt(best_d2)
                face = tri_face[best_t]
                signed = dist
                cbx, cby, cbz = best_cp[0], best_cp[1], best_cp[2]
                if dist > GJK_TOLERANCE:
                    nbx = (body[0] - cbx) / dist
                    nby = (body[1] - cby) / dist
                    nbz = (body[2] - cbz) / dist
                else:
                    nbx = face_normals[face, 0]
                    nby = face_normals[face, 1]
                    nbz = face_normals[face, 2]
            pen = radius[a] - signed
            if pen <= 0.0:
                reg_active[a] = False
                continue

            # world-frame contact point and normal
            wx = rot[0, 0] * cbx + rot[0, 1] * cby + rot[0, 2] * cbz + tgt_pos[0]
            wy = rot[1, 0] * cbx + rot[1, 1] * cby + rot[1, 2] * cbz + tgt_pos[1]
            wz = rot[2, 0] * cbx + rot[2, 1] * cby + rot[2, 2] * cbz + tgt_pos[2]
            nwx = rot[0, 0] * nbx + rot[0, 1] * nby + rot[0, 2] * nbz
            nwy = rot[1, 0] * nbx + rot[1, 1] * nby + rot[1, 2] * nbz
            nwz = rot[2, 0] * nbx + rot[2, 1] * nby + rot[2, 2] * nbz

            # relative velocity against the surface point
            ax = wx - tgt_pos[0]
            ay = wy - tgt_pos[1]
            az = wz - tgt_pos[2]
            svx = tgt_vel[0] + tgt_omega[1] * az - tgt_omega[2] * ay
            svy = tgt_vel[1] + tgt_omega[2] * ax - tgt_omega[0] * az
            svz = tgt_vel[2] + tgt_omega[0] * ay - tgt_omega[1] * ax
            vrx = velocities[a, 0] - svx
            vry = velocities[a, 1] - svy
            vrz = velocities[a, 2] - svz
            rate = -(vrx * nwx + vry * nwy + vrz * nwz)

            if not reg_active[a]:
                start = rate if rate > MIN_COMPRESSION_SPEED else MIN_COMPRESSION_SPEED
                if rate <= 0.0:
                    diag[DIAG_BORN_SEPARATING] += 1
                reg_active[a] = True
                reg_rate[a] = start
                reg_step[a] = step_base + step
            start_rate = reg_rate[a]

            delta_n = pen**c_exponent
            elastic = c_stiffness * delta_n
            if not math.isnan(c_fixed_damping):
                damping = c_fixed_damping * rate
            else:
                mu_h = 3.0 * c_stiffness * (1.0 - c_restitution * c_restitution) / (4.0 * start_rate)
                damping = mu_h * delta_n * rate
            f_n = elastic + damping
            if f_n < 0.0:
                diag[DIAG_CLAMPED] += 1
                f_n = 0.0

            vtx = vrx + rate * nwx
            vty = vry + rate * nwy
            vtz = vrz + rate * nwz
            slip = math.sqrt(vtx * vtx + vty * vty + vtz * vtz)
            ftx = fty = ftz = 0.0
            if slip > 0.0 and f_n > 0.0:
                coeff = (
                    c_mu_d + (c_mu_s - c_mu_d) * math.exp(-((slip / c_v_s) ** c_p))
                ) * math.tanh(c_k_t * slip)
                s = -(f_n * coeff) / slip
                ftx, fty, ftz = s * vtx, s * vty, s * vtz

            tx = f_n * nwx + ftx
            ty = f_n * nwy + fty
            tz = f_n * nwz + ftz
            forces[a, 0] += tx
            forces[a, 1] += ty
            forces[a, 2] += tz
            react_fx -= tx
            react_fy -= ty
            react_fz -= tz
            # torque arm at the node center (momentum-exact discrete coupling)
            rx = positions[a, 0] - tgt_pos[0]
            ry = positions[a, 1] - tgt_pos[1]
            rz = positions[a, 2] - tgt_pos[2]
            react_tx += ry * (-tz) - rz * (-ty)
            react_ty += rz * (-tx) - rx * (-tz)
            react_tz += rx * (-ty) - ry * (-tx)

            if not face_touched[face]:
                face_touched[face] = True
                faces_now += 1
            if last:
                snap_ids[snap_count] = a
                snap_pen[snap_count] = pen
                snap_rate[snap_count] = rate
                snap_start_rate[snap_count] = start_rate
                snap_normal[snap_count, 0] = nwx
                snap_normal[snap_count, 1] = nwy
                snap_normal[snap_count, 2] = nwz
                snap_point[snap_count, 0] = wx
                snap_point[snap_count, 1] = wy
                snap_point[snap_count, 2] = wz
                snap_face[snap_count] = face
                snap_fn[snap_count] = f_n
                snap_vt[snap_count, 0] = vtx
                snap_vt[snap_count, 1] = vty
                snap_vt[snap_count, 2] = vtz
                snap_friction[snap_count, 0] = ftx
                snap_friction[snap_count, 1] = fty
                snap_friction[snap_count, 2] = ftz
                snap_count += 1

        faces_per_step[step] = faces_now

        # ---------------- integrate nodes
        ok = True
        for a in range(n):
            inv = dt / mass[a]
            velocities[a, 0] += forces[a, 0] * inv
            velocities[a, 1] += forces[a, 1] * inv
            velocities[a, 2] += forces[a, 2] * inv
            positions[a, 0] += velocities[a, 0] * dt
            positions[a, 1] += velocities[a, 1] * dt
            positions[a, 2] += velocities[a, 2] * dt
            if not (
                math.isfinite(positions[a, 0])
                and math.isfinite(positions[a, 1])
                and math.isfinite(positions[a, 2])
                and math.isfinite(velocities[a, 0])
                and math.isfinite(velocities[a, 1])
                and math.isfinite(velocities[a, 2])
            ):
                ok = False

        # ---------------- propagate target
        if tgt_dynamic:
            # world inertia and gyroscopic term
            for r0 in range(3):
                for c0 in range(3):
                    s = 0.0
                    for k0 in range(3):
                        for l0 in range(3):
                            s += rot[r0, k0] * tgt_inertia[k0, l0] * rot[c0, l0]
                    iw[r0, c0] = s
            # h = Iw * omega
            for r0 in range(3):
                tmp3[r0] = iw[r0, 0] * tgt_omega[0] + iw[r0, 1] * tgt_omega[1] + iw[r0, 2] * tgt_omega[2]
            gx = tgt_omega[1] * tmp3[2] - tgt_omega[2] * tmp3[1]
            gy = tgt_omega[2] * tmp3[0] - tgt_omega[0] * tmp3[2]
            gz = tgt_omega[0] * tmp3[1] - tgt_omega[1] * tmp3[0]
            total_fx = react_fx + tgt_mass * gravity[0]
            total_fy = react_fy + tgt_mass * gravity[1]
            total_fz = react_fz + tgt_mass * gravity[2]
            tgt_vel[0] += total_fx / tgt_mass * dt
            tgt_vel[1] += total_fy / tgt_mass * dt
            tgt_vel[2] += total_fz / tgt_mass * dt
            rhs[0] = react_tx - gx
            rhs[1] = react_ty - gy
            rhs[2] = react_tz - gz
            _solve33(iw, rhs, tmp3)
            tgt_omega[0] += tmp3[0] * dt
            tgt_omega[1] += tmp3[1] * dt
            tgt_omega[2] += tmp3[2] * dt
        tgt_pos[0] += tgt_vel[0] * dt
        tgt_pos[1] += tgt_vel[1] * dt
        tgt_pos[2] += tgt_vel[2] * dt
        _quat_step(tgt_quat, tgt_omega, dt)
        if not (math.isfinite(tgt_pos[0]) and math.isfinite(tgt_vel[0])):
            ok = False

        # ---------------- post-step observables
        _quat_to_matrix(tgt_quat, rot)
        max_speed = 0.0
        for ri in range(robot_ids.shape[0]):
            a = robot_ids[ri]
            rx = positions[a, 0] - tgt_pos[0]
            ry = positions[a, 1] - tgt_pos[1]
            rz = positions[a, 2] - tgt_pos[2]
            svx = tgt_vel[0] + tgt_omega[1] * rz - tgt_omega[2] * ry
            svy = tgt_vel[1] + tgt_omega[2] * rx - tgt_omega[0] * rz
            svz = tgt_vel[2] + tgt_omega[0] * ry - tgt_omega[1] * rx
            vx = velocities[a, 0] - svx
            vy = velocities[a, 1] - svy
            vz = velocities[a, 2] - svz
            speed = math.sqrt(vx * vx + vy * vy + vz * vz)
            if speed > max_speed:
                max_speed = speed
        max_robot_speed[step] = max_speed

        if not ok:
            return snap_count, step

    return snap_count, -1
