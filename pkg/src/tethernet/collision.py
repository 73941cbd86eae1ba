"""Narrow/broad-phase collision detection between spheres and a convex
polyhedral target.

All moving proxies are spheres, so the narrow phase runs point-vs-polyhedron
(GJK on the vertex set) and subtracts the sphere radius. Deep containment
falls back to the nearest-face-plane distance, which is exact for a convex
body. A fully vectorized closest-feature path (`sphere_batch_query`) serves
the engine inner loop and is pinned against `gjk_distance` by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .target import TargetBodyState

__all__ = [
    "ConvexPolyhedron",
    "ContactQuery",
    "ContactManifold",
    "GeometryError",
    "make_box",
    "support",
    "gjk_distance",
    "sphere_batch_query",
    "broad_phase",
]

GJK_TOLERANCE = 1e-10  # m, simplex progress
GJK_MAX_ITERATIONS = 64
CONVEXITY_TOLERANCE = 1e-9  # m


class GeometryError(ValueError):
    """Degenerate or non-convex target geometry (raised at load, never mid-run)."""


def _face_plane(vertices: np.ndarray, face: list[int], centroid: np.ndarray) -> tuple[np.ndarray, float]:
    pts = vertices[face]
    # Newell normal; robust for near-degenerate polygons
    normal = np.zeros(3)
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        normal += np.cross(a, b)
    norm = np.linalg.norm(normal)
    if norm < 1e-14:
        raise GeometryError(f"face {face} is degenerate")
    normal = normal / norm
    offset = float(normal @ pts[0])
    if normal @ centroid > offset:
        normal, offset = -normal, -offset
    return normal, offset


@dataclass
class ConvexPolyhedron:
    """Convex collision geometry in the target body frame."""

    vertices: np.ndarray  # (nv, 3)
    faces: list[list[int]]  # outward-oriented vertex-index polygons

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3 or len(self.vertices) < 4:
            raise GeometryError("polyhedron needs at least four 3D vertices")
        centroid = self.vertices.mean(axis=0)
        normals, offsets = [], []
        for face in self.faces:
            if len(face) < 3:
                raise GeometryError(f"face {face} has fewer than three vertices")
            n, off = _face_plane(self.vertices, face, centroid)
            normals.append(n)
            offsets.append(off)
        self.normals = np.array(normals)
        self.offsets = np.array(offsets)

        signed = self.vertices @ self.normals.T - self.offsets
        if signed.max() > CONVEXITY_TOLERANCE:
            raise GeometryError(
                f"polyhedron is not convex: vertex protrudes {signed.max():.3e} m past a face"
            )
        edge_count: dict[tuple[int, int], int] = {}
        for face in self.faces:
            for a, b in zip(face, face[1:] + face[:1]):
                if a == b:
                    raise GeometryError(f"face {face} repeats vertex {a}")
                key = (min(a, b), max(a, b))
                edge_count[key] = edge_count.get(key, 0) + 1
        bad = [e for e, c in edge_count.items() if c != 2]
        if bad:
            raise GeometryError(f"polyhedron is not watertight at edges {bad[:4]}")

        # fan triangulation, keeping the parent face index for contact reporting
        tri_a, tri_b, tri_c, tri_face = [], [], [], []
        for f_idx, face in enumerate(self.faces):
            for k in range(1, len(face) - 1):
                tri_a.append(face[0])
                tri_b.append(face[k])
                tri_c.append(face[k + 1])
                tri_face.append(f_idx)
        self.tri_a = self.vertices[tri_a]
        self.tri_b = self.vertices[tri_b]
        self.tri_c = self.vertices[tri_c]
        self.tri_face = np.array(tri_face)

        self.centroid = centroid
        self.bounding_radius = float(np.linalg.norm(self.vertices - centroid, axis=1).max())

        if (self.offsets - self.normals @ centroid).min() < 1e-12:
            raise GeometryError("polyhedron has (near) zero volume")


def make_box(edge_lengths) -> ConvexPolyhedron:
    """Axis-aligned box centered at the body origin."""
    ex, ey, ez = (float(v) / 2.0 for v in edge_lengths)
    if min(ex, ey, ez) <= 0.0:
        raise GeometryError("box edge lengths must be positive")
    verts = np.array(
        [[sx * ex, sy * ey, sz * ez] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    )
    faces = [
        [0, 1, 3, 2],  # -x
        [4, 6, 7, 5],  # +x
        [0, 4, 5, 1],  # -y
        [2, 3, 7, 6],  # +y
        [0, 2, 6, 4],  # -z
        [1, 5, 7, 3],  # +z
    ]
    return ConvexPolyhedron(verts, faces)


@dataclass(frozen=True)
class ContactQuery:
    center: np.ndarray  # sphere center, world frame
    radius: float
    pose: TargetBodyState

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise GeometryError("sphere radius must be > 0")


@dataclass
class ContactManifold:
    intersecting: bool
    contact_point: np.ndarray  # on the target surface, world frame
    contact_normal: np.ndarray  # unit, target surface -> outward/sphere side
    face_index: int
    penetration_depth: float | None = None  # m, set iff intersecting
    separation: float | None = None  # m, set iff not intersecting
    gjk_fallback: bool = False


def support(poly: ConvexPolyhedron, pose: TargetBodyState, direction: np.ndarray) -> np.ndarray:
    """World-frame vertex farthest along `direction`; ties -> lowest index."""
    direction = np.asarray(direction, dtype=float)
    if float(direction @ direction) == 0.0:
        raise ValueError("support direction must be nonzero")
    rot = pose.rotation
    body_dir = rot.T @ direction
    idx = int(np.argmax(poly.vertices @ body_dir))
    return rot @ poly.vertices[idx] + pose.position


def _closest_on_simplex(point: np.ndarray, simplex: list[np.ndarray]):
    """Closest point to `point` in conv(simplex) and the minimal supporting subset."""
    best = None
    for size in range(1, len(simplex) + 1):
        for subset in combinations(range(len(simplex)), size):
            pts = [simplex[s] for s in subset]
            if size == 1:
                lam = np.array([1.0])
            else:
                a = np.array(pts)
                gram = a @ a.T
                m = np.zeros((size + 1, size + 1))
                m[:size, :size] = gram
                m[:size, size] = 1.0
                m[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[:size] = a @ point
                rhs[size] = 1.0
                try:
                    sol = np.linalg.solve(m, rhs)
                except np.linalg.LinAlgError:
                    continue
                lam = sol[:size]
                if np.any(lam < -1e-12):
                    continue
            candidate = np.zeros(3)
            for weight, p in zip(lam, pts):
                candidate += weight * p
            d2 = float((point - candidate) @ (point - candidate))
            if best is None or d2 < best[0] - 1e-30:
                best = (d2, candidate, [simplex[s] for s in subset])
    assert best is not None
    return best[1], best[2]


def _gjk_closest_point(point: np.ndarray, vertices: np.ndarray):
    """GJK distance iteration from a point to a convex vertex set.

    Returns (closest_point, distance, converged). Only called for points
    outside the hull (inside is resolved by the face-plane test).
    """
    simplex = [vertices[0]]
    closest = vertices[0]
    for _ in range(GJK_MAX_ITERATIONS):
        closest, simplex = _closest_on_simplex(point, simplex)
        diff = point - closest
        dist = math.sqrt(float(diff @ diff))
        if dist < GJK_TOLERANCE:
            return closest, 0.0, True
        direction = diff / dist
        dots = vertices @ direction
        s_idx = int(np.argmax(dots))
        # no vertex improves the support value -> converged
        if dots[s_idx] - float(direction @ closest) <= GJK_TOLERANCE:
            return closest, dist, True
        candidate = vertices[s_idx]
        if any(np.array_equal(candidate, w) for w in simplex):
            return closest, dist, True
        simplex.append(candidate)
    return closest, math.sqrt(float((point - closest) @ (point - closest))), False


def _closest_point_triangles(points: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized closest point on triangles (Ericson's region test).

    points: (P, 1, 3) broadcast against triangles (T, 3) -> result (P, T, 3).
    """
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = np.einsum("...i,...i->...", ap, ab)
    d2 = np.einsum("...i,...i->...", ap, ac)

    bp = points - b
    d3 = np.einsum("...i,...i->...", bp, ab)
    d4 = np.einsum("...i,...i->...", bp, ac)

    cp = points - c
    d5 = np.einsum("...i,...i->...", cp, ab)
    d6 = np.einsum("...i,...i->...", cp, ac)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    denom_ab = d1 - d3
    denom_ac = d2 - d6
    with np.errstate(divide="ignore", invalid="ignore"):
        v_edge_ab = np.where(denom_ab != 0.0, d1 / denom_ab, 0.0)
        w_edge_ac = np.where(denom_ac != 0.0, d2 / denom_ac, 0.0)
        denom_bc = (d4 - d3) + (d5 - d6)
        w_edge_bc = np.where(denom_bc != 0.0, (d4 - d3) / denom_bc, 0.0)
        denom_face = va + vb + vc
        v_face = np.where(denom_face != 0.0, vb / denom_face, 0.0)
        w_face = np.where(denom_face != 0.0, vc / denom_face, 0.0)

    result = a + v_face[..., None] * ab + w_face[..., None] * ac  # interior default

    on_bc = (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0) & (va <= 0.0)
    pt_bc = b + np.clip(w_edge_bc, 0.0, 1.0)[..., None] * (c - b)
    result = np.where(on_bc[..., None], pt_bc, result)

    on_ac = (d2 >= 0.0) & (d6 <= 0.0) & (vb <= 0.0)
    pt_ac = a + np.clip(w_edge_ac, 0.0, 1.0)[..., None] * ac
    result = np.where(on_ac[..., None], pt_ac, result)

    on_ab = (d1 >= 0.0) & (d3 <= 0.0) & (vc <= 0.0)
    pt_ab = a + np.clip(v_edge_ab, 0.0, 1.0)[..., None] * ab
    result = np.where(on_ab[..., None], pt_ab, result)

    vert_c = (d6 >= 0.0) & (d5 <= d6)
    result = np.where(vert_c[..., None], np.broadcast_to(c, result.shape), result)
    vert_b = (d3 >= 0.0) & (d4 <= d3)
    result = np.where(vert_b[..., None], np.broadcast_to(b, result.shape), result)
    vert_a = (d1 <= 0.0) & (d2 <= 0.0)
    result = np.where(vert_a[..., None], np.broadcast_to(a, result.shape), result)
    return result


def _brute_force_closest(point: np.ndarray, poly: ConvexPolyhedron):
    pts = point.reshape(1, 1, 3)
    candidates = _closest_point_triangles(pts, poly.tri_a, poly.tri_b, poly.tri_c)[0]
    d2 = np.einsum("ij,ij->i", candidates - point, candidates - point)
    t_idx = int(np.argmin(d2))
    return candidates[t_idx], math.sqrt(float(d2[t_idx])), int(poly.tri_face[t_idx])


def gjk_distance(query: ContactQuery, poly: ConvexPolyhedron) -> ContactManifold:
    """Sphere-vs-posed-convex-polyhedron manifold.

    Outside centers run GJK on the vertex set; contained centers use the
    nearest-face-plane expansion (exact for convex bodies). The normal points
    from the target surface toward the sphere center side.
    """
    pose = query.pose
    rot = pose.rotation
    center_body = rot.T @ (query.center - pose.position)

    plane_dist = poly.normals @ center_body - poly.offsets
    if plane_dist.max() <= 0.0:  # center inside (or exactly on the surface)
        face = int(np.argmax(plane_dist))  # least-deep plane; ties -> lowest index
        depth_center = -float(plane_dist[face])
        normal_body = poly.normals[face]
        surface_body = center_body + depth_center * normal_body
        return ContactManifold(
            intersecting=True,
            contact_point=rot @ surface_body + pose.position,
            contact_normal=rot @ normal_body,
            face_index=face,
            penetration_depth=depth_center + query.radius,
        )

    closest_body, dist, converged = _gjk_closest_point(center_body, poly.vertices)
    fallback = not converged
    if fallback:
        closest_body, dist, _face = _brute_force_closest(center_body, poly)
    if dist < GJK_TOLERANCE:
        # touching the surface from outside: treat as the inside branch boundary
        face = int(np.argmax(plane_dist))
        normal_body = poly.normals[face]
        dist = 0.0
    else:
        normal_body = (center_body - closest_body) / dist
    # face for reporting: the plane most aligned with the contact normal
    face = int(np.argmax(poly.normals @ normal_body))

    contact_point = rot @ closest_body + pose.position
    contact_normal = rot @ normal_body
    if dist < query.radius:
        return ContactManifold(
            intersecting=True,
            contact_point=contact_point,
            contact_normal=contact_normal,
            face_index=face,
            penetration_depth=query.radius - dist,
            gjk_fallback=fallback,
        )
    return ContactManifold(
        intersecting=False,
        contact_point=contact_point,
        contact_normal=contact_normal,
        face_index=face,
        separation=dist - query.radius,
        gjk_fallback=fallback,
    )


def sphere_batch_query(
    centers: np.ndarray,
    radii: np.ndarray,
    poly: ConvexPolyhedron,
    pose: TargetBodyState,
):
    """Vectorized sphere-vs-convex query for many spheres at once.

    Returns (signed_distance, contact_point, contact_normal, face_index) with
    signed_distance the center-to-surface distance (negative when the center
    is contained); sphere k intersects iff signed_distance[k] < radii[k].
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    rot = pose.rotation
    body = (centers - pose.position) @ rot  # == rot.T @ (c - t) per row

    plane_dist = body @ poly.normals.T - poly.offsets  # (P, F)
    inside = plane_dist.max(axis=1) <= 0.0

    closest = np.empty_like(centers)
    normals = np.empty_like(centers)
    signed = np.empty(len(centers))
    faces = np.empty(len(centers), dtype=int)

    if inside.any():
        sel = np.where(inside)[0]
        f = np.argmax(plane_dist[sel], axis=1)
        depth = -plane_dist[sel, f]
        n = poly.normals[f]
        closest[sel] = body[sel] + depth[:, None] * n
        normals[sel] = n
        signed[sel] = -depth
        faces[sel] = f

    if (~inside).any():
        sel = np.where(~inside)[0]
        pts = body[sel][:, None, :]  # (P, 1, 3)
        cand = _closest_point_triangles(pts, poly.tri_a, poly.tri_b, poly.tri_c)
        diff = pts - cand
        d2 = np.einsum("ptj,ptj->pt", diff, diff)
        t_idx = np.argmin(d2, axis=1)
        rows = np.arange(len(sel))
        cp = cand[rows, t_idx]
        dist = np.sqrt(d2[rows, t_idx])
        # outside-but-on-surface points: push out along that triangle's face normal
        face_idx = poly.tri_face[t_idx]
        n = np.where(
            dist[:, None] > GJK_TOLERANCE,
            (body[sel] - cp) / np.maximum(dist, GJK_TOLERANCE)[:, None],
            poly.normals[face_idx],
        )
        closest[sel] = cp
        normals[sel] = n
        signed[sel] = dist
        faces[sel] = face_idx

    world_closest = closest @ rot.T + pose.position
    world_normals = normals @ rot.T
    return signed, world_closest, world_normals, faces


def broad_phase(
    positions: np.ndarray,
    radii: np.ndarray,
    poly: ConvexPolyhedron,
    pose: TargetBodyState,
    margin: float = 0.0,
) -> np.ndarray:
    """Indices of spheres whose bounding test against the target's bounding
    sphere passes; a superset of the truly colliding set."""
    world_center = pose.rotation @ poly.centroid + pose.position
    d = np.linalg.norm(positions - world_center, axis=1)
    return np.where(d <= poly.bounding_radius + radii + margin)[0]
