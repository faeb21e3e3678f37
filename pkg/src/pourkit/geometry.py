"""Exact volume and half-space clipping on closed triangle meshes."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels

#: a vertex closer than this fraction of the bbox diagonal is on the plane
PLANE_EPS = 1e-9
#: faces with area below this fraction of the squared bbox diagonal are degenerate
AREA_EPS = 1e-12

UP = np.array([0.0, 0.0, 1.0])


class GeometryError(ValueError):
    pass


class NonWatertight(GeometryError):
    pass


class InvertedOrientation(GeometryError):
    pass


class DegenerateCap(GeometryError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh with outward winding.

    Only array shapes and index ranges are checked on construction; use
    :func:`validate_mesh` for the topological invariants.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertices, np.float64).reshape(-1, 3)
        f = _frozen(self.faces, np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise GeometryError("face index out of range")

    @cached_property
    def bbox_diagonal(self) -> float:
        if len(self.vertices) == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    @cached_property
    def centroid(self) -> np.ndarray:
        """Mean of the vertices (not the volume centroid)."""
        return self.vertices.mean(axis=0)

    @cached_property
    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    @cached_property
    def _edge_stats(self):
        return _edge_stats(self.faces)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=float), self.faces)

    def transformed(self, matrix, center=None) -> "TriangleMesh":
        """Apply a linear map about ``center`` (default: the vertex centroid)."""
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        return TriangleMesh((self.vertices - c) @ np.asarray(matrix, dtype=float).T + c, self.faces)

    def scaled(self, factor: float, center=None) -> "TriangleMesh":
        return self.transformed(np.eye(3) * factor, center)

    def drop_faces(self, mask) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.faces[~np.asarray(mask, dtype=bool)])


@dataclass(frozen=True)
class Plane:
    """The set ``{p : normal . p = offset}``; *below* means ``normal . p <= offset``."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = tuple(float(x) for x in self.normal)
        if len(n) != 3 or abs(math.sqrt(sum(x * x for x in n)) - 1.0) > 1e-9:
            raise GeometryError(f"plane normal must be a unit 3-vector, got {self.normal!r}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal(cls, normal, offset: float) -> "Plane":
        """Normalise ``normal``, scaling ``offset`` so the plane is unchanged."""
        n = np.asarray(normal, dtype=float)
        length = np.linalg.norm(n)
        if length == 0:
            raise GeometryError("zero plane normal")
        return cls(tuple(n / length), offset / length)

    @classmethod
    def horizontal(cls, height: float) -> "Plane":
        return cls((0.0, 0.0, 1.0), height)

    @classmethod
    def through(cls, point, normal) -> "Plane":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(tuple(n), float(n @ np.asarray(point, dtype=float)))

    def flipped(self) -> "Plane":
        return Plane(tuple(-x for x in self.normal), -self.offset)

    def translated(self, offset) -> "Plane":
        return Plane(self.normal, self.offset + float(np.dot(self.normal, offset)))

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class Rotation:
    """Tilt about a horizontal axis by ``angle`` degrees in [0, 180]."""

    axis: tuple = (1.0, 0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        a = tuple(float(x) for x in self.axis)
        if len(a) != 3 or abs(math.sqrt(sum(x * x for x in a)) - 1.0) > 1e-9:
            raise GeometryError(f"rotation axis must be a unit 3-vector, got {self.axis!r}")
        if abs(a[2]) > 1e-9:
            raise GeometryError("rotation axis must be horizontal")
        if not 0.0 <= self.angle <= 180.0:
            raise GeometryError(f"rotation angle {self.angle} outside [0, 180]")
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "angle", float(self.angle))

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.axis, self.angle)


def rotation_matrix(axis, angle_deg: float) -> np.ndarray:
    """Right-handed rotation matrix (Rodrigues) about a unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    theta = math.radians(angle_deg)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _edge_stats(faces):
    """Return (non_manifold_edges, inconsistent_edges) as lists of (a, b)."""
    if len(faces) == 0:
        return [], []
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    undirected = np.sort(directed, axis=1)
    keys, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    non_manifold = [tuple(map(int, k)) for k in keys[counts != 2]]
    # a consistently wound shared edge is traversed once as (lo, hi), once as (hi, lo)
    forward = (directed[:, 0] < directed[:, 1]).astype(np.int64)
    n_forward = np.bincount(inverse, weights=forward, minlength=len(keys))
    bad = (counts == 2) & (n_forward != 1)
    inconsistent = [tuple(map(int, k)) for k in keys[bad]]
    return non_manifold, inconsistent


@dataclass
class ValidationReport:
    out_of_range_faces: list = field(default_factory=list)
    repeated_vertex_faces: list = field(default_factory=list)
    degenerate_faces: list = field(default_factory=list)
    non_manifold_edges: list = field(default_factory=list)
    inconsistent_edges: list = field(default_factory=list)
    signed_volume: float | None = None

    @property
    def non_positive_volume(self) -> bool:
        return self.signed_volume is not None and self.signed_volume <= 0.0

    @property
    def violations(self) -> list[str]:
        out = []
        if self.out_of_range_faces:
            out.append(f"{len(self.out_of_range_faces)} face(s) with out-of-range vertex index")
        if self.repeated_vertex_faces:
            out.append(f"{len(self.repeated_vertex_faces)} face(s) repeat a vertex")
        if self.degenerate_faces:
            out.append(f"{len(self.degenerate_faces)} zero-area face(s)")
        if self.non_manifold_edges:
            out.append(f"{len(self.non_manifold_edges)} non-manifold edge(s)")
        if self.inconsistent_edges:
            out.append(f"{len(self.inconsistent_edges)} edge(s) with inconsistent winding")
        if self.non_positive_volume:
            out.append(f"non-positive signed volume {self.signed_volume:.6g}")
        return out

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "out_of_range_faces": list(self.out_of_range_faces),
            "repeated_vertex_faces": list(self.repeated_vertex_faces),
            "degenerate_faces": list(self.degenerate_faces),
            "non_manifold_edges": [list(e) for e in self.non_manifold_edges],
            "inconsistent_edges": [list(e) for e in self.inconsistent_edges],
            "signed_volume": self.signed_volume,
            "violations": self.violations,
        }


def validate_mesh(vertices, faces=None) -> ValidationReport:
    """Check a mesh against the closed, oriented, positive-volume invariants.

    Accepts a :class:`TriangleMesh` or raw ``(vertices, faces)`` arrays, so
    meshes with out-of-range indices can still be reported on.
    """
    if isinstance(vertices, TriangleMesh):
        vertices, faces = vertices.vertices, vertices.faces
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    report = ValidationReport()
    oob = (f < 0).any(axis=1) | (f >= len(v)).any(axis=1)
    report.out_of_range_faces = np.flatnonzero(oob).tolist()
    if oob.any():
        return report
    rep = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    report.repeated_vertex_faces = np.flatnonzero(rep).tolist()
    mesh = TriangleMesh(v, f)
    tol = AREA_EPS * mesh.bbox_diagonal**2
    report.degenerate_faces = np.flatnonzero(~rep & (mesh.face_areas < tol)).tolist()
    report.non_manifold_edges, report.inconsistent_edges = mesh._edge_stats
    if len(f):
        report.signed_volume = kernels.signed_volume(mesh.vertices, mesh.faces, mesh.centroid)
    return report


def _require_closed(mesh: TriangleMesh):
    non_manifold, inconsistent = mesh._edge_stats
    if non_manifold:
        raise NonWatertight(f"{len(non_manifold)} edge(s) not shared by exactly two faces")
    if inconsistent:
        raise NonWatertight(f"{len(inconsistent)} shared edge(s) with inconsistent winding")


# ---------------------------------------------------------------------------
# volumes
# ---------------------------------------------------------------------------


def mesh_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume by the divergence theorem (signed tetrahedra)."""
    _require_closed(mesh)
    vol = kernels.signed_volume(mesh.vertices, mesh.faces, mesh.centroid)
    if vol <= 0.0:
        raise InvertedOrientation(f"signed volume {vol:.6g} is not positive")
    return vol


def _plane_distances(vertices, plane: Plane, diag: float) -> np.ndarray:
    d = vertices @ np.asarray(plane.normal) - plane.offset
    d[np.abs(d) <= PLANE_EPS * diag] = 0.0
    return d


def _apex_on(plane: Plane, vertices) -> np.ndarray:
    n = np.asarray(plane.normal)
    c = vertices.mean(axis=0)
    return c - (n @ c - plane.offset) * n


def clip_volume_below_unchecked(vertices, faces, plane: Plane, diag: float | None = None) -> float:
    """:func:`clip_volume_below` on raw arrays, skipping topology checks."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    if diag is None:
        diag = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))
    d = _plane_distances(vertices, plane, diag)
    if (d <= 0.0).all():
        return kernels.signed_volume(vertices, faces, vertices.mean(axis=0))
    if (d >= 0.0).all():
        return 0.0
    return kernels.clipped_volume(vertices, faces, d, _apex_on(plane, vertices))


def clip_volume_below(mesh: TriangleMesh, plane: Plane) -> float:
    """Volume of the enclosed solid on the ``normal . p <= offset`` side.

    The result is clamped into ``[0, mesh_volume]`` to absorb round-off.
    """
    total = mesh_volume(mesh)
    vol = clip_volume_below_unchecked(mesh.vertices, mesh.faces, plane, mesh.bbox_diagonal)
    return min(max(vol, 0.0), total)


def clip_mesh_below(mesh: TriangleMesh, plane: Plane) -> TriangleMesh:
    """Clip a closed mesh to the half-space below ``plane`` and close the cut.

    Cut segments are stitched into loops and each loop is fanned from its
    centroid. Raises :class:`DegenerateCap` when the segments do not form
    closed loops.
    """
    _require_closed(mesh)
    verts = mesh.vertices
    d = _plane_distances(verts.copy(), plane, mesh.bbox_diagonal)
    new_points: list[np.ndarray] = []
    edge_ids: dict = {}
    on_plane = set(np.flatnonzero(d == 0.0).tolist())
    nv = len(verts)

    def edge_point(a, b):
        key = (a, b) if a < b else (b, a)
        idx = edge_ids.get(key)
        if idx is None:
            i, j = key
            t = d[i] / (d[i] - d[j])
            new_points.append(verts[i] + t * (verts[j] - verts[i]))
            idx = nv + len(new_points) - 1
            edge_ids[key] = idx
            on_plane.add(idx)
        return idx

    out_faces = []
    cut_edges: dict = defaultdict(int)
    for face in mesh.faces.tolist():
        poly = []
        for e in range(3):
            a, b = face[e], face[(e + 1) % 3]
            if d[a] <= 0.0:
                poly.append(a)
            if d[a] * d[b] < 0.0:
                poly.append(edge_point(a, b))
        if len(poly) < 3:
            continue
        for k in range(1, len(poly) - 1):
            out_faces.append((poly[0], poly[k], poly[k + 1]))
        for k in range(len(poly)):
            p, q = poly[k], poly[(k + 1) % len(poly)]
            if p in on_plane and q in on_plane:
                if cut_edges[(q, p)] > 0:
                    cut_edges[(q, p)] -= 1
                else:
                    cut_edges[(p, q)] += 1

    all_points = np.vstack([verts] + new_points) if new_points else verts.copy()
    boundary = [e for e, n in cut_edges.items() for _ in range(n)]
    centers: list[np.ndarray] = []
    out_faces.extend(_cap_faces(boundary, all_points, centers))
    if centers:
        all_points = np.vstack([all_points] + centers)

    faces = np.asarray(out_faces, dtype=np.int64).reshape(-1, 3)
    used = np.unique(faces)
    remap = np.full(len(all_points), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh(all_points[used], remap[faces])


def _cap_faces(boundary, points, extra):
    """Fan-triangulate cap loops from reversed boundary edges."""
    nxt = defaultdict(list)
    indeg = defaultdict(int)
    for p, q in boundary:
        nxt[q].append(p)
        indeg[p] += 1
    for v, outs in nxt.items():
        if len(outs) != indeg[v]:
            raise DegenerateCap(f"cut segments do not close at vertex {v}")
    if any(indeg[v] and v not in nxt for v in indeg):
        raise DegenerateCap("open cut loop")
    base = len(points)
    faces = []
    for start in sorted(nxt):
        while nxt[start]:
            loop = [start]
            cur = nxt[start].pop()
            while cur != start:
                loop.append(cur)
                if not nxt[cur]:
                    raise DegenerateCap("open cut loop")
                cur = nxt[cur].pop()
            if len(loop) < 3:
                raise DegenerateCap(f"cut loop with {len(loop)} vertices")
            extra.append(points[loop].mean(axis=0))
            c = base + len(extra) - 1
            for k in range(len(loop)):
                faces.append((c, loop[k], loop[(k + 1) % len(loop)]))
    return faces
