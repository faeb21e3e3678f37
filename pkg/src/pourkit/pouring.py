"""Quasi-static pouring: lip plane, stable volume and discretised pour sequences.

A container is tilted about a horizontal axis. At every pose the liquid that
can stay inside is the cavity volume below the horizontal plane through the
lowest rim point; whatever exceeds that spills and never comes back.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import (
    GeometryError,
    InvertedOrientation,
    NonWatertight,
    Plane,
    Rotation,
    TriangleMesh,
    clip_volume_below_unchecked,
    validate_mesh,
)
from .labels import MAX_SEQUENCE_LENGTH, ContentClass, FractionClass

DEFAULT_TIMESTEPS = 5
BISECTION_MAX_ITER = 200


class ContainerError(ValueError):
    pass


class MissingCap(ContainerError):
    pass


class EmptyRim(ContainerError):
    pass


class VolumeOutOfRange(ContainerError):
    pass


class NonPositiveTarget(ContainerError):
    pass


class NoConvergence(ContainerError):
    pass


class SequenceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# container model
# ---------------------------------------------------------------------------


def _rim_loop(faces: np.ndarray, cap_faces) -> list[int]:
    """Boundary of the cap patch as an ordered vertex loop."""
    edges = Counter()
    directed = []
    for fi in cap_faces:
        a, b, c = (int(x) for x in faces[fi])
        for p, q in ((a, b), (b, c), (c, a)):
            edges[(min(p, q), max(p, q))] += 1
            directed.append((p, q))
    nxt = defaultdict(list)
    for p, q in directed:
        if edges[(min(p, q), max(p, q))] == 1:
            nxt[p].append(q)
    if not nxt:
        raise EmptyRim("cap faces have no boundary")
    if any(len(v) != 1 for v in nxt.values()):
        raise ContainerError("cap boundary is not a simple loop")
    start = min(nxt)
    loop = [start]
    cur = nxt[start][0]
    while cur != start:
        loop.append(cur)
        if len(loop) > len(nxt):
            raise ContainerError("cap boundary is not a simple loop")
        cur = nxt[cur][0]
    if len(loop) != len(nxt):
        raise ContainerError("cap boundary has more than one loop")
    return loop


def _default_tilt_axis(rim_xy: np.ndarray) -> tuple:
    """Horizontal axis perpendicular to the rim's longest horizontal extent.

    Isotropic rims (any symmetric cup) fall back to the x axis.
    """
    centered = rim_xy - rim_xy.mean(axis=0)
    cov = centered.T @ centered / max(len(rim_xy), 1)
    w, vecs = np.linalg.eigh(cov)
    if w[1] - w[0] <= 1e-6 * max(w[1], 1e-300):
        return (1.0, 0.0, 0.0)
    major = vecs[:, 1]
    axis = np.array([-major[1], major[0]])
    # fixed sign so the choice is reproducible
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return (float(axis[0]), float(axis[1]), 0.0)


@dataclass(frozen=True, eq=False)
class ContainerModel:
    """Closed cavity mesh with a tagged opening.

    Build with :meth:`from_mesh`, which validates the mesh and derives the
    rim, nominal volume and default tilt axis.
    """

    interior: TriangleMesh
    cap_faces: tuple
    rim: tuple
    nominal_volume: float
    tilt_axis: tuple = (1.0, 0.0, 0.0)

    @classmethod
    def from_mesh(cls, mesh: TriangleMesh, cap_faces, tilt_axis=None) -> "ContainerModel":
        report = validate_mesh(mesh)
        if report.out_of_range_faces or report.repeated_vertex_faces:
            raise GeometryError("; ".join(report.violations))
        if report.non_manifold_edges or report.inconsistent_edges:
            raise NonWatertight("; ".join(report.violations))
        if report.non_positive_volume:
            raise InvertedOrientation("; ".join(report.violations))
        cap = tuple(sorted(int(i) for i in cap_faces))
        if not cap:
            raise MissingCap("no cap faces declared")
        if cap[0] < 0 or cap[-1] >= len(mesh.faces):
            raise MissingCap("cap face index out of range")
        rim = tuple(_rim_loop(mesh.faces, cap))
        rim_pts = mesh.vertices[list(rim)]
        tilt = _default_tilt_axis(rim_pts[:, :2]) if tilt_axis is None else tilt_axis
        Rotation(tilt, 0.0)  # validates the axis
        tilt = tuple(float(x) for x in tilt)
        _warn_if_rim_tilted(rim_pts)
        return cls(mesh, cap, rim, float(report.signed_volume), tilt)

    @cached_property
    def rim_points(self) -> np.ndarray:
        return self.interior.vertices[list(self.rim)]

    def rotation(self, angle: float, axis=None) -> Rotation:
        return Rotation(self.tilt_axis if axis is None else axis, angle)

    def posed_vertices(self, rotation: Rotation) -> np.ndarray:
        """Interior vertices after tilting about the vertex centroid."""
        c = self.interior.centroid
        return (self.interior.vertices - c) @ rotation.matrix().T + c


def _warn_if_rim_tilted(rim_pts: np.ndarray, limit_deg: float = 1.0):
    if len(rim_pts) < 3:
        return
    centered = rim_pts - rim_pts.mean(axis=0)
    normal = np.linalg.svd(centered)[2][-1]
    tilt = math.degrees(math.acos(min(1.0, abs(normal[2]))))
    if tilt > limit_deg:
        warnings.warn(f"rim mean plane is {tilt:.2f} deg off horizontal in the upright pose", stacklevel=3)


def rescale_factor(container: ContainerModel, target_volume: float) -> float:
    if not target_volume > 0:
        raise NonPositiveTarget(f"target volume must be positive, got {target_volume!r}")
    return (target_volume / container.nominal_volume) ** (1.0 / 3.0)


def rescale_to_volume(container: ContainerModel, target_volume: float) -> ContainerModel:
    """Uniformly scale the cavity about its vertex centroid to hold ``target_volume``.

    Mesh units are taken as cm, so a volume in mL maps one to one.
    """
    s = rescale_factor(container, target_volume)
    mesh = container.interior.scaled(s)
    return ContainerModel.from_mesh(mesh, container.cap_faces, container.tilt_axis)


# ---------------------------------------------------------------------------
# stable volume at a pose
# ---------------------------------------------------------------------------


def lip_height(container: ContainerModel, rotation: Rotation) -> float:
    """Lowest rim point after tilting, in the posed frame."""
    if not container.rim:
        raise EmptyRim("container has no rim")
    c = container.interior.centroid
    z = (container.rim_points - c) @ rotation.matrix()[2] + c[2]
    return float(z.min())


def max_stable_volume(container: ContainerModel, rotation: Rotation) -> float:
    """Cavity volume below the horizontal plane through the lip."""
    verts = container.posed_vertices(rotation)
    c = container.interior.centroid
    lip = float(((verts[list(container.rim)] - c)[:, 2]).min() + c[2])
    vol = clip_volume_below_unchecked(verts, container.interior.faces, Plane.horizontal(lip),
                                      container.interior.bbox_diagonal)
    return min(max(vol, 0.0), container.nominal_volume)


def _check_volume(container: ContainerModel, volume: float):
    slack = 1e-9 * container.nominal_volume
    if not -slack <= volume <= container.nominal_volume + slack:
        raise VolumeOutOfRange(f"volume {volume!r} outside [0, {container.nominal_volume}]")


def remaining_volume(container: ContainerModel, rotation: Rotation, current_volume: float) -> float:
    """Liquid left after moving to ``rotation``; spilled liquid never returns."""
    _check_volume(container, current_volume)
    return min(current_volume, max_stable_volume(container, rotation))


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PourSequence:
    """Up to five fraction classes describing the liquid left after each step."""

    elements: tuple

    def __post_init__(self):
        els = tuple(FractionClass.from_label(e) for e in self.elements)
        object.__setattr__(self, "elements", els)
        problems = sequence_problems(els)
        if problems:
            raise SequenceError("; ".join(problems))

    @classmethod
    def from_labels(cls, labels) -> "PourSequence":
        return cls(tuple(labels))

    def labels(self) -> list[str]:
        return [e.label for e in self.elements]

    def padded(self, length: int = MAX_SEQUENCE_LENGTH) -> tuple:
        return pad_sequence(self.elements, length)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __str__(self):
        return "[" + ", ".join(self.labels()) + "]"


def sequence_problems(elements) -> list[str]:
    """Every broken sequence invariant, as readable strings."""
    out = []
    els = [FractionClass.from_label(e) for e in elements]
    if not 1 <= len(els) <= MAX_SEQUENCE_LENGTH:
        out.append(f"length {len(els)} outside 1..{MAX_SEQUENCE_LENGTH}")
    if FractionClass.OPAQUE in els and len(els) != 1:
        out.append("opaque only allowed as a length-1 sequence")
    fr = [e.value for e in els if e is not FractionClass.OPAQUE]
    if any(b > a for a, b in zip(fr, fr[1:])):
        out.append("fractions increase")
    if FractionClass.R0 in els[:-1]:
        out.append("empty state before the final element")
    return out


def pad_sequence(elements, length: int = MAX_SEQUENCE_LENGTH) -> tuple:
    """Repeat the last element up to ``length``; longer inputs are left as is."""
    els = tuple(elements)
    if not els:
        raise SequenceError("cannot pad an empty sequence")
    return els + (els[-1],) * max(0, length - len(els))


@dataclass(frozen=True)
class TiltQuery:
    target_angle: float
    timesteps: int = DEFAULT_TIMESTEPS
    axis: tuple | None = None

    def __post_init__(self):
        if not 0.0 < self.target_angle <= 180.0:
            raise ValueError(f"target angle {self.target_angle} outside (0, 180]")
        if not 1 <= self.timesteps <= MAX_SEQUENCE_LENGTH:
            raise ValueError(f"timesteps must be in 1..{MAX_SEQUENCE_LENGTH}, got {self.timesteps}")

    def angles(self) -> list[float]:
        """Post-tilt angles ``t * x / T`` for ``t = 1..T``; upright is not a step."""
        return [self.target_angle * t / self.timesteps for t in range(1, self.timesteps + 1)]


@dataclass
class PourTrace:
    angles: list = field(default_factory=list)
    volumes: list = field(default_factory=list)
    fractions: list = field(default_factory=list)
    sequence: PourSequence | None = None


def initial_fraction(initial) -> float | None:
    """Map a content class, fraction class or plain number to a fill fraction.

    Returns ``None`` for opaque.
    """
    if isinstance(initial, ContentClass):
        return initial.fraction
    if isinstance(initial, FractionClass):
        return initial.fraction
    if isinstance(initial, str):
        s = initial.strip().lower().rstrip("%")
        if s in ("opaque", "p"):
            return None
        return ContentClass(s).fraction
    x = float(initial)
    if not 0.0 <= x <= 1.0:
        raise VolumeOutOfRange(f"initial fraction {x} outside [0, 1]")
    return x


def pour_trace(container: ContainerModel, initial, query: TiltQuery) -> PourTrace:
    """Run the tilt schedule and keep the exact per-step volumes."""
    frac = initial_fraction(initial)
    trace = PourTrace(angles=query.angles())
    if frac is None:
        trace.sequence = PourSequence((FractionClass.OPAQUE,))
        return trace
    if frac == 0.0:
        trace.sequence = PourSequence((FractionClass.R0,))
        return trace
    V = container.nominal_volume
    current = frac * V
    elements = []
    for angle in trace.angles:
        current = remaining_volume(container, container.rotation(angle, query.axis), current)
        trace.volumes.append(current)
        trace.fractions.append(current / V)
        if len(elements) == 0 or elements[-1] is not FractionClass.R0:
            elements.append(FractionClass.snap(current / V))
    trace.sequence = PourSequence(tuple(elements))
    return trace


def simulate_pour(container: ContainerModel, initial, query: TiltQuery) -> PourSequence:
    return pour_trace(container, initial, query).sequence


# ---------------------------------------------------------------------------
# fill level
# ---------------------------------------------------------------------------


def fill_surface_height(container: ContainerModel, fraction: float, tol: float = 1e-6) -> float:
    """Height of the liquid surface holding ``fraction`` of the upright cavity.

    Bisection on the monotone map height -> volume below; accurate to
    ``tol * nominal_volume`` in volume.
    """
    if not 0.0 <= fraction <= 1.0:
        raise VolumeOutOfRange(f"fraction {fraction} outside [0, 1]")
    mesh = container.interior
    V = container.nominal_volume
    target = fraction * V
    lo = float(mesh.vertices[:, 2].min())
    hi = float(mesh.vertices[:, 2].max())
    if fraction == 0.0:
        return lo
    if fraction == 1.0:
        return hi

    def volume_at(h):
        return clip_volume_below_unchecked(mesh.vertices, mesh.faces, Plane.horizontal(h), mesh.bbox_diagonal)

    span = hi - lo
    mid = 0.5 * (lo + hi)
    err = math.inf
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        err = volume_at(mid) - target
        if abs(err) <= 1e-13 * V or hi - lo <= 1e-14 * span:
            break
        if err < 0:
            lo = mid
        else:
            hi = mid
    if abs(err) > tol * V:
        raise NoConvergence(f"volume error {abs(err):.3g} after bisection exceeds {tol * V:.3g}")
    return mid
