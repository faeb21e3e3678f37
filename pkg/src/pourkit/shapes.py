"""Synthetic container cavities for tests, examples and benchmarks.

Every builder returns ``(mesh, cap_faces)`` where ``cap_faces`` are the
indices of the faces closing the opening.
"""
from __future__ import annotations

import numpy as np

from .geometry import TriangleMesh


def box(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box; the two top triangles form the cap."""
    sx, sy, sz = size
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=float,
    ) * [sx, sy, sz] + origin
    f = [
        [0, 2, 1], [0, 3, 2],  # bottom
        [0, 1, 5], [0, 5, 4],  # y = 0
        [1, 2, 6], [1, 6, 5],  # x = 1
        [2, 3, 7], [2, 7, 6],  # y = 1
        [3, 0, 4], [3, 4, 7],  # x = 0
        [4, 5, 6], [4, 6, 7],  # top
    ]
    return TriangleMesh(v, f), (10, 11)


def unit_cube():
    return box()[0]


def revolved(profile, segments=64):
    """Surface of revolution about +z from a bottom-to-top ``(radius, z)`` profile.

    A zero first radius gives a pointed bottom; otherwise the bottom is a
    disk. The top ring is closed by a fan of cap faces.
    """
    profile = [(float(r), float(z)) for r, z in profile]
    if len(profile) < 2 or profile[-1][0] <= 0:
        raise ValueError("profile needs at least two rings and an open top")
    phi = 2.0 * np.pi * np.arange(segments) / segments
    ring_dir = np.stack([np.cos(phi), np.sin(phi), np.zeros(segments)], axis=1)

    verts = []
    rings = []
    for r, z in profile:
        if r == 0.0:
            rings.append(None)
            verts.append(np.array([[0.0, 0.0, z]]))
            continue
        rings.append(sum(len(b) for b in verts))
        verts.append(ring_dir * r + [0.0, 0.0, z])

    faces = []
    n_used = sum(len(b) for b in verts)
    r0, z0 = profile[0]
    if r0 == 0.0:
        apex = 0
        base = rings[1]
        for j in range(segments):
            faces.append((apex, base + (j + 1) % segments, base + j))
        start = 1
    else:
        center = n_used
        verts.append(np.array([[0.0, 0.0, z0]]))
        n_used += 1
        base = rings[0]
        for j in range(segments):
            faces.append((center, base + (j + 1) % segments, base + j))
        start = 0

    for k in range(start, len(profile) - 1):
        lo, up = rings[k], rings[k + 1]
        if lo is None or up is None:
            raise ValueError("only the first profile point may have zero radius")
        for j in range(segments):
            jn = (j + 1) % segments
            faces.append((lo + j, lo + jn, up + jn))
            faces.append((lo + j, up + jn, up + j))

    top = rings[-1]
    center = n_used
    verts.append(np.array([[0.0, 0.0, profile[-1][1]]]))
    cap_start = len(faces)
    for j in range(segments):
        faces.append((center, top + j, top + (j + 1) % segments))
    cap = tuple(range(cap_start, len(faces)))
    return TriangleMesh(np.vstack(verts), faces), cap


def cylinder_cup(radius=1.0, height=1.0, segments=64):
    return revolved([(radius, 0.0), (radius, height)], segments)


def cone_cup(radius=1.0, height=1.0, segments=64):
    """Apex-down cone opening upward."""
    return revolved([(0.0, 0.0), (radius, height)], segments)


def bottle(segments=48):
    """Wide body with a shoulder and a narrow neck."""
    profile = [(3.0, 0.0), (3.0, 8.0), (2.0, 9.5), (1.0, 10.5), (1.0, 12.0)]
    return revolved(profile, segments)


def bowl(segments=48):
    profile = [(1.5, 0.0), (2.4, 0.6), (3.0, 1.5), (3.2, 2.5)]
    return revolved(profile, segments)


def polygon_cylinder_volume(radius, height, segments):
    """Exact volume of the regular ``segments``-gon prism built by :func:`cylinder_cup`."""
    return 0.5 * segments * radius**2 * np.sin(2.0 * np.pi / segments) * height
