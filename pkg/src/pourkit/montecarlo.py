"""Monte Carlo volume estimates by point sampling and ray parity.

Independent of the clipping code: it never builds clipped polygons, it only
counts random points that fall inside the solid and below a plane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Plane, TriangleMesh


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int

    def agrees(self, exact: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - exact) <= sigmas * self.stderr


def inside(mesh: TriangleMesh, points) -> np.ndarray:
    """Boolean mask of points strictly inside the closed mesh."""
    return kernels.points_inside(points, np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.faces))


def volume_below(mesh: TriangleMesh, plane: Plane | None = None, samples: int = 1_000_000,
                 seed=0, batch: int = 250_000) -> Estimate:
    """Estimate the volume of the solid below ``plane`` (all of it when ``None``)."""
    rng = np.random.default_rng(seed)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    box = float(np.prod(hi - lo))
    hits = 0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        pts = lo + rng.random((n, 3)) * (hi - lo)
        mask = inside(mesh, pts)
        if plane is not None:
            mask &= plane.signed_distance(pts) <= 0.0
        hits += int(mask.sum())
        done += n
    p = hits / samples
    return Estimate(box * p, box * np.sqrt(p * (1.0 - p) / samples), samples)
