"""OBJ meshes and their JSON sidecars."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .geometry import AREA_EPS, TriangleMesh

log = logging.getLogger(__name__)


class MeshFormatError(ValueError):
    pass


class SidecarError(ValueError):
    pass


def parse_obj(text: str, source: str = "<obj>"):
    """Parse ``v`` and ``f`` statements of a triangle-only OBJ.

    Face tokens may carry ``/vt/vn`` suffixes and negative indices. Other
    statements are ignored.
    """
    verts = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise MeshFormatError(f"{source}:{lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(x) for x in rest[:3]])
            except ValueError as exc:
                raise MeshFormatError(f"{source}:{lineno}: {exc}") from None
        elif tag == "f":
            if len(rest) != 3:
                raise MeshFormatError(f"{source}:{lineno}: only triangles are supported, got {len(rest)} vertices")
            idx = []
            for tok in rest:
                try:
                    i = int(tok.split("/")[0])
                except ValueError:
                    raise MeshFormatError(f"{source}:{lineno}: bad face index {tok!r}") from None
                if i == 0:
                    raise MeshFormatError(f"{source}:{lineno}: OBJ indices start at 1")
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(idx)
    v = np.asarray(verts, dtype=float).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise MeshFormatError(f"{source}: face index out of range")
    return v, f


def load_obj(path, drop_degenerate: bool = True) -> tuple[TriangleMesh, np.ndarray]:
    """Load an OBJ mesh.

    Returns the mesh and the original indices of the faces that were kept.
    Zero-area faces are dropped with a warning when ``drop_degenerate``.
    """
    path = Path(path)
    v, f = parse_obj(path.read_text(encoding="utf-8"), str(path))
    mesh = TriangleMesh(v, f)
    kept = np.arange(len(f))
    if drop_degenerate and len(f):
        bad = mesh.face_areas < AREA_EPS * mesh.bbox_diagonal**2
        if bad.any():
            log.warning("%s: dropping %d zero-area face(s): %s", path, int(bad.sum()),
                        np.flatnonzero(bad).tolist())
            mesh = mesh.drop_faces(bad)
            kept = kept[~bad]
    return mesh, kept


def format_obj(mesh: TriangleMesh) -> str:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def save_obj(mesh: TriangleMesh, path):
    Path(path).write_text(format_obj(mesh), encoding="utf-8")


def load_sidecar(path) -> dict:
    """Read ``{"cap_faces": [int], "tilt_axis": [x, y, z]}`` (axis optional)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SidecarError(f"{path}: {exc}") from None
    if not isinstance(data, dict) or "cap_faces" not in data:
        raise SidecarError(f"{path}: missing 'cap_faces'")
    extra = set(data) - {"cap_faces", "tilt_axis"}
    if extra:
        raise SidecarError(f"{path}: unknown keys {sorted(extra)}")
    cap = data["cap_faces"]
    if not isinstance(cap, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in cap):
        raise SidecarError(f"{path}: 'cap_faces' must be a list of integers")
    axis = data.get("tilt_axis")
    if axis is not None:
        if not (isinstance(axis, list) and len(axis) == 3 and all(isinstance(x, (int, float)) for x in axis)):
            raise SidecarError(f"{path}: 'tilt_axis' must be three numbers")
        axis = tuple(float(x) for x in axis)
    return {"cap_faces": cap, "tilt_axis": axis}


def save_sidecar(path, cap_faces, tilt_axis=None):
    data = {"cap_faces": [int(i) for i in cap_faces]}
    if tilt_axis is not None:
        data["tilt_axis"] = [float(x) for x in tilt_axis]
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")
