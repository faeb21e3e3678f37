"""Hot numeric kernels.

Each kernel has a numba implementation (``*_nb``) and a vectorised numpy
implementation (``*_np``). The public names dispatch on
:data:`pourkit._accel.USE_NUMBA`; both variants stay importable so tests and
the benchmark can compare them directly.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# signed volume
# ---------------------------------------------------------------------------


@njit
def signed_volume_nb(vertices, faces, ref):
    total = 0.0
    for i in range(faces.shape[0]):
        a = vertices[faces[i, 0]] - ref
        b = vertices[faces[i, 1]] - ref
        c = vertices[faces[i, 2]] - ref
        total += (
            a[0] * (b[1] * c[2] - b[2] * c[1])
            + a[1] * (b[2] * c[0] - b[0] * c[2])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
        )
    return total / 6.0


def signed_volume_np(vertices, faces, ref):
    tri = vertices[faces] - ref
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


# ---------------------------------------------------------------------------
# volume of the solid clipped to a half-space
# ---------------------------------------------------------------------------
#
# Every triangle is clipped to {d <= 0} and the clipped polygon is fanned
# into tetrahedra whose apex lies on the cutting plane. Cap polygons are
# coplanar with that apex, so their contribution is identically zero and the
# caps never need to be materialised for the volume.


@njit
def _edge_point_nb(va, vb, da, db, ia, ib, out):
    # canonical direction so both faces sharing the edge get identical bits
    if ia > ib:
        va, vb = vb, va
        da, db = db, da
    t = da / (da - db)
    for k in range(3):
        out[k] = va[k] + t * (vb[k] - va[k])


@njit
def clipped_volume_nb(vertices, faces, dist, apex):
    poly = np.empty((4, 3))
    tmp = np.empty(3)
    total = 0.0
    for i in range(faces.shape[0]):
        n = 0
        for e in range(3):
            ia = faces[i, e]
            ib = faces[i, (e + 1) % 3]
            da = dist[ia]
            db = dist[ib]
            if da <= 0.0:
                for k in range(3):
                    poly[n, k] = vertices[ia, k] - apex[k]
                n += 1
            if (da < 0.0 and db > 0.0) or (da > 0.0 and db < 0.0):
                _edge_point_nb(vertices[ia], vertices[ib], da, db, ia, ib, tmp)
                for k in range(3):
                    poly[n, k] = tmp[k] - apex[k]
                n += 1
        for j in range(1, n - 1):
            a = poly[0]
            b = poly[j]
            c = poly[j + 1]
            total += (
                a[0] * (b[1] * c[2] - b[2] * c[1])
                + a[1] * (b[2] * c[0] - b[0] * c[2])
                + a[2] * (b[0] * c[1] - b[1] * c[0])
            )
    return total / 6.0


def _edge_points_np(vertices, ia, ib, da, db):
    swap = ia > ib
    va = np.where(swap[:, None], vertices[ib], vertices[ia])
    vb = np.where(swap[:, None], vertices[ia], vertices[ib])
    d0 = np.where(swap, db, da)
    d1 = np.where(swap, da, db)
    denom = d0 - d1
    safe = np.where(denom == 0.0, 1.0, denom)
    t = d0 / safe
    return va + t[:, None] * (vb - va)


def clipped_volume_np(vertices, faces, dist, apex):
    if len(faces) == 0:
        return 0.0
    d = dist[faces]
    cand = []
    keep = []
    for e in range(3):
        ia, ib = faces[:, e], faces[:, (e + 1) % 3]
        da, db = d[:, e], d[:, (e + 1) % 3]
        cand.append(vertices[ia])
        keep.append(da <= 0.0)
        cand.append(_edge_points_np(vertices, ia, ib, da, db))
        keep.append(((da < 0.0) & (db > 0.0)) | ((da > 0.0) & (db < 0.0)))
    cand = np.stack(cand, axis=1) - apex
    keep = np.stack(keep, axis=1)
    order = np.argsort(~keep, axis=1, kind="stable")
    poly = np.take_along_axis(cand, order[:, :, None], axis=1)
    count = keep.sum(axis=1)

    def det(a, b, c):
        return np.einsum("ij,ij->i", a, np.cross(b, c))

    vol = np.where(count >= 3, det(poly[:, 0], poly[:, 1], poly[:, 2]), 0.0)
    vol = vol + np.where(count >= 4, det(poly[:, 0], poly[:, 2], poly[:, 3]), 0.0)
    return float(vol.sum() / 6.0)


# ---------------------------------------------------------------------------
# point-in-solid by +z ray parity
# ---------------------------------------------------------------------------


def build_xy_grid(vertices, faces, cells=64):
    """Bin triangles by the xy cells their projected bounding boxes overlap.

    Returns ``(lo, inv_size, cells, start, items)``; the triangles in cell
    ``(i, j)`` are ``items[start[c]:start[c + 1]]`` with ``c = i * cells + j``.
    """
    tri = vertices[faces]
    lo = vertices[:, :2].min(axis=0)
    hi = vertices[:, :2].max(axis=0)
    span = np.maximum(hi - lo, 1e-300)
    inv = cells / span
    tlo = np.clip(((tri[:, :, :2].min(axis=1) - lo) * inv).astype(np.int64), 0, cells - 1)
    thi = np.clip(((tri[:, :, :2].max(axis=1) - lo) * inv).astype(np.int64), 0, cells - 1)
    buckets = [[] for _ in range(cells * cells)]
    for t in range(len(faces)):
        for i in range(tlo[t, 0], thi[t, 0] + 1):
            for j in range(tlo[t, 1], thi[t, 1] + 1):
                buckets[i * cells + j].append(t)
    start = np.zeros(cells * cells + 1, dtype=np.int64)
    start[1:] = np.cumsum([len(b) for b in buckets])
    items = np.fromiter((t for b in buckets for t in b), dtype=np.int64, count=int(start[-1]))
    return lo, inv, cells, start, items


@njit
def points_inside_nb(points, vertices, faces, lo, inv, cells, start, items):
    out = np.zeros(points.shape[0], dtype=np.bool_)
    for p in range(points.shape[0]):
        px = points[p, 0]
        py = points[p, 1]
        pz = points[p, 2]
        ci = int((px - lo[0]) * inv[0])
        cj = int((py - lo[1]) * inv[1])
        if ci < 0 or cj < 0 or ci >= cells or cj >= cells:
            continue
        c = ci * cells + cj
        crossings = 0
        for k in range(start[c], start[c + 1]):
            t = items[k]
            a = vertices[faces[t, 0]]
            b = vertices[faces[t, 1]]
            cc = vertices[faces[t, 2]]
            w0 = (b[0] - px) * (cc[1] - py) - (b[1] - py) * (cc[0] - px)
            w1 = (cc[0] - px) * (a[1] - py) - (cc[1] - py) * (a[0] - px)
            w2 = (a[0] - px) * (b[1] - py) - (a[1] - py) * (b[0] - px)
            if (w0 > 0.0 and w1 > 0.0 and w2 > 0.0) or (w0 < 0.0 and w1 < 0.0 and w2 < 0.0):
                z = (w0 * a[2] + w1 * b[2] + w2 * cc[2]) / (w0 + w1 + w2)
                if z > pz:
                    crossings += 1
        out[p] = crossings % 2 == 1
    return out


def points_inside_np(points, vertices, faces, chunk=2048):
    tri = vertices[faces]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    out = np.empty(len(points), dtype=bool)
    for s in range(0, len(points), chunk):
        p = points[s : s + chunk, None, :]
        w0 = (b[:, 0] - p[..., 0]) * (c[:, 1] - p[..., 1]) - (b[:, 1] - p[..., 1]) * (c[:, 0] - p[..., 0])
        w1 = (c[:, 0] - p[..., 0]) * (a[:, 1] - p[..., 1]) - (c[:, 1] - p[..., 1]) * (a[:, 0] - p[..., 0])
        w2 = (a[:, 0] - p[..., 0]) * (b[:, 1] - p[..., 1]) - (a[:, 1] - p[..., 1]) * (b[:, 0] - p[..., 0])
        hit = ((w0 > 0) & (w1 > 0) & (w2 > 0)) | ((w0 < 0) & (w1 < 0) & (w2 < 0))
        area = np.where(hit, w0 + w1 + w2, 1.0)
        z = (w0 * a[:, 2] + w1 * b[:, 2] + w2 * c[:, 2]) / area
        crossings = (hit & (z > p[..., 2])).sum(axis=1)
        out[s : s + chunk] = crossings % 2 == 1
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def signed_volume(vertices, faces, ref):
    if USE_NUMBA:
        return float(signed_volume_nb(vertices, faces, ref))
    return signed_volume_np(vertices, faces, ref)


def clipped_volume(vertices, faces, dist, apex):
    if USE_NUMBA:
        return float(clipped_volume_nb(vertices, faces, dist, apex))
    return clipped_volume_np(vertices, faces, dist, apex)


def points_inside(points, vertices, faces):
    points = np.ascontiguousarray(points, dtype=np.float64)
    if USE_NUMBA:
        lo, inv, cells, start, items = build_xy_grid(vertices, faces)
        return points_inside_nb(points, vertices, faces, lo, inv, cells, start, items)
    return points_inside_np(points, vertices, faces)
