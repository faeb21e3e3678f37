"""Compare the numba and pure-numpy kernels on a finely tessellated cup.

Usage::

    python benchmarks/bench_kernels.py [--segments 512] [--points 20000] [--repeat 5]

Each kernel is called once before timing so JIT compilation is excluded.
Results from both paths are checked for agreement.
"""
import argparse
import time

import numpy as np

from pourkit import kernels, shapes
from pourkit._accel import NUMBA_AVAILABLE
from pourkit.geometry import Plane, rotation_matrix


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--segments", type=int, default=512)
    parser.add_argument("--points", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    mesh, _ = shapes.cylinder_cup(1.0, 2.0, args.segments)
    mesh = mesh.transformed(rotation_matrix((1, 0, 0), 37.0))
    v = np.ascontiguousarray(mesh.vertices)
    f = np.ascontiguousarray(mesh.faces)
    ref = v.mean(axis=0)
    plane = Plane.horizontal(float(ref[2]))
    dist = plane.signed_distance(v)
    apex = ref - plane.signed_distance(ref) * np.asarray(plane.normal)
    pts = np.random.default_rng(0).uniform(v.min(axis=0), v.max(axis=0), size=(args.points, 3))
    grid = kernels.build_xy_grid(v, f)

    cases = [
        ("signed_volume", lambda: kernels.signed_volume_nb(v, f, ref), lambda: kernels.signed_volume_np(v, f, ref)),
        ("clipped_volume", lambda: kernels.clipped_volume_nb(v, f, dist, apex),
         lambda: kernels.clipped_volume_np(v, f, dist, apex)),
        ("points_inside", lambda: kernels.points_inside_nb(pts, v, f, *grid),
         lambda: kernels.points_inside_np(pts, v, f)),
    ]

    print(f"{len(f)} faces, {args.points} query points, numba available: {NUMBA_AVAILABLE}")
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, fast, slow in cases:
        a, b = fast(), slow()
        agree = np.array_equal(a, b) if isinstance(a, np.ndarray) else bool(np.isclose(a, b, rtol=1e-12))
        t_nb = best_of(fast, args.repeat)
        t_np = best_of(slow, args.repeat)
        print(f"{name:<16}{1e3 * t_nb:>12.2f}{1e3 * t_np:>12.2f}{t_np / t_nb:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
