"""Acceptance gate: one test per criterion.

The first docstring line names the criterion; conftest prints one PASS/FAIL
line per criterion at the end of the session.
"""
import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import write_model
from pourkit import dataset as ds
from pourkit import montecarlo, shapes
from pourkit.cli import main
from pourkit.evaluation import (
    ConfusionMatrix,
    WeightTable,
    avg_per_class_accuracy,
    chance_baseline,
    edit_distance,
    sequence_loss,
)
from pourkit.geometry import Plane, clip_volume_below, mesh_volume, rotation_matrix
from pourkit.labels import ComparativeLabel, ContentClass, FractionClass
from pourkit.pouring import (
    ContainerModel,
    TiltQuery,
    fill_surface_height,
    max_stable_volume,
    pour_trace,
    sequence_problems,
)

# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def cube_halfspace_volume(n, d):
    """Volume of [0,1]^3 with n . x <= d, by inclusion-exclusion over corners."""
    n = np.array(n, dtype=float)
    d = float(d)
    for i in range(3):
        if n[i] < 0:  # reflect x_i -> 1 - x_i
            d -= n[i]
            n[i] = -n[i]
    if np.any(n < 1e-6):
        raise ValueError("oracle needs a generic normal")
    total = 0.0
    for corner in itertools.product((0, 1), repeat=3):
        total += (-1) ** sum(corner) * max(d - n @ corner, 0.0) ** 3
    return total / (6.0 * n.prod())


def recursive_edit_distance(a, b):
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return recursive_edit_distance(a[1:], b[1:])
    return 1 + min(recursive_edit_distance(a[1:], b), recursive_edit_distance(a, b[1:]),
                   recursive_edit_distance(a[1:], b[1:]))


def comparative_oracle(c1, v1, c2, v2):
    if c1 == "opaque" or c2 == "opaque":
        return ComparativeLabel.CANT_TELL
    # integer mL and percents: compare 100 * content with 100 * free space
    fits = int(c1) * v1 < (100 - int(c2)) * v2
    return ComparativeLabel.YES if fits else ComparativeLabel.NO


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_c01_geometry_exactness():
    """C1 geometry exactness"""
    cube = shapes.unit_cube()
    rotations = [np.eye(3)] + [rotation_matrix(ax, ang) @ rotation_matrix((1, 0, 0), 31.0)
                               for ax, ang in (((0, 1, 0), 23.0), ((1, 1, 0), 50.0), ((0, 1, 0), 67.0), ((1, -1, 0), 112.0))]
    clip_volume_below(cube, Plane.horizontal(0.5))  # JIT warm-up is excluded from timing
    start = time.perf_counter()
    checked = 0
    for R in rotations:
        posed = cube.transformed(R, center=(0.5, 0.5, 0.5))
        # horizontal plane in world = plane with normal R^T e_z in the cube frame
        n_local = R.T @ np.array([0.0, 0.0, 1.0])
        z = posed.vertices[:, 2]
        for h in np.linspace(z.min(), z.max(), 12)[1:-1]:
            got = clip_volume_below(posed, Plane.horizontal(float(h)))
            d_local = h - 0.5 + n_local @ [0.5, 0.5, 0.5]
            if np.allclose(R, np.eye(3)):
                want = min(max(d_local, 0.0), 1.0)
            else:
                want = cube_halfspace_volume(n_local, d_local)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12), (R, h)
            checked += 1
    mesh, _ = shapes.cylinder_cup(1.0, 1.0, 512)
    assert abs(mesh_volume(mesh) - math.pi) / math.pi < 1e-3
    elapsed = time.perf_counter() - start
    assert checked == 50
    assert elapsed < 1.0, elapsed


def test_c02_monte_carlo_equivalence():
    """C2 oracle equivalence (Monte Carlo, 3 SE)"""
    rng = np.random.default_rng(2024)
    solids = [shapes.cone_cup(1.0, 2.0, 48)[0], shapes.cylinder_cup(1.0, 2.0, 48)[0], shapes.bottle(32)[0],
              shapes.bowl(32)[0], shapes.box((2.0, 1.0, 1.5))[0]]
    montecarlo.volume_below(solids[0], None, samples=1000)  # warm-up
    start = time.perf_counter()
    configs = 0
    for k in range(12):
        mesh = solids[k % len(solids)].transformed(rotation_matrix((1, 0, 0), rng.uniform(0, 180)))
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        d = mesh.vertices @ normal
        plane = Plane(tuple(normal), float(rng.uniform(np.quantile(d, 0.2), np.quantile(d, 0.8))))
        exact = clip_volume_below(mesh, plane)
        est = montecarlo.volume_below(mesh, plane, samples=1_000_000, seed=k)
        assert est.agrees(exact, 3.0), (k, exact, est)
        configs += 1
    elapsed = time.perf_counter() - start
    assert configs >= 10
    assert elapsed < 30.0, elapsed


def test_c03_pouring_boundaries():
    """C3 pouring boundary cases"""
    fixtures = [shapes.cylinder_cup(1.0, 2.0, 128), shapes.cone_cup(1.0, 2.0, 96), shapes.box(),
                shapes.bottle(48), shapes.bowl(48)]
    for mesh, cap in fixtures:
        m = ContainerModel.from_mesh(mesh, cap)
        assert max_stable_volume(m, m.rotation(0.0)) == pytest.approx(m.nominal_volume, rel=1e-6)
        assert max_stable_volume(m, m.rotation(180.0)) <= 1e-6 * m.nominal_volume
    cup = ContainerModel.from_mesh(*shapes.cylinder_cup(1.0, 2.0, 128))
    assert max_stable_volume(cup, cup.rotation(90.0)) <= 1e-6 * cup.nominal_volume


def test_c04_sequence_invariants():
    """C4 sequence invariants (100 randomized cases)"""
    rng = np.random.default_rng(7)
    models = [ContainerModel.from_mesh(*m) for m in
              (shapes.cylinder_cup(1.0, 2.0, 64), shapes.cone_cup(1.0, 2.0, 64), shapes.bottle(32),
               shapes.bowl(32), shapes.box((1.0, 2.0, 1.0)), shapes.cylinder_cup(1.0, 4.0, 64))]
    for _ in range(100):
        m = models[rng.integers(len(models))]
        fill = float(rng.uniform(0.01, 1.0))
        angle = float(rng.uniform(1.0, 180.0))
        trace = pour_trace(m, fill, TiltQuery(angle))
        seq = trace.sequence
        assert sequence_problems(seq) == []
        assert len(seq) <= 5
        vals = [e.value for e in seq]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        if FractionClass.R0 in seq:
            assert seq[-1] is FractionClass.R0 and vals.count(0) == 1
        for e, f in zip(seq, trace.fractions):
            assert abs(e.fraction - f) <= 0.05 + 1e-12
    for m in models:
        for angle in (30.0, 180.0):
            assert pour_trace(m, ContentClass.EMPTY, TiltQuery(angle)).sequence.labels() == ["0.0"]
            assert pour_trace(m, ContentClass.OPAQUE, TiltQuery(angle)).sequence.labels() == ["opaque"]


def test_c05_chance_rows():
    """C5 chance rows (10.00 / 16.67 / 33.33)"""
    for K, table in ((10, 10.00), (6, 16.67), (3, 33.33)):
        gt = np.arange(100_000) % K
        pred = chance_baseline(K, len(gt), seed=0)
        acc = avg_per_class_accuracy(ConfusionMatrix.from_labels(gt, pred, K))
        assert abs(acc - table) <= 1.0, (K, acc)


def test_c06_edit_distance():
    """C6 edit distance (exhaustive oracle + metric axioms)"""
    seqs = [s for n in range(5) for s in itertools.product("abc", repeat=n)]
    for a in seqs:
        for b in seqs:
            assert edit_distance(a, b) == recursive_edit_distance(a, b)
    rng = np.random.default_rng(11)
    alphabet = list(FractionClass)
    for _ in range(10_000):
        a, b, c = ([alphabet[i] for i in rng.integers(0, 12, rng.integers(0, 6))] for _ in range(3))
        dab, dba = edit_distance(a, b), edit_distance(b, a)
        assert (dab == 0) == (a == b)
        assert dab == dba
        assert edit_distance(a, c) <= dab + edit_distance(b, c)


def test_c07_sequence_loss():
    """C7 weighted sequence loss"""
    uniform = sequence_loss([FractionClass.R7, FractionClass.R2, FractionClass.R0], [np.full(12, 1 / 12)] * 3)
    assert abs(uniform.value - math.log(12)) <= 1e-9
    p0 = np.full(12, 0.5 / 11)
    p0[4] = 0.5
    p1 = np.full(12, 0.75 / 11)
    p1[2] = 0.25
    weighted = sequence_loss([FractionClass.R4, FractionClass.R2], [p0, p1],
                             WeightTable(({FractionClass.R4: 2.0}, {FractionClass.R2: 1.0})), length=2)
    assert abs(weighted.value - (-(2 * math.log(0.5) + math.log(0.25)) / 2)) <= 1e-9
    rng = np.random.default_rng(3)
    for _ in range(200):
        gt = [FractionClass(int(k)) for k in sorted(rng.integers(0, 11, rng.integers(1, 6)), reverse=True)]
        onehot = [np.eye(12)[int(s)] for s in gt]
        assert sequence_loss(gt, onehot).value == 0.0
        noisy = [rng.dirichlet(np.ones(12)) for _ in gt]
        assert sequence_loss(gt, noisy).value > 0.0
        wrong = [np.eye(12)[(int(s) + 1) % 12] for s in gt]
        assert sequence_loss(gt, wrong).value > 0.0


def test_c08_comparative_labels():
    """C8 comparative labels vs brute-force oracle"""
    rng = np.random.default_rng(5)
    contents = [c.value for c in ContentClass]
    pairs = []
    for _ in range(900):
        c1, c2 = rng.choice(contents, 2)
        pairs.append((c1, int(rng.integers(10, 3000)), c2, int(rng.integers(10, 3000))))
    # equality cases: content of 1 exactly equals free space of 2
    for _ in range(100):
        c1 = rng.choice(["33", "50", "66", "100"])
        c2 = rng.choice(["0", "33", "50", "66"])
        free_pct = 100 - int(c2)
        v2 = int(int(c1) * rng.integers(1, 40))
        v1 = free_pct * v2 // int(c1)
        assert int(c1) * v1 == free_pct * v2
        pairs.append((c1, v1, c2, v2))
    equal = 0
    for c1, v1, c2, v2 in pairs:
        a = ds.ContainerAnnotation("img", (0, 0, 40, 40), v1, ContentClass(c1), "cup")
        b = ds.ContainerAnnotation("img", (0, 0, 40, 40), v2, ContentClass(c2), "cup")
        assert ds.comparative_label(a, b) is comparative_oracle(c1, v1, c2, v2), (c1, v1, c2, v2)
        equal += c1 != "opaque" and c2 != "opaque" and Fraction(int(c1) * v1) == Fraction((100 - int(c2)) * v2)
    assert len(pairs) == 1000 and equal >= 100
    assert any(c1 == "opaque" or c2 == "opaque" for c1, _, c2, _ in pairs)


def test_c09_fill_bisection():
    """C9 fill-level bisection"""
    cases = [
        (ContainerModel.from_mesh(*shapes.box()), lambda c: c),
        (ContainerModel.from_mesh(*shapes.cylinder_cup(1.0, 3.0, 64)), lambda c: 3.0 * c),
        (ContainerModel.from_mesh(*shapes.cone_cup(1.5, 2.5, 64)), lambda c: 2.5 * c ** (1 / 3)),
    ]
    for model, height in cases:
        V = model.nominal_volume
        mesh = model.interior
        for c in (0.05, 0.33, 0.5, 0.66, 0.97):
            h = fill_surface_height(model, c)
            at_found = clip_volume_below(mesh, Plane.horizontal(h))
            at_exact = clip_volume_below(mesh, Plane.horizontal(height(c)))
            assert abs(at_found - c * V) <= 1e-6 * V
            assert abs(at_found - at_exact) <= 1e-6 * V


def test_c10_determinism(tmp_path, capsys):
    """C10 determinism (gen-pour bytes, dataset round-trip)"""
    models = tmp_path / "models"
    models.mkdir()
    write_model(models, "cup", *shapes.cylinder_cup(1.0, 2.0, 64))
    write_model(models, "bottle", *shapes.bottle(32))
    rows = []
    rng = np.random.default_rng(0)
    for i in range(4):
        conts = [{"bbox": [10, 10, 40, 60], "volume_ml": int(rng.integers(50, 2000)),
                  "content": rng.choice(["0", "33", "50", "66", "100", "opaque"]).item(),
                  "cad_id": rng.choice(["cup", "bottle"]).item(), "upright": bool(i != 2 or k != 0)}
                 for k in range(3)]
        rows.append({"image_id": f"im{i:02d}", "width": 320, "height": 240, "containers": conts})
    ann = tmp_path / "ann.jsonl"
    ann.write_text("".join(json.dumps(r) + "\n" for r in rows))

    outputs = []
    for run, jobs in enumerate((1, 1, 3)):
        out = tmp_path / f"gt{run}.jsonl"
        assert main(["gen-pour", str(ann), "--models", str(models), "--jobs", str(jobs), "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]
    assert len(outputs[0].splitlines()) == (12 - 1) * 5

    recs = ds.load_dataset(ann)
    first = ds.dumps_records(recs)
    (tmp_path / "rt.jsonl").write_text(first)
    assert ds.dumps_records(ds.load_dataset(tmp_path / "rt.jsonl")) == first
    assert first.encode() == ann.read_bytes()
