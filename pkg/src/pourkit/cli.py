"""Command line front end.

Exit codes: 0 success, 1 domain violation, 2 I/O or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds
from .evaluation import ConfusionMatrix, LengthMismatch, avg_per_class_accuracy, sequence_accuracy_table
from .geometry import GeometryError
from .labels import ComparativeLabel, ContentClass, FractionClass
from .meshio import MeshFormatError, SidecarError, load_sidecar, save_obj, save_sidecar
from .pouring import ContainerError, ContainerModel, SequenceError, TiltQuery, pour_trace, rescale_factor, rescale_to_volume

EXIT_OK, EXIT_VIOLATION, EXIT_IO = 0, 1, 2

log = logging.getLogger("pourkit")

DOMAIN_ERRORS = (ds.DatasetError, GeometryError, ContainerError, SequenceError, MeshFormatError, SidecarError,
                 LengthMismatch)


def _angles(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle list {text!r}") from None
    if not vals or any(not 0.0 < a <= 180.0 for a in vals):
        raise argparse.ArgumentTypeError("angles must be in (0, 180]")
    return vals


def _axis(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad axis {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("axis needs three components")
    return vals


def _emit(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _require_file(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")


def _require_dir(path):
    if not Path(path).is_dir():
        raise FileNotFoundError(f"no such directory: {path}")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    _require_file(args.dataset)
    _require_dir(args.models)
    report = ds.validate_dataset(args.dataset)
    lib = ds.ModelLibrary(args.models)
    checked = {}
    for rec in report.records:
        for i, c in enumerate(rec.containers):
            if c.cad_id in checked:
                problem = checked[c.cad_id]
            else:
                problem = None
                try:
                    lib.get(c.cad_id)
                except ds.UnresolvedCadId as exc:
                    problem = ("UnresolvedCadId", str(exc))
                except DOMAIN_ERRORS as exc:
                    problem = ("model", f"{c.cad_id}: {type(exc).__name__}: {exc}")
                checked[c.cad_id] = problem
            if problem is not None:
                report.issues.append(ds.Issue(None, problem[0], f"image {rec.image_id!r} container {i}: {problem[1]}"))

    data = {
        "dataset": str(args.dataset),
        "records": len(report.records),
        "errors": [i.to_dict() for i in report.errors],
        "warnings": [i.to_dict() for i in report.warnings],
    }
    if args.format == "json":
        text = json.dumps(data, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["severity", "line", "rule", "message"])
        for i in report.issues:
            w.writerow([i.severity, "" if i.line is None else i.line, i.rule, i.message])
        text = buf.getvalue()
    else:
        lines = [str(i) for i in report.issues]
        lines.append(f"{len(report.records)} valid record(s), {len(report.errors)} error(s), "
                     f"{len(report.warnings)} warning(s)")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return EXIT_VIOLATION if report.errors else EXIT_OK


# ---------------------------------------------------------------------------
# gen-pour / labels
# ---------------------------------------------------------------------------


def cmd_gen_pour(args) -> int:
    _require_file(args.dataset)
    _require_dir(args.models)
    records = ds.load_dataset(args.dataset)
    rows, skipped = ds.generate_pour_groundtruth(records, ds.ModelLibrary(args.models), args.angles,
                                                 args.timesteps, args.jobs)
    for s in skipped:
        log.warning("skipped %s container %d: %s", s["image_id"], s["container_index"], s["reason"])
    _emit(ds.dumps_groundtruth(rows), args.out)
    return EXIT_OK


def cmd_labels(args) -> int:
    _require_file(args.dataset)
    records = ds.load_dataset(args.dataset)
    make = {"volume": ds.volume_labels, "content": ds.content_labels, "comparative": ds.comparative_labels}[args.task]
    _emit("".join(json.dumps(r) + "\n" for r in make(records)), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / rescale
# ---------------------------------------------------------------------------


def _load_model(mesh_path, sidecar_path, axis=None) -> ContainerModel:
    _require_file(mesh_path)
    _require_file(sidecar_path)
    model = ds.load_container_model(mesh_path, sidecar_path)
    if axis is not None:
        model = ContainerModel.from_mesh(model.interior, model.cap_faces, axis)
    return model


def cmd_simulate(args) -> int:
    model = _load_model(args.mesh, args.sidecar, args.axis)
    if args.volume_ml is not None:
        model = rescale_to_volume(model, args.volume_ml)
    trace = pour_trace(model, ContentClass(args.content), TiltQuery(args.angle, args.timesteps))
    if args.format == "json":
        data = {
            "nominal_volume": model.nominal_volume,
            "angles_deg": trace.angles,
            "remaining_volume": trace.volumes,
            "remaining_fraction": trace.fractions,
            "sequence": trace.sequence.labels(),
        }
        _emit(json.dumps(data, indent=2) + "\n", args.out)
        return EXIT_OK
    lines = [f"nominal volume: {model.nominal_volume:.6f}"]
    if trace.volumes:
        lines.append(f"{'angle':>8} {'remaining':>14} {'fraction':>10}")
        for a, v, f in zip(trace.angles, trace.volumes, trace.fractions):
            lines.append(f"{a:8.2f} {v:14.6f} {f:10.6f}")
    else:
        lines.append("angles: " + ", ".join(f"{a:.2f}" for a in trace.angles))
    lines.append(str(trace.sequence))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_rescale(args) -> int:
    _require_file(args.mesh)
    _require_file(args.sidecar)
    model = ds.load_container_model(args.mesh, args.sidecar)
    factor = rescale_factor(model, args.volume_ml)
    scaled = rescale_to_volume(model, args.volume_ml)
    save_obj(scaled.interior, args.out)
    side_out = args.sidecar_out or str(Path(args.out).with_suffix(".json"))
    save_sidecar(side_out, scaled.cap_faces, load_sidecar(args.sidecar)["tilt_axis"])
    print(json.dumps({"scale_factor": factor, "nominal_volume": scaled.nominal_volume,
                      "mesh": str(args.out), "sidecar": side_out}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

_VALUE_KEYS = {"label", "sequence"}


def _aligned(gt_rows, pred_rows):
    if len(gt_rows) != len(pred_rows):
        raise LengthMismatch(f"alignment mismatch: {len(gt_rows)} groundtruth vs {len(pred_rows)} prediction rows")
    for n, (g, p) in enumerate(zip(gt_rows, pred_rows), 1):
        kg = {k: v for k, v in g.items() if k not in _VALUE_KEYS}
        kp = {k: v for k, v in p.items() if k not in _VALUE_KEYS}
        if kg != kp:
            raise LengthMismatch(f"alignment mismatch at row {n}: {kg} vs {kp}")


def _class_index(task, value):
    if task == "volume":
        k = int(value)
        if not 0 <= k < 10:
            raise ValueError
        return k
    if task == "content":
        return ContentClass(str(value)).index
    return ComparativeLabel(str(value)).index


def score_rows(task: str, gt_rows, pred_rows) -> dict:
    _aligned(gt_rows, pred_rows)
    if task == "pouring":
        gts = [ds.sequence_from_row(r).elements for r in gt_rows]
        preds = [tuple(FractionClass.from_label(s) for s in r["sequence"]) for r in pred_rows]
        table = sequence_accuracy_table(preds, gts, 4)
        return {"task": task, "n": len(gts), "exact_match": table[0],
                "accuracy_at_edit_distance": {str(k): v for k, v in table.items()}}
    K = {"volume": 10, "content": len(ContentClass), "comparative": len(ComparativeLabel)}[task]
    try:
        g = [_class_index(task, r["label"]) for r in gt_rows]
        p = [_class_index(task, r["label"]) for r in pred_rows]
    except (KeyError, ValueError) as exc:
        raise ds.SchemaError(f"bad or missing label: {exc}", rule="label") from None
    cm = ConfusionMatrix.from_labels(g, p, K)
    per = cm.per_class_accuracy()
    return {"task": task, "n": len(g), "avg_per_class_accuracy": avg_per_class_accuracy(cm),
            "per_class_accuracy": [None if v != v else float(v) for v in per]}


def cmd_score(args) -> int:
    _require_file(args.gt)
    _require_file(args.pred)
    result = score_rows(args.task, ds.read_jsonl(args.gt), ds.read_jsonl(args.pred))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if args.task == "pouring":
            w.writerow(["edit_distance", "accuracy"])
            for k, v in result["accuracy_at_edit_distance"].items():
                w.writerow([k, f"{v:.2f}"])
        else:
            w.writerow(["metric", "value"])
            w.writerow(["avg_per_class_accuracy", f"{result['avg_per_class_accuracy']:.2f}"])
            for i, v in enumerate(result["per_class_accuracy"]):
                w.writerow([f"class_{i}", "" if v is None else f"{v:.2f}"])
        text = buf.getvalue()
    else:
        text = json.dumps(result, indent=2) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pourkit", description="Container volume and pouring groundtruth tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check annotations and CAD models")
    v.add_argument("dataset")
    v.add_argument("--models", required=True, help="directory of <cad_id>.obj / <cad_id>.json")
    v.add_argument("--format", choices=("text", "json", "csv"), default="text")
    v.add_argument("--report", help="also write the JSON report here")
    v.add_argument("--out", help="output file (default stdout)")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gen-pour", help="pouring groundtruth as JSON Lines")
    g.add_argument("dataset")
    g.add_argument("--models", required=True)
    g.add_argument("--angles", type=_angles, default=list(ds.DEFAULT_ANGLES))
    g.add_argument("--timesteps", type=int, default=5)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--seed", type=int, default=0, help="accepted for uniformity; generation is not random")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_pour)

    lb = sub.add_parser("labels", help="volume, content or comparative groundtruth labels")
    lb.add_argument("dataset")
    lb.add_argument("--task", choices=("volume", "content", "comparative"), required=True)
    lb.add_argument("--out")
    lb.set_defaults(func=cmd_labels)

    s = sub.add_parser("simulate", help="pour one container")
    s.add_argument("mesh")
    s.add_argument("sidecar")
    s.add_argument("--volume-ml", type=float, help="rescale the model to this volume first")
    s.add_argument("--content", choices=[c.value for c in ContentClass], required=True)
    s.add_argument("--angle", type=float, required=True)
    s.add_argument("--timesteps", type=int, default=5)
    s.add_argument("--axis", type=_axis, help="override tilt axis, e.g. 1,0,0")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    sc = sub.add_parser("score", help="score predictions against groundtruth")
    sc.add_argument("gt")
    sc.add_argument("pred")
    sc.add_argument("--task", choices=("volume", "content", "comparative", "pouring"), required=True)
    sc.add_argument("--format", choices=("json", "csv"), default="json")
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_score)

    r = sub.add_parser("rescale", help="scale a CAD model to a target volume")
    r.add_argument("mesh")
    r.add_argument("sidecar")
    r.add_argument("--volume-ml", type=float, required=True)
    r.add_argument("--out", required=True, help="output OBJ")
    r.add_argument("--sidecar-out")
    r.set_defaults(func=cmd_rescale)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "timesteps", 1) < 1:
        parser.error("--timesteps must be at least 1")
    try:
        return args.func(args)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DOMAIN_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
