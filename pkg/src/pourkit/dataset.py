"""Annotation records, CAD model lookup and groundtruth generation.

Annotations are JSON Lines, one image per line::

    {"image_id": "img1", "width": 640, "height": 480,
     "containers": [{"bbox": [x, y, w, h], "volume_ml": 330, "content": "50",
                     "cad_id": "mug", "upright": true}, ...]}
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .labels import ComparativeLabel, ContentClass, FractionClass, volume_bin
from .meshio import load_obj, load_sidecar
from .pouring import ContainerModel, MissingCap, PourSequence, TiltQuery, rescale_to_volume, simulate_pour

log = logging.getLogger(__name__)

MIN_BBOX_SIDE_PX = 30
MIN_CONTAINERS = 2
MIN_OBJECTS_HINT = 4
DEFAULT_ANGLES = (36.0, 72.0, 108.0, 144.0, 180.0)

RECORD_KEYS = ("image_id", "width", "height", "containers")
CONTAINER_KEYS = ("bbox", "volume_ml", "content", "cad_id", "upright")


class DatasetError(ValueError):
    """Base class; carries the 1-based line number and the rule broken."""

    def __init__(self, message, line=None, rule=None):
        self.line = line
        self.rule = rule
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ParseError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class InvariantViolation(DatasetError):
    pass


class UnresolvedCadId(DatasetError):
    pass


class CrossImagePair(ValueError):
    pass


@dataclass(frozen=True)
class ContainerAnnotation:
    image_id: str
    bbox: tuple
    volume_ml: float
    content: ContentClass
    cad_id: str
    upright: bool = True

    @property
    def fraction(self) -> float | None:
        return self.content.fraction

    @property
    def volume_bin(self) -> int:
        return volume_bin(self.volume_ml)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int
    containers: tuple = ()


@dataclass
class Issue:
    line: int | None
    rule: str
    message: str
    severity: str = "error"

    def to_dict(self):
        return {"line": self.line, "rule": self.rule, "message": self.message, "severity": self.severity}

    def __str__(self):
        where = f"line {self.line}" if self.line is not None else "dataset"
        return f"{where}: [{self.severity}] {self.rule}: {self.message}"


@dataclass
class DatasetReport:
    records: list = field(default_factory=list)
    issues: list = field(default_factory=list)

    @property
    def errors(self):
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self):
        return [i for i in self.issues if i.severity == "warning"]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _check_keys(obj, expected, what, line):
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be an object", line, "schema")
    missing = [k for k in expected if k not in obj]
    extra = sorted(set(obj) - set(expected))
    if missing:
        raise SchemaError(f"{what} missing keys {missing}", line, "schema")
    if extra:
        raise SchemaError(f"{what} has unexpected keys {extra}", line, "schema")


def parse_record(obj, line=None) -> ImageRecord:
    """Validate one decoded JSON object; raises on the first hard problem."""
    _check_keys(obj, RECORD_KEYS, "record", line)
    image_id = obj["image_id"]
    if not isinstance(image_id, str) or not image_id:
        raise SchemaError("image_id must be a non-empty string", line, "schema")
    W, H = obj["width"], obj["height"]
    if not (_is_int(W) and _is_int(H)) or W <= 0 or H <= 0:
        raise SchemaError("width and height must be positive integers", line, "schema")
    if not isinstance(obj["containers"], list):
        raise SchemaError("containers must be a list", line, "schema")

    containers = []
    for i, c in enumerate(obj["containers"]):
        what = f"container {i}"
        _check_keys(c, CONTAINER_KEYS, what, line)
        bbox = c["bbox"]
        if not (isinstance(bbox, list) and len(bbox) == 4 and all(_is_number(x) for x in bbox)):
            raise SchemaError(f"{what}: bbox must be [x, y, w, h] numbers", line, "schema")
        if not _is_number(c["volume_ml"]):
            raise SchemaError(f"{what}: volume_ml must be a number", line, "schema")
        try:
            content = ContentClass(c["content"]) if isinstance(c["content"], str) else None
        except ValueError:
            content = None
        if content is None:
            raise SchemaError(f"{what}: content must be one of {[m.value for m in ContentClass]}", line, "schema")
        if not isinstance(c["cad_id"], str) or not c["cad_id"]:
            raise SchemaError(f"{what}: cad_id must be a non-empty string", line, "schema")
        if not isinstance(c["upright"], bool):
            raise SchemaError(f"{what}: upright must be a boolean", line, "schema")

        x, y, w, h = bbox
        if w <= 0 or h <= 0:
            raise InvariantViolation(f"{what}: bbox width and height must be positive", line, "bbox-positive")
        if max(w, h) < MIN_BBOX_SIDE_PX:
            raise InvariantViolation(
                f"{what}: larger bbox side {max(w, h)} px is below {MIN_BBOX_SIDE_PX} px",
                line, "bbox-min-30px")
        if x < 0 or y < 0 or x + w > W or y + h > H:
            raise InvariantViolation(f"{what}: bbox {bbox} leaves the {W}x{H} image", line, "bbox-in-image")
        if not c["volume_ml"] > 0:
            raise InvariantViolation(f"{what}: volume_ml must be positive", line, "volume-positive")
        containers.append(ContainerAnnotation(image_id, tuple(bbox), c["volume_ml"], content, c["cad_id"], c["upright"]))

    if len(containers) < MIN_CONTAINERS:
        raise InvariantViolation(
            f"image has {len(containers)} container(s); at least {MIN_CONTAINERS} required",
            line, "min-2-containers")
    return ImageRecord(image_id, W, H, tuple(containers))


def _iter_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if raw.strip():
                yield lineno, raw


def validate_dataset(path) -> DatasetReport:
    """Parse every line, collecting good records and all diagnostics."""
    report = DatasetReport()
    seen = {}
    for lineno, raw in _iter_lines(path):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            report.issues.append(Issue(lineno, "json", str(exc)))
            continue
        try:
            rec = parse_record(obj, lineno)
        except DatasetError as exc:
            report.issues.append(Issue(lineno, exc.rule or "schema", str(exc)))
            continue
        if rec.image_id in seen:
            report.issues.append(Issue(lineno, "unique-image-id",
                                       f"image_id {rec.image_id!r} already used on line {seen[rec.image_id]}"))
            continue
        seen[rec.image_id] = lineno
        if len(rec.containers) < MIN_OBJECTS_HINT:
            report.issues.append(Issue(
                lineno, "min-4-objects",
                f"only {len(rec.containers)} annotated object(s); images should show at least {MIN_OBJECTS_HINT}",
                "warning"))
        report.records.append(rec)
    return report


def load_dataset(path, strict: bool = True) -> list[ImageRecord]:
    """Load annotation records.

    With ``strict`` the first bad line raises :class:`ParseError`,
    :class:`SchemaError` or :class:`InvariantViolation`; otherwise bad lines
    are logged and skipped.
    """
    records = []
    for lineno, raw in _iter_lines(path):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            err = ParseError(str(exc), lineno, "json")
            if strict:
                raise err from None
            log.warning("%s", err)
            continue
        try:
            records.append(parse_record(obj, lineno))
        except DatasetError as exc:
            if strict:
                raise
            log.warning("%s", exc)
    return records


def record_to_dict(rec: ImageRecord) -> dict:
    return {
        "image_id": rec.image_id,
        "width": rec.width,
        "height": rec.height,
        "containers": [
            {
                "bbox": list(c.bbox),
                "volume_ml": c.volume_ml,
                "content": c.content.value,
                "cad_id": c.cad_id,
                "upright": c.upright,
            }
            for c in rec.containers
        ],
    }


def dumps_records(records) -> str:
    return "".join(json.dumps(record_to_dict(r), ensure_ascii=False) + "\n" for r in records)


def dump_dataset(records, path):
    Path(path).write_text(dumps_records(records), encoding="utf-8")


# ---------------------------------------------------------------------------
# groundtruth labels
# ---------------------------------------------------------------------------


def comparative_label(a: ContainerAnnotation, b: ContainerAnnotation) -> ComparativeLabel:
    """Can the whole content of ``a`` be poured into the free space of ``b``?"""
    if a.image_id != b.image_id:
        raise CrossImagePair(f"containers come from different images ({a.image_id!r}, {b.image_id!r})")
    if a.content is ContentClass.OPAQUE or b.content is ContentClass.OPAQUE:
        return ComparativeLabel.CANT_TELL
    # exact rationals: 1 - 0.66 is not 0.34 in binary floating point
    c1 = Fraction(int(a.content.value), 100)
    c2 = Fraction(int(b.content.value), 100)
    if c1 * Fraction(a.volume_ml) < (1 - c2) * Fraction(b.volume_ml):
        return ComparativeLabel.YES
    return ComparativeLabel.NO


def volume_labels(records):
    return [{"image_id": r.image_id, "container_index": i, "label": c.volume_bin}
            for r in records for i, c in enumerate(r.containers)]


def content_labels(records):
    return [{"image_id": r.image_id, "container_index": i, "label": c.content.value}
            for r in records for i, c in enumerate(r.containers)]


def comparative_labels(records):
    """Every ordered pair of distinct containers within each image."""
    rows = []
    for r in records:
        for i, a in enumerate(r.containers):
            for j, b in enumerate(r.containers):
                if i != j:
                    rows.append({"image_id": r.image_id, "pair": [i, j], "label": comparative_label(a, b).value})
    return rows


# ---------------------------------------------------------------------------
# CAD models and pouring groundtruth
# ---------------------------------------------------------------------------


def load_container_model(mesh_path, sidecar_path) -> ContainerModel:
    mesh, kept = load_obj(mesh_path)
    side = load_sidecar(sidecar_path)
    remap = {int(orig): new for new, orig in enumerate(kept)}
    dropped = [i for i in side["cap_faces"] if i not in remap]
    if dropped:
        log.warning("%s: cap faces %s were degenerate and dropped", mesh_path, dropped)
    cap = [remap[i] for i in side["cap_faces"] if i in remap]
    if not cap:
        raise MissingCap(f"{sidecar_path}: no usable cap faces")
    return ContainerModel.from_mesh(mesh, cap, side["tilt_axis"])


class ModelLibrary:
    """CAD models in a directory as ``<cad_id>.obj`` plus ``<cad_id>.json``."""

    def __init__(self, root):
        self.root = Path(root)
        self._cache: dict[str, ContainerModel] = {}

    def paths(self, cad_id: str):
        return self.root / f"{cad_id}.obj", self.root / f"{cad_id}.json"

    def __contains__(self, cad_id):
        return all(p.is_file() for p in self.paths(cad_id))

    def get(self, cad_id: str) -> ContainerModel:
        if cad_id not in self._cache:
            mesh_path, side_path = self.paths(cad_id)
            if not (mesh_path.is_file() and side_path.is_file()):
                raise UnresolvedCadId(f"no model files for cad_id {cad_id!r} in {self.root}", rule="cad-id")
            self._cache[cad_id] = load_container_model(mesh_path, side_path)
        return self._cache[cad_id]

    def __getitem__(self, cad_id):
        return self.get(cad_id)


@dataclass(frozen=True)
class GroundtruthRow:
    image_id: str
    container_index: int
    angle_deg: float
    sequence: PourSequence

    def to_dict(self):
        return {"image_id": self.image_id, "container_index": self.container_index,
                "angle_deg": self.angle_deg, "sequence": self.sequence.labels()}


def _pour_one(task):
    model, volume_ml, content, angles, timesteps = task
    if content.fraction is None or content.fraction == 0.0:
        # no geometry needed: opaque and empty collapse to length 1
        return [simulate_pour(model, content, TiltQuery(a, timesteps)) for a in angles]
    scaled = rescale_to_volume(model, volume_ml)
    return [simulate_pour(scaled, content, TiltQuery(a, timesteps)) for a in angles]


def generate_pour_groundtruth(records, models, angles=DEFAULT_ANGLES, timesteps=5, jobs=1):
    """Pour sequences for every upright container at every angle.

    ``models`` maps cad_id to :class:`ContainerModel` (a dict or a
    :class:`ModelLibrary`). Returns ``(rows, skipped)``; rows are ordered by
    (image_id, container_index, angle) whatever ``jobs`` is.
    """
    angles = [float(a) for a in angles]
    if not angles:
        raise ValueError("angle list is empty")
    for a in angles:
        TiltQuery(a, timesteps)

    keys, tasks, skipped = [], [], []
    for rec in records:
        for i, c in enumerate(rec.containers):
            try:
                model = models[c.cad_id]
            except KeyError:
                raise UnresolvedCadId(f"cad_id {c.cad_id!r} (image {rec.image_id!r}) not found", rule="cad-id") from None
            if not c.upright:
                skipped.append({"image_id": rec.image_id, "container_index": i, "reason": "not upright"})
                continue
            keys.append((rec.image_id, i))
            tasks.append((model, c.volume_ml, c.content, angles, timesteps))

    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pour_one, tasks))
    else:
        results = [_pour_one(t) for t in tasks]

    rows = [GroundtruthRow(image_id, i, a, seq)
            for (image_id, i), seqs in zip(keys, results) for a, seq in zip(angles, seqs)]
    rows.sort(key=lambda r: (r.image_id, r.container_index, r.angle_deg))
    return rows, skipped


def dumps_groundtruth(rows) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rows)


def read_jsonl(path) -> list[dict]:
    out = []
    for lineno, raw in _iter_lines(path):
        try:
            out.append(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), lineno, "json") from None
    return out


def sequence_from_row(row: dict) -> PourSequence:
    return PourSequence(tuple(FractionClass.from_label(s) for s in row["sequence"]))

