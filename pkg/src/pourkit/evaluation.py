"""Metrics, the weighted sequence cross-entropy and trivial baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .labels import MAX_SEQUENCE_LENGTH, N_FRACTION_CLASSES, VOLUME_BIN_MIDPOINTS, FractionClass, volume_bin
from .pouring import pad_sequence

LOG_FLOOR = 1e-12
SIMPLEX_TOL = 1e-9


class EmptyMatrix(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class EmptyTrainingSet(ValueError):
    pass


class BadDistribution(ValueError):
    pass


class DegenerateFeatures(ValueError):
    pass


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """Rows are groundtruth classes, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")
        self.counts = c.astype(np.int64)

    @classmethod
    def from_labels(cls, gt, pred, n_classes: int) -> "ConfusionMatrix":
        gt = np.asarray(gt, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if gt.shape != pred.shape:
            raise LengthMismatch(f"{len(gt)} groundtruth labels vs {len(pred)} predictions")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (gt, pred), 1)
        return cls(counts)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def per_class_accuracy(self) -> np.ndarray:
        """Recall per class in percent; NaN for classes without support."""
        support = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(support > 0, 100.0 * np.diag(self.counts) / support, np.nan)


def avg_per_class_accuracy(cm) -> float:
    """Mean recall over classes that occur in the groundtruth, in percent."""
    if not isinstance(cm, ConfusionMatrix):
        cm = ConfusionMatrix(np.asarray(cm))
    if cm.counts.sum() == 0:
        raise EmptyMatrix("confusion matrix has no samples")
    acc = cm.per_class_accuracy()
    return float(np.nanmean(acc))


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


def edit_distance(a, b) -> int:
    """Levenshtein distance with unit insert, delete and substitute costs."""
    a = tuple(a)
    b = tuple(b)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def sequence_accuracy_at(preds, gts, k: int) -> float:
    """Percentage of pairs whose edit distance is at most ``k``."""
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} groundtruth sequences")
    if not gts:
        raise LengthMismatch("no sequences to score")
    hits = sum(edit_distance(p, g) <= k for p, g in zip(preds, gts))
    return 100.0 * hits / len(gts)


def sequence_accuracy_table(preds, gts, max_k: int = 4) -> dict[int, float]:
    """Accuracy at edit distance 0..max_k; column 0 is the exact-match rate."""
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} groundtruth sequences")
    if not gts:
        raise LengthMismatch("no sequences to score")
    d = np.array([edit_distance(p, g) for p, g in zip(preds, gts)])
    return {k: float(100.0 * (d <= k).mean()) for k in range(max_k + 1)}


# ---------------------------------------------------------------------------
# weighted sequence cross-entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightTable:
    """Per-step class weights; ``steps[t][cls]`` for ``t = 0..T-1``."""

    steps: tuple

    def __post_init__(self):
        steps = tuple({FractionClass(int(k)): float(v) for k, v in s.items()} for s in self.steps)
        for t, s in enumerate(steps):
            bad = [k for k, v in s.items() if not v > 0]
            if bad:
                raise ValueError(f"non-positive weight at step {t} for {bad}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def uniform(cls, length: int = MAX_SEQUENCE_LENGTH) -> "WeightTable":
        return cls(tuple({c: 1.0 for c in FractionClass} for _ in range(length)))

    def __len__(self):
        return len(self.steps)

    def weight(self, t: int, cls) -> float:
        return self.steps[t][FractionClass(int(cls))]

    def to_dict(self):
        return [{FractionClass(k).label: v for k, v in sorted(s.items())} for s in self.steps]


def class_weights(training_sequences, length: int = MAX_SEQUENCE_LENGTH) -> WeightTable:
    """Inverse-frequency weights per step: total count over class count.

    Sequences are padded with their last element first. Classes never seen at
    a step get that step's largest observed weight.
    """
    padded = [pad_sequence([FractionClass.from_label(e) for e in s], length) for s in training_sequences]
    if not padded:
        raise EmptyTrainingSet("no training sequences")
    steps = []
    for t in range(length):
        counts = np.bincount([int(s[t]) for s in padded], minlength=N_FRACTION_CLASSES)
        total = counts.sum()
        seen = counts > 0
        w = np.empty(N_FRACTION_CLASSES)
        w[seen] = total / counts[seen]
        w[~seen] = w[seen].max()
        steps.append({FractionClass(c): float(w[c]) for c in range(N_FRACTION_CLASSES)})
    return WeightTable(tuple(steps))


@dataclass(frozen=True)
class LossReport:
    value: float
    clamped: bool = False

    def __float__(self):
        return self.value


def _check_distribution(p, t):
    p = np.asarray(p, dtype=float)
    if p.shape != (N_FRACTION_CLASSES,):
        raise BadDistribution(f"step {t}: expected {N_FRACTION_CLASSES} probabilities, got shape {p.shape}")
    if (p < 0).any() or not np.isfinite(p).all() or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise BadDistribution(f"step {t}: not a probability distribution (sum {p.sum():.12g})")
    return p


def sequence_loss(gt, pred, weights: WeightTable | None = None, length: int | None = None) -> LossReport:
    """Weighted cross-entropy averaged over ``length`` steps.

    ``gt`` and ``pred`` are padded with their last element to ``length``
    (default: the weight table's length). Zero probabilities on the target
    are floored at ``LOG_FLOOR`` and the report is flagged.
    """
    if weights is None:
        weights = WeightTable.uniform(length or MAX_SEQUENCE_LENGTH)
    T = length or len(weights)
    if len(weights) < T:
        raise ValueError(f"weight table covers {len(weights)} steps, need {T}")
    gt = [FractionClass.from_label(s) for s in gt]
    pred = list(pred)
    if len(gt) > T or len(pred) > T:
        raise LengthMismatch(f"sequences longer than {T} steps")
    gt = pad_sequence(gt, T)
    pred = pad_sequence([_check_distribution(p, t) for t, p in enumerate(pred)], T)
    total = 0.0
    clamped = False
    for t in range(T):
        p = pred[t][int(gt[t])]
        if p < LOG_FLOOR:
            p = LOG_FLOOR
            clamped = True
        total += weights.weight(t, gt[t]) * math.log(p)
    return LossReport(-total / T, clamped)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def chance_baseline(n_classes: int, n: int, seed: int = 0) -> np.ndarray:
    """Uniformly random class indices, reproducible from ``seed``."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    return np.random.default_rng(seed).integers(0, n_classes, size=n)


@dataclass
class BoxRegression:
    """Least squares from normalised box width and height to volume in mL."""

    coef: np.ndarray

    @staticmethod
    def design(features) -> np.ndarray:
        X = np.asarray(features, dtype=float).reshape(-1, 2)
        return np.column_stack([X, np.ones(len(X))])

    def predict_volume(self, features) -> np.ndarray:
        return self.design(features) @ self.coef

    def predict(self, features) -> np.ndarray:
        """Volume-bin index per sample; non-positive volumes land in bin 0."""
        vols = self.predict_volume(features)
        return np.array([volume_bin(v) if v > 0 else 0 for v in vols], dtype=np.int64)


def box_regression_baseline(features, labels) -> BoxRegression:
    """Fit ``(w / W, h / H, 1)`` against the midpoint volume of each label's bin."""
    X = BoxRegression.design(features)
    y = np.asarray([VOLUME_BIN_MIDPOINTS[int(b)] for b in labels], dtype=float)
    if len(X) != len(y):
        raise LengthMismatch(f"{len(X)} feature rows vs {len(y)} labels")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateFeatures("box features are collinear; normal equations are singular")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return BoxRegression(coef)
