"""Label alphabets shared by the simulator, the dataset and the metrics."""
from __future__ import annotations

import math
from enum import Enum, IntEnum

#: upper bin edges in mL, inclusive; the last bin is unbounded
VOLUME_BIN_EDGES = (50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0, 2000.0, 3000.0, math.inf)
#: regression targets for the box baseline; the open last bin uses 4000 mL
VOLUME_BIN_MIDPOINTS = (25.0, 75.0, 150.0, 250.0, 400.0, 625.0, 875.0, 1500.0, 2500.0, 4000.0)

MAX_SEQUENCE_LENGTH = 5


class FractionClass(IntEnum):
    """Eleven tenths of fullness plus an opaque marker, indexed 0..11."""

    R0 = 0
    R1 = 1
    R2 = 2
    R3 = 3
    R4 = 4
    R5 = 5
    R6 = 6
    R7 = 7
    R8 = 8
    R9 = 9
    R10 = 10
    OPAQUE = 11

    @property
    def fraction(self) -> float | None:
        return None if self is FractionClass.OPAQUE else self.value / 10.0

    @property
    def label(self) -> str:
        return "opaque" if self is FractionClass.OPAQUE else f"{self.value / 10.0:.1f}"

    @classmethod
    def from_label(cls, text) -> "FractionClass":
        if isinstance(text, FractionClass):
            return text
        s = str(text).strip().lower()
        if s in ("opaque", "p"):
            return cls.OPAQUE
        x = float(s)
        k = round(x * 10.0)
        if not 0 <= k <= 10 or abs(x * 10.0 - k) > 1e-9:
            raise ValueError(f"not a tenth in [0, 1]: {text!r}")
        return cls(k)

    @classmethod
    def snap(cls, fraction: float) -> "FractionClass":
        """Closest tenth; exact ties go to the larger tenth."""
        k = math.floor(fraction * 10.0 + 0.5 + 1e-9)
        return cls(min(10, max(0, k)))


N_FRACTION_CLASSES = len(FractionClass)


class ContentClass(str, Enum):
    EMPTY = "0"
    THIRD = "33"
    HALF = "50"
    TWO_THIRDS = "66"
    FULL = "100"
    OPAQUE = "opaque"

    @property
    def fraction(self) -> float | None:
        return None if self is ContentClass.OPAQUE else int(self.value) / 100.0

    @property
    def index(self) -> int:
        return list(ContentClass).index(self)


class ComparativeLabel(str, Enum):
    YES = "yes"
    NO = "no"
    CANT_TELL = "cant_tell"

    @property
    def index(self) -> int:
        return list(ComparativeLabel).index(self)


class NonPositiveVolume(ValueError):
    pass


def volume_bin(volume_ml: float) -> int:
    """Index of the smallest bin whose inclusive upper edge holds ``volume_ml``."""
    if not volume_ml > 0:
        raise NonPositiveVolume(f"volume must be positive, got {volume_ml!r}")
    for i, edge in enumerate(VOLUME_BIN_EDGES):
        if volume_ml <= edge:
            return i
    raise AssertionError("unreachable: last edge is infinite")
