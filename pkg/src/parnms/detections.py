"""Detection data model, validation, and CSV/JSON file I/O.

A detection is a square candidate window ``(x, y, z, s)``: top-left corner
in pixels, side length ``z`` (width equals height), and a confidence score
``s``. Detection sets are carried in fixed-capacity vectors padded with
zero slots so the suppression engine can run over a constant-size buffer.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

# Coordinates are capped so that edge sums and intersection areas stay
# exact in int64 and float64 alike (all products remain far below 2**53).
COORD_LIMIT = 2**24

_CSV_HEADER = ["x", "y", "z", "s"]


class DetectionError(ValueError):
    """Base class for detection ingest failures."""


class ParseError(DetectionError):
    """A record could not be decoded into the four detection fields."""


class ValidationError(DetectionError):
    """A decoded record violates the detection invariants."""


class CapacityError(DetectionError):
    """More detections than the configured vector capacity."""


@dataclass(frozen=True, slots=True)
class Detection:
    """One candidate window: top-left corner, side length, confidence.

    A valid detection has ``z >= 1`` and ``s > 0``; the all-zero tuple is
    the padding slot used to fill unused vector capacity.
    """

    x: int
    y: int
    z: int
    s: float

    @property
    def is_padding(self) -> bool:
        return self.z == 0 and self.s == 0

    def validate(self) -> "Detection":
        """Check the valid-detection invariants, returning self.

        Raises:
            ValidationError: on non-positive score, zero or negative side
                length, negative corner, non-finite score, or coordinates
                large enough to make edge arithmetic inexact.
        """
        for name, value in (("x", self.x), ("y", self.y), ("z", self.z)):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise ValidationError(f"{name} must be non-negative, got {value}")
            if value >= COORD_LIMIT:
                raise ValidationError(
                    f"{name}={value} exceeds the coordinate limit {COORD_LIMIT}"
                )
        if self.z < 1:
            raise ValidationError(f"side length must be >= 1, got {self.z}")
        if not isinstance(self.s, (int, float, np.floating)) or isinstance(self.s, bool):
            raise ValidationError(f"score must be a number, got {self.s!r}")
        if not math.isfinite(self.s):
            raise ValidationError(f"score must be finite, got {self.s}")
        if self.s <= 0:
            raise ValidationError(f"score must be strictly positive, got {self.s}")
        return self


PADDING = Detection(0, 0, 0, 0.0)


class DetectionVector:
    """Fixed-capacity detection buffer padded with zero slots.

    Valid detections occupy the leading ``count`` slots in input order;
    the remaining capacity is zero-filled padding. Coordinates are held
    as read-only int64 column arrays and scores as float64 so the engine
    can consume them directly; iteration yields ``Detection`` values for
    the valid prefix.
    """

    __slots__ = ("_x", "_y", "_z", "_s", "count")

    def __init__(
        self,
        detections: Iterable[Detection],
        d_max: int | None = None,
        *,
        validate: bool = True,
    ):
        dets = list(detections)
        if d_max is None:
            d_max = len(dets)
        if d_max < 0:
            raise ValueError(f"d_max must be non-negative, got {d_max}")
        if len(dets) > d_max:
            raise CapacityError(f"{len(dets)} detections exceed capacity d_max={d_max}")
        if validate:
            for det in dets:
                det.validate()
        self.count = len(dets)
        self._x = np.zeros(d_max, dtype=np.int64)
        self._y = np.zeros(d_max, dtype=np.int64)
        self._z = np.zeros(d_max, dtype=np.int64)
        self._s = np.zeros(d_max, dtype=np.float64)
        for i, det in enumerate(dets):
            self._x[i] = det.x
            self._y[i] = det.y
            self._z[i] = det.z
            self._s[i] = det.s
        for arr in (self._x, self._y, self._z, self._s):
            arr.setflags(write=False)

    @property
    def d_max(self) -> int:
        return self._x.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self._x

    @property
    def ys(self) -> np.ndarray:
        return self._y

    @property
    def zs(self) -> np.ndarray:
        return self._z

    @property
    def ss(self) -> np.ndarray:
        return self._s

    def slot(self, i: int) -> Detection:
        """Detection at slot ``i`` (padding slots included)."""
        return Detection(int(self._x[i]), int(self._y[i]), int(self._z[i]), float(self._s[i]))

    def valid(self) -> list[Detection]:
        """The valid prefix as a list of detections, in input order."""
        return [self.slot(i) for i in range(self.count)]

    def repadded(self, d_max: int) -> "DetectionVector":
        """Same detections in a vector of a different capacity."""
        return DetectionVector(self.valid(), d_max, validate=False)

    def __len__(self) -> int:
        return self.d_max

    def __iter__(self) -> Iterator[Detection]:
        return iter(self.valid())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DetectionVector):
            return NotImplemented
        return (
            self.d_max == other.d_max
            and self.count == other.count
            and bool(np.array_equal(self._x, other._x))
            and bool(np.array_equal(self._y, other._y))
            and bool(np.array_equal(self._z, other._z))
            and bool(np.array_equal(self._s, other._s))
        )

    def __repr__(self) -> str:
        return f"DetectionVector(count={self.count}, d_max={self.d_max})"


@dataclass(frozen=True)
class NmsResult:
    """Cluster representatives in input order plus the suppressed tally."""

    survivors: tuple[Detection, ...]
    suppressed_count: int


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unsupported format {fmt!r}")
        return fmt
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("csv", "json"):
        return suffix
    raise ValueError(f"cannot infer format from {path.name!r}; pass format='csv' or 'json'")


def _coerce_coord(value: object, field: str, where: str) -> int:
    if isinstance(value, bool):
        raise ParseError(f"{where}: field {field!r} must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ParseError(f"{where}: field {field!r} must be an integer, got {value!r}")


def _coerce_score(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: field 's' must be a number, got {value!r}")
    return float(value)


def _read_csv(path: Path) -> list[Detection]:
    dets = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return dets
        if [col.strip() for col in header] != _CSV_HEADER:
            raise ParseError(f"{path}: expected header 'x,y,z,s', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                x, y, z = (int(v) for v in row[:3])
                s = float(row[3])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            dets.append(Detection(x, y, z, s))
    return dets


def _read_json(path: Path) -> list[Detection]:
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise ParseError(f"{path}: expected a top-level array of detection objects")
    dets = []
    for idx, record in enumerate(payload):
        where = f"{path}[{idx}]"
        if not isinstance(record, dict):
            raise ParseError(f"{where}: expected an object with keys x, y, z, s")
        missing = [key for key in _CSV_HEADER if key not in record]
        if missing:
            raise ParseError(f"{where}: missing keys {missing}")
        dets.append(
            Detection(
                _coerce_coord(record["x"], "x", where),
                _coerce_coord(record["y"], "y", where),
                _coerce_coord(record["z"], "z", where),
                _coerce_score(record["s"], where),
            )
        )
    return dets


def load_detections(
    path: str | Path, d_max: int, format: str | None = None
) -> DetectionVector:
    """Load a detection file into a vector of capacity ``d_max``.

    Args:
        path: CSV file with header ``x,y,z,s`` or JSON array of objects
            with those four keys.
        d_max: vector capacity; the file is padded up to it.
        format: "csv" or "json"; inferred from the suffix when omitted.

    Raises:
        ParseError: malformed record or header.
        ValidationError: a record violating the detection invariants;
            no record is ever silently coerced.
        CapacityError: more records than ``d_max``.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    dets = _read_csv(path) if fmt == "csv" else _read_json(path)
    return DetectionVector(dets, d_max)


def store_detections(
    detections: Sequence[Detection], path: str | Path, format: str | None = None
) -> None:
    """Write detections to CSV or JSON; scores round-trip exactly."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(_CSV_HEADER)
            for det in detections:
                writer.writerow([det.x, det.y, det.z, repr(float(det.s))])
    else:
        payload = [{"x": det.x, "y": det.y, "z": det.z, "s": float(det.s)} for det in detections]
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")


def store_result(result: NmsResult, path: str | Path, format: str | None = None) -> None:
    """Write a result's survivors; reloading reproduces them in order."""
    store_detections(result.survivors, path, format)
