"""Core tensor containers and the bit-exact file formats of the toolkit.

RDT1 binary container layout (all integers little-endian):

    bytes 0..3    magic ``RDT1``
    bytes 4..7    dtype tag, 4 ASCII bytes: ``c64 `` (complex, two
                  little-endian float32 re/im per value) or ``f32 ``
    byte  8       ndim (u8), 1 <= ndim <= 5
    next 4*ndim   dims as u32
    rest          payload, row-major little-endian values

Annotations are stored as JSON lines, one record per line:

    {"frame_id": str, "source": "auto"|"human"|"model",
     "boxes3d": [{"center": [r, a, d], "size": [w, h, dp],
                  "class": int|null, "score": float|null}, ...],
     "boxes2d": [{"center": [x, z], "size": [w, l],
                  "class": int|null, "score": float|null}, ...]}

boxes3d are in RAD bin coordinates, boxes2d in meters. Unknown record-level
keys are preserved verbatim on rewrite. All types here are immutable after
construction and safe to share across threads; concurrent reads of one path
are safe, writers need exclusive access to the path.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .geometry import (AZIMUTH_BINS, Box2D, Box3D, DOPPLER_BINS, RANGE_BINS)

MAGIC = b"RDT1"
_DTYPE_TAGS = {"c64": b"c64 ", "f32": b"f32 "}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}
_NP_DTYPES = {"c64": np.complex64, "f32": np.float32}

ADC_SHAPE = (256, 8, 64)
RAD_SHAPE = (RANGE_BINS, AZIMUTH_BINS, DOPPLER_BINS)

DEFAULT_CLASSES = ("person", "bicycle", "car", "motorcycle", "bus", "truck")

RAD_STAGES = ("complex", "log_magnitude", "normalized")

SOURCES = ("auto", "human", "model")


class TensorFormatError(Exception):
    """Raised for malformed RDT1 files or inconsistent container contents."""


class AnnotationError(Exception):
    """Raised for malformed annotation files or invariant violations."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class TensorContainer:
    """In-memory form of an RDT1 file: a dtype tag plus an ndarray."""

    dtype: str
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in _NP_DTYPES:
            raise TensorFormatError(f"unsupported dtype {self.dtype!r}")
        if not (1 <= self.data.ndim <= 5):
            raise TensorFormatError(f"ndim {self.data.ndim} outside [1, 5]")
        want = _NP_DTYPES[self.dtype]
        if self.data.dtype != want:
            raise TensorFormatError(
                f"array dtype {self.data.dtype} does not match tag {self.dtype!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape


def _as_container(tensor) -> TensorContainer:
    if isinstance(tensor, TensorContainer):
        return tensor
    arr = np.asarray(tensor)
    if np.iscomplexobj(arr):
        return TensorContainer("c64", np.ascontiguousarray(arr, dtype=np.complex64))
    return TensorContainer("f32", np.ascontiguousarray(arr, dtype=np.float32))


def write_tensor(path, tensor) -> None:
    """Write a TensorContainer (or ndarray, converted to c64/f32) as RDT1."""
    t = _as_container(tensor)
    dims = t.dims
    payload = np.ascontiguousarray(t.data)
    if payload.size != int(np.prod(dims)):
        raise TensorFormatError("payload length inconsistent with dims")
    header = MAGIC + _DTYPE_TAGS[t.dtype] + struct.pack("<B", len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    # complex64 is stored as interleaved little-endian float32 (re, im),
    # which is exactly numpy's memory layout after byte-order normalization.
    if payload.dtype.byteorder == ">":
        payload = payload.astype(payload.dtype.newbyteorder("<"))
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())


def read_tensor(path) -> TensorContainer:
    """Read an RDT1 file, validating magic, dims and payload length."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise TensorFormatError(f"bad magic in {path}")
    if len(blob) < 9:
        raise TensorFormatError(f"truncated header in {path}")
    tag = blob[4:8]
    if tag not in _TAG_DTYPES:
        raise TensorFormatError(f"unknown dtype tag {tag!r} in {path}")
    dtype = _TAG_DTYPES[tag]
    ndim = blob[8]
    if not (1 <= ndim <= 5):
        raise TensorFormatError(f"ndim {ndim} outside [1, 5]")
    dims_end = 9 + 4 * ndim
    if len(blob) < dims_end:
        raise TensorFormatError(f"truncated dims in {path}")
    dims = struct.unpack(f"<{ndim}I", blob[9:dims_end])
    n_values = int(np.prod(dims))
    itemsize = np.dtype(_NP_DTYPES[dtype]).itemsize
    expected = dims_end + n_values * itemsize
    if len(blob) < expected:
        raise TensorFormatError(
            f"truncated payload in {path}: have {len(blob) - dims_end} bytes, "
            f"need {n_values * itemsize}")
    if len(blob) > expected:
        raise TensorFormatError(f"trailing bytes after payload in {path}")
    data = np.frombuffer(blob, dtype=_NP_DTYPES[dtype], count=n_values,
                         offset=dims_end).reshape(dims)
    return TensorContainer(dtype, data)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr)
    if out.flags.writeable and out.flags.owndata:
        out.flags.writeable = False
    return out


@dataclass(frozen=True)
class AdcCube:
    """Raw complex ADC samples, shape (range samples, antennas, chirps)."""

    data: np.ndarray
    shape_override: tuple[int, int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        want = self.shape_override or ADC_SHAPE
        if self.data.shape != want:
            raise ValueError(f"ADC cube shape {self.data.shape}, expected {want}")
        if not np.iscomplexobj(self.data):
            raise ValueError("ADC cube must be complex")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("ADC cube contains non-finite values")


@dataclass(frozen=True)
class RadCube:
    """Range-azimuth-doppler tensor, shape (256, 256, 64).

    ``stage`` tracks the processing state and may only advance
    complex -> log_magnitude -> normalized.
    """

    data: np.ndarray
    stage: str = "complex"

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if self.stage not in RAD_STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.data.shape != RAD_SHAPE:
            raise ValueError(f"RAD shape {self.data.shape}, expected {RAD_SHAPE}")
        if self.stage == "complex":
            if not np.iscomplexobj(self.data):
                raise ValueError("complex stage requires a complex tensor")
        elif np.iscomplexobj(self.data):
            raise ValueError(f"stage {self.stage} requires a real tensor")


@dataclass(frozen=True)
class NormalizationStats:
    """Population mean/variance of log-magnitude cells over a whole dataset."""

    v_mean: float
    v_variance: float
    n_cells_seen: int

    def __post_init__(self):
        if self.v_variance <= 0:
            raise ValueError("variance must be positive (degenerate dataset)")

    def to_json(self) -> dict:
        return {"v_mean": self.v_mean, "v_variance": self.v_variance,
                "n_cells_seen": self.n_cells_seen}

    @classmethod
    def from_json(cls, obj: dict) -> "NormalizationStats":
        return cls(float(obj["v_mean"]), float(obj["v_variance"]),
                   int(obj["n_cells_seen"]))


@dataclass(frozen=True)
class AnnotationRecord:
    """Per-frame boxes with provenance; one JSON object per file line."""

    frame_id: str
    boxes3d: tuple[Box3D, ...] = ()
    boxes2d: tuple[Box2D, ...] = ()
    source: str = "auto"
    class_names: tuple[str, ...] = DEFAULT_CLASSES
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "boxes3d", tuple(self.boxes3d))
        object.__setattr__(self, "boxes2d", tuple(self.boxes2d))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.source not in SOURCES:
            raise AnnotationError(f"unknown source {self.source!r}")
        n = len(self.class_names)
        for box in list(self.boxes3d) + list(self.boxes2d):
            if box.class_id is not None and not (0 <= box.class_id < n):
                raise AnnotationError(
                    f"class index {box.class_id} outside class list of length {n}")


def _box3d_to_json(b: Box3D) -> dict:
    return {"center": list(b.center), "size": list(b.size),
            "class": b.class_id, "score": b.score}


def _box2d_to_json(b: Box2D) -> dict:
    return {"center": list(b.center), "size": list(b.size),
            "class": b.class_id, "score": b.score}


def _box3d_from_json(obj: dict, line: int | None) -> Box3D:
    try:
        return Box3D(tuple(float(v) for v in obj["center"]),
                     tuple(float(v) for v in obj["size"]),
                     None if obj.get("class") is None else int(obj["class"]),
                     None if obj.get("score") is None else float(obj["score"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise AnnotationError(f"invalid 3D box: {exc}", line) from exc


def _box2d_from_json(obj: dict, line: int | None) -> Box2D:
    try:
        return Box2D(tuple(float(v) for v in obj["center"]),
                     tuple(float(v) for v in obj["size"]),
                     None if obj.get("class") is None else int(obj["class"]),
                     None if obj.get("score") is None else float(obj["score"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise AnnotationError(f"invalid 2D box: {exc}", line) from exc


_KNOWN_KEYS = {"frame_id", "source", "boxes3d", "boxes2d", "class_names"}


def record_to_json(rec: AnnotationRecord) -> dict:
    obj = dict(rec.extras)
    obj.update({
        "frame_id": rec.frame_id,
        "source": rec.source,
        "boxes3d": [_box3d_to_json(b) for b in rec.boxes3d],
        "boxes2d": [_box2d_to_json(b) for b in rec.boxes2d],
        "class_names": list(rec.class_names),
    })
    return obj


def record_from_json(obj: dict, line: int | None = None,
                     class_names: Iterable[str] = DEFAULT_CLASSES) -> AnnotationRecord:
    if "frame_id" not in obj:
        raise AnnotationError("missing frame_id", line)
    names = tuple(obj.get("class_names", class_names))
    extras = {k: v for k, v in obj.items() if k not in _KNOWN_KEYS}
    try:
        return AnnotationRecord(
            frame_id=str(obj["frame_id"]),
            boxes3d=tuple(_box3d_from_json(b, line) for b in obj.get("boxes3d", [])),
            boxes2d=tuple(_box2d_from_json(b, line) for b in obj.get("boxes2d", [])),
            source=obj.get("source", "auto"),
            class_names=names,
            extras=extras,
        )
    except AnnotationError:
        raise
    except ValueError as exc:
        raise AnnotationError(str(exc), line) from exc


def read_annotations(path, class_names: Iterable[str] = DEFAULT_CLASSES) -> list[AnnotationRecord]:
    """Read a JSON-lines annotation file; errors report the failing line."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"malformed JSON: {exc.msg}", lineno) from exc
            records.append(record_from_json(obj, lineno, class_names))
    return records


def write_annotations(path, records: Iterable[AnnotationRecord]) -> None:
    """Write records as JSON lines, one object per line, UTF-8."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(record_to_json(rec), separators=(",", ":")))
            f.write("\n")
