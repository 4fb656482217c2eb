"""AMF1 field files.

Layout: ``b"AMF1\\n"``, a UTF-8 JSON header, one ``0x00`` byte, then the raw
little-endian float64 payload.  The payload runs component slowest, then z,
then y, with x fastest; complex values are stored as (re, im) pairs.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .errors import (
    HeaderSizeMismatchError,
    MagicError,
    NonFinitePayloadError,
    PayloadSizeError,
    FieldFileError,
)
from .grid import FIELD_KINDS, Field, Grid3

MAGIC = b"AMF1\n"


def _to_storage(field: Field) -> np.ndarray:
    data = field.data
    if field.ncomp == 1:
        data = data[None]
    # [c, x, y, z] -> [c, z, y, x] so that x runs fastest in C order
    data = np.ascontiguousarray(data.transpose(0, 3, 2, 1))
    if field.complex_valued:
        data = np.ascontiguousarray(data).view(np.float64)
    return data.astype("<f8", copy=False)


def encode_field(field: Field) -> bytes:
    header = {
        "n": list(field.grid.n),
        "h": list(field.grid.h),
        "origin": list(field.grid.origin),
        "kind": field.kind,
        "components": field.ncomp,
    }
    head = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return MAGIC + head + b"\x00" + _to_storage(field).tobytes()


def write_field(field: Field, path) -> None:
    field.check_finite()
    blob = encode_field(field)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def decode_field(blob: bytes) -> Field:
    if not blob.startswith(MAGIC):
        raise MagicError(f"not an AMF1 file (magic {blob[:5]!r})")
    end = blob.find(b"\x00", len(MAGIC))
    if end < 0:
        raise FieldFileError("header terminator not found")
    try:
        header = json.loads(blob[len(MAGIC):end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldFileError(f"malformed header: {exc}") from exc

    kind = header.get("kind")
    if kind not in FIELD_KINDS:
        raise FieldFileError(f"unknown field kind {kind!r}")
    cls = FIELD_KINDS[kind]
    grid = Grid3(tuple(header["n"]), tuple(header["h"]), tuple(header["origin"]))
    if int(header.get("components", -1)) != cls.ncomp:
        raise HeaderSizeMismatchError(
            f"kind {kind} has {cls.ncomp} components, header says {header.get('components')}"
        )

    payload = memoryview(blob)[end + 1:]
    per_value = 2 if cls.complex_valued else 1
    expected = grid.size * cls.ncomp * per_value
    if len(payload) % 8:
        raise PayloadSizeError(f"payload of {len(payload)} bytes is not a whole number of float64")
    got = len(payload) // 8
    if got != expected:
        # a payload sized exactly for another kind means the header kind is wrong
        other_sizes = {grid.size * c.ncomp * (2 if c.complex_valued else 1) for c in FIELD_KINDS.values()}
        if got in other_sizes:
            raise HeaderSizeMismatchError(
                f"header kind {kind} implies {expected} values, payload holds {got}"
            )
        raise PayloadSizeError(f"payload holds {got} float64 values, expected {expected}")

    raw = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.isfinite(raw).all():
        bad = int(np.argmax(~np.isfinite(raw)))
        raise NonFinitePayloadError(f"non-finite value at payload offset {bad}")
    nx, ny, nz = grid.n
    if cls.complex_valued:
        raw = raw.view(np.complex128)
    data = raw.reshape(cls.ncomp, nz, ny, nx).transpose(0, 3, 2, 1)
    if cls.ncomp == 1:
        data = data[0]
    return cls(grid, np.ascontiguousarray(data))


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        return decode_field(fh.read())
