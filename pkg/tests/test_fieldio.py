import json

import numpy as np
import pytest

from amlab.errors import HeaderSizeMismatchError, MagicError, NonFinitePayloadError, PayloadSizeError
from amlab.fieldio import MAGIC, decode_field, encode_field, read_field, write_field
from amlab.grid import Grid3, ScalarField, SpinorField, VectorField


def _spinor(n=16, seed=0):
    g = Grid3((n, n, n), (0.5, 0.25, 1.0), (-1.0, 2.0, 0.5))
    rng = np.random.default_rng(seed)
    return SpinorField(g, rng.normal(size=(4,) + g.shape) + 1j * rng.normal(size=(4,) + g.shape))


def test_roundtrip_bits(tmp_path):
    psi = _spinor()
    path = tmp_path / "psi.amf"
    write_field(psi, path)
    back = read_field(path)
    assert back.grid == psi.grid
    assert back.data.tobytes() == psi.data.tobytes()


def test_storage_order_x_fastest():
    g = Grid3((8, 9, 10), (1, 1, 1))
    data = np.arange(3 * 8 * 9 * 10, dtype=float).reshape(3, 8, 9, 10)
    blob = encode_field(VectorField(g, data))
    head_end = blob.index(b"\x00", len(MAGIC))
    raw = np.frombuffer(blob[head_end + 1:], dtype="<f8")
    assert raw[0] == data[0, 0, 0, 0] and raw[1] == data[0, 1, 0, 0]
    assert raw[8] == data[0, 0, 1, 0] and raw[8 * 9 * 10] == data[1, 0, 0, 0]


def _retag(blob, **changes):
    head_end = blob.index(b"\x00", len(MAGIC))
    header = json.loads(blob[len(MAGIC):head_end])
    header.update(changes)
    return MAGIC + json.dumps(header).encode() + blob[head_end:]


def test_kind_payload_mismatch():
    g = Grid3((8, 8, 8), (1, 1, 1))
    blob = encode_field(VectorField(g, np.zeros((3, 8, 8, 8))))
    with pytest.raises(HeaderSizeMismatchError):
        decode_field(_retag(blob, kind="scalar_real", components=1))


def test_truncated_payload():
    blob = encode_field(_spinor(8))
    with pytest.raises(PayloadSizeError):
        decode_field(blob[:-8])


def test_bad_magic_and_nonfinite():
    g = Grid3((8, 8, 8), (1, 1, 1))
    blob = encode_field(ScalarField(g, np.zeros((8, 8, 8))))
    with pytest.raises(MagicError):
        decode_field(b"AMF2\n" + blob[5:])
    bad = bytearray(blob)
    bad[-8:] = np.array([np.nan], "<f8").tobytes()
    with pytest.raises(NonFinitePayloadError):
        decode_field(bytes(bad))


def test_error_classes_distinct():
    assert len({MagicError, HeaderSizeMismatchError, PayloadSizeError, NonFinitePayloadError}) == 4
