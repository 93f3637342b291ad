import struct

import numpy as np
import pytest

from fftu.io import MAGIC, SignalFormatError, generate_input, read_signal, write_signal


def test_generator_deterministic():
    a = generate_input((8, 4), 123)
    b = generate_input((8, 4), 123)
    assert a.dtype == np.complex128 and a.shape == (8, 4)
    assert np.array_equal(a, b)


def test_generator_seed_changes_values():
    assert generate_input((4,), 1)[0] != generate_input((4,), 2)[0]


def test_generator_range():
    x = generate_input((4096,), 5)
    assert np.all(np.abs(x.real) <= 1) and np.all(np.abs(x.imag) <= 1)
    assert x.real.min() < -0.9 and x.imag.max() > 0.9


def test_generator_published_vector():
    # numpy PCG64, seed 0, uniform(-1, 1) pairs (re, im)
    x = generate_input((2,), 0)
    assert x[0] == complex(float.fromhex("0x1.187f5e7ece140p-2"), float.fromhex("-0x1.d77a103be9318p-2"))
    assert x[1] == complex(float.fromhex("-0x1.d60b095ac4c86p-1"), float.fromhex("-0x1.ef136127b2f44p-1"))


def test_generator_accepts_negative_and_large_seeds():
    assert np.array_equal(generate_input((3,), -1), generate_input((3,), 2**64 - 1))


@pytest.mark.parametrize("shape", [(1,), (4,), (3, 5), (2, 1, 4, 2)])
def test_roundtrip_bit_exact(tmp_path, shape):
    x = generate_input(shape, 7)
    x[0] = complex(np.nan, -0.0)
    path = tmp_path / "x.fftu"
    write_signal(path, x)
    y = read_signal(path)
    assert y.shape == shape
    assert x.view(np.uint8).tobytes() == y.view(np.uint8).tobytes()


def test_layout(tmp_path):
    path = tmp_path / "x.fftu"
    write_signal(path, np.array([[1 + 2j, 3 - 4j]]))
    data = path.read_bytes()
    assert data[:4] == MAGIC
    assert struct.unpack_from("<IIQQ", data, 4) == (1, 2, 1, 2)
    assert struct.unpack_from("<4d", data, 28) == (1.0, 2.0, 3.0, -4.0)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.fftu"
    write_signal(path, np.ones(4))
    data = bytearray(path.read_bytes())
    data[:4] = b"XFFT"
    path.write_bytes(bytes(data))
    with pytest.raises(SignalFormatError) as err:
        read_signal(path)
    assert err.value.offset == 0


def test_truncated_payload(tmp_path):
    path = tmp_path / "x.fftu"
    write_signal(path, np.ones(4))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(SignalFormatError, match="payload") as err:
        read_signal(path)
    assert err.value.offset == 20


def test_bad_version_and_truncated_header(tmp_path):
    path = tmp_path / "x.fftu"
    path.write_bytes(MAGIC + struct.pack("<II", 9, 1))
    with pytest.raises(SignalFormatError, match="version") as err:
        read_signal(path)
    assert err.value.offset == 4
    path.write_bytes(MAGIC + b"\x01")
    with pytest.raises(SignalFormatError, match="truncated"):
        read_signal(path)
