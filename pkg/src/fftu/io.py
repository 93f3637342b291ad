"""Signal generation and the binary signal file format.

File layout, all little-endian::

    b"FFTU"           magic
    u32               format version (1)
    u32               number of dimensions d
    u64 * d           dimensions, outermost first
    f64 * 2N          row-major payload, interleaved (re, im)
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np

__all__ = ["MAGIC", "FORMAT_VERSION", "SignalFormatError", "generate_input", "read_signal", "write_signal"]

MAGIC = b"FFTU"
FORMAT_VERSION = 1

_PathLike = Union[str, Path]


class SignalFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def generate_input(shape: Sequence[int], seed: int) -> np.ndarray:
    """Deterministic random complex signal, both components uniform in [-1, 1).

    Uses numpy's PCG64 generator seeded with ``seed mod 2**64``; element ``j``
    (row-major) takes draws ``2j`` (real) and ``2j + 1`` (imaginary).
    """
    shape = tuple(int(n) for n in shape)
    rng = np.random.default_rng(int(seed) % 2**64)
    vals = rng.uniform(-1.0, 1.0, size=(math.prod(shape), 2))
    return (vals[:, 0] + 1j * vals[:, 1]).reshape(shape)


def write_signal(path: _PathLike, x) -> None:
    x = np.asarray(x, dtype=np.complex128)
    shape = x.shape if x.ndim else (1,)
    header = MAGIC + struct.pack("<II", FORMAT_VERSION, len(shape)) + struct.pack(f"<{len(shape)}Q", *shape)
    payload = np.ascontiguousarray(x).astype("<c16", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_signal(path: _PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise SignalFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
    if len(data) < 12:
        raise SignalFormatError("truncated header", len(data))
    version, d = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise SignalFormatError(f"unsupported format version {version}", 4)
    if d < 1:
        raise SignalFormatError(f"invalid dimension count {d}", 8)
    end = 12 + 8 * d
    if len(data) < end:
        raise SignalFormatError(f"header declares {d} dimensions but is truncated", len(data))
    shape = struct.unpack_from(f"<{d}Q", data, 12)
    for l, n in enumerate(shape):
        if n < 1:
            raise SignalFormatError(f"dimension {l} has size {n}", 12 + 8 * l)
    expected = 16 * math.prod(shape)
    if len(data) - end != expected:
        raise SignalFormatError(f"payload has {len(data) - end} bytes, expected {expected}", end)
    return np.frombuffer(data, dtype="<c16", offset=end).astype(np.complex128).reshape(shape)
