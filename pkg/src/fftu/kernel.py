"""Sequential complex FFT primitives.

Everything here works on ``complex128`` numpy arrays. Transforms are
unnormalized in the forward direction and scaled by ``1/n`` in the inverse
direction, so ``inverse(forward(x)) == x``.

The fast path is a mixed-radix decimation-in-time Cooley-Tukey recursion that
always splits off the smallest prime factor of the length. Prime factors are
handled by a direct DFT, which is only allowed up to ``MAX_PRIME_FACTOR``.
"""

from __future__ import annotations

import enum
import functools
import math
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Direction",
    "MAX_PRIME_FACTOR",
    "omega",
    "omega_powers",
    "dft_naive",
    "dft_naive_md",
    "fft_1d",
    "fft_strided",
    "fft_md",
    "fft_axes",
    "fft_flops",
    "smallest_prime_factor",
]

#: Largest prime factor a length may contain before the recursion gives up.
MAX_PRIME_FACTOR = 256


class Direction(str, enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"

    @property
    def sign(self) -> int:
        """Sign of the exponent: -1 for forward, +1 for inverse."""
        return -1 if self is Direction.FORWARD else 1


DirectionLike = Union[Direction, str]


def _direction(direction: DirectionLike) -> Direction:
    try:
        return Direction(direction)
    except ValueError:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}") from None


def omega(n: int, e: int) -> complex:
    """Return ``exp(-2*pi*i*e/n)``, the ``e``-th power of the principal ``n``-th root of unity.

    The exponent is reduced modulo ``n`` first, so ``omega(n, e + n) == omega(n, e)``
    holds exactly.
    """
    if n <= 0:
        raise ValueError(f"root of unity order must be positive, got {n}")
    e = e % n
    angle = -2.0 * math.pi * e / n
    return complex(math.cos(angle), math.sin(angle))


def omega_powers(n: int, exponents, sign: int = -1) -> np.ndarray:
    """Vectorized :func:`omega` over an integer array of exponents.

    ``sign=+1`` yields the conjugate roots used by inverse transforms.
    """
    if n <= 0:
        raise ValueError(f"root of unity order must be positive, got {n}")
    e = np.mod(np.asarray(exponents, dtype=np.int64), n)
    angle = (sign * 2.0 * np.pi / n) * e
    return np.cos(angle) + 1j * np.sin(angle)


def smallest_prime_factor(n: int) -> int:
    if n < 2:
        raise ValueError(f"no prime factor for {n}")
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


def fft_flops(n: int) -> float:
    """Real flop count charged for one length-``n`` transform (the ``5 n log2 n`` convention)."""
    return 5.0 * n * math.log2(n) if n > 1 else 0.0


# ---------------------------------------------------------------------------
# Oracles


def _as_complex(x) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128)


def dft_naive(x, direction: DirectionLike = "forward") -> np.ndarray:
    """Direct O(n^2) evaluation of the 1D DFT sum. Used as the test oracle."""
    x = _as_complex(x)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft_naive expects a non-empty 1D signal")
    d = _direction(direction)
    n = x.size
    j = np.arange(n)
    # every term x_j * w^(jk) of the sum, exponent reduced exactly in integers
    weights = omega_powers(n, np.outer(j, j), sign=d.sign)
    y = weights @ x
    if d is Direction.INVERSE:
        y /= n
    return y


def dft_naive_md(x, direction: DirectionLike = "forward") -> np.ndarray:
    """Direct O(N^2) evaluation of the multidimensional DFT sum.

    Every output element is the full sum over all ``N`` inputs. The weight of
    each term, ``prod_l w_{n_l}^{j_l k_l}``, is formed explicitly from
    per-dimension root tables; output rows are evaluated in chunks so the
    weight block stays around 2M entries.
    """
    x = _as_complex(x)
    if x.size == 0:
        raise ValueError("dft_naive_md expects a non-empty signal")
    d = _direction(direction)
    shape = x.shape if x.ndim else (1,)
    N = x.size
    flat = x.reshape(-1)
    tables = [omega_powers(n, np.outer(np.arange(n), np.arange(n)), sign=d.sign) for n in shape]
    coords = np.indices(shape).reshape(len(shape), -1)  # (d, N), row-major order
    chunk = max(1, (1 << 21) // N)
    out = np.empty(N, dtype=np.complex128)
    for start in range(0, N, chunk):
        k = coords[:, start:start + chunk]
        w = tables[0][k[0]]
        for l in range(1, len(shape)):
            w = (w[:, :, None] * tables[l][k[l]][:, None, :]).reshape(k.shape[1], -1)
        out[start:start + chunk] = w @ flat
    if d is Direction.INVERSE:
        out /= N
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# Fast transforms


@functools.lru_cache(maxsize=None)
def _stage_twiddles(n: int, r: int, sign: int) -> np.ndarray:
    m = n // r
    tw = omega_powers(n, np.outer(np.arange(r), np.arange(m)), sign=sign)
    tw.flags.writeable = False
    return tw


@functools.lru_cache(maxsize=None)
def _dft_matrix(r: int, sign: int) -> np.ndarray:
    k = np.arange(r)
    mat = omega_powers(r, np.outer(k, k), sign=sign)
    mat.flags.writeable = False
    return mat


def _fft_rows(x: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalized transform of every row of a contiguous ``(batch, n)`` array."""
    b, n = x.shape
    if n == 1:
        return x.copy()
    r = smallest_prime_factor(n)
    if r == n:
        if n > MAX_PRIME_FACTOR:
            raise ValueError(
                f"length {n} has prime factor {r} > {MAX_PRIME_FACTOR}; prime-length FFTs are unsupported"
            )
        return x @ _dft_matrix(n, sign)
    m = n // r
    # sub[:, s, j] = x[:, j*r + s]: the r decimated subsequences
    sub = np.ascontiguousarray(x.reshape(b, m, r).transpose(0, 2, 1)).reshape(b * r, m)
    z = _fft_rows(sub, sign).reshape(b, r, m)
    tw = _stage_twiddles(n, r, sign)
    if r == 2:
        t = z[:, 1, :] * tw[1]
        out = np.empty((b, 2, m), dtype=np.complex128)
        np.add(z[:, 0, :], t, out=out[:, 0, :])
        np.subtract(z[:, 0, :], t, out=out[:, 1, :])
    else:
        z[:, 1:, :] *= tw[1:]
        # length-r DFT across the subsequence index: out[:, t, k] = sum_s w_r^(st) z[:, s, k]
        out = _dft_matrix(r, sign) @ z
    return out.reshape(b, n)


def _transform_axis(a: np.ndarray, axis: int, sign: int) -> np.ndarray:
    """Unnormalized transform of ``a`` along one axis; returns a new array."""
    n = a.shape[axis]
    if n == 1:
        return np.array(a, dtype=np.complex128, copy=True)
    moved = np.moveaxis(a, axis, -1)
    rows = np.ascontiguousarray(moved, dtype=np.complex128).reshape(-1, n)
    out = _fft_rows(rows, sign).reshape(moved.shape)
    return np.moveaxis(out, -1, axis)


def fft_axes(a, axes: Iterable[int], direction: DirectionLike = "forward", normalize: bool = True) -> np.ndarray:
    """Batched 1D transforms of ``a`` along each of ``axes`` in turn.

    With ``normalize=False`` the inverse direction is returned unscaled, which
    is what the parallel engine uses before its single global ``1/N`` scale.
    """
    d = _direction(direction)
    out = _as_complex(a)
    scale = 1
    for axis in axes:
        n = out.shape[axis]
        out = _transform_axis(out, axis, d.sign)
        scale *= n
    if out is a:
        out = out.copy()
    if normalize and d is Direction.INVERSE and scale != 1:
        out /= scale
    return out


def fft_1d(x, direction: DirectionLike = "forward") -> np.ndarray:
    x = _as_complex(x)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("fft_1d expects a non-empty 1D signal")
    return fft_axes(x, (0,), direction)


def fft_md(x, direction: DirectionLike = "forward") -> np.ndarray:
    """Multidimensional FFT as successive batched 1D transforms over every axis."""
    x = _as_complex(x)
    if x.size == 0:
        raise ValueError("fft_md expects a non-empty signal")
    return fft_axes(x, range(x.ndim), direction)


def fft_strided(buffer: np.ndarray, offset: int, stride: int, count: int,
                direction: DirectionLike = "forward") -> None:
    """Transform the strided subarray ``buffer[offset::stride][:count]`` in place.

    Elements outside the subarray are not touched.
    """
    if buffer.ndim != 1:
        raise ValueError("fft_strided expects a flat buffer")
    if stride < 1 or count < 1 or offset < 0:
        raise IndexError(f"invalid strided view offset={offset} stride={stride} count={count}")
    last = offset + (count - 1) * stride
    if last >= buffer.size:
        raise IndexError(f"strided view ends at {last}, buffer has {buffer.size} elements")
    view = buffer[offset:last + 1:stride]
    view[...] = fft_1d(view, direction)

