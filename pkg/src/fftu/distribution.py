"""Data distributions as explicit bijections between ``(rank, local index)`` and global index.

Three maps are provided:

* :class:`CyclicMap`: element ``j`` lives on processor ``j mod p`` at local
  position ``j div p``, independently in every dimension.
* :class:`SlabMap`: contiguous blocks along one axis.
* :class:`PencilMap`: contiguous blocks along two axes.

Processor grids are linearized row-major (last grid coordinate fastest).
Axes are numbered from 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

__all__ = [
    "ConfigurationError",
    "ProcGrid",
    "CyclicMap",
    "SlabMap",
    "PencilMap",
    "scatter",
    "gather",
    "max_processors",
    "largest_square_divisor_root",
]


class ConfigurationError(ValueError):
    """A shape/grid combination the algorithm cannot handle."""


def _tuple(dims: Sequence[int], what: str) -> Tuple[int, ...]:
    dims = tuple(int(n) for n in dims)
    if not dims or any(n < 1 for n in dims):
        raise ValueError(f"{what} must be a non-empty tuple of positive integers, got {dims}")
    return dims


@dataclass(frozen=True)
class ProcGrid:
    dims: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", _tuple(self.dims, "processor grid"))

    @property
    def nprocs(self) -> int:
        return math.prod(self.dims)

    def rank(self, coord: Sequence[int]) -> int:
        coord = tuple(coord)
        if len(coord) != len(self.dims) or any(not 0 <= c < p for c, p in zip(coord, self.dims)):
            raise IndexError(f"grid coordinate {coord} outside grid {self.dims}")
        return int(np.ravel_multi_index(coord, self.dims))

    def coord(self, rank: int) -> Tuple[int, ...]:
        if not 0 <= rank < self.nprocs:
            raise IndexError(f"rank {rank} outside [0, {self.nprocs})")
        return tuple(int(c) for c in np.unravel_index(rank, self.dims))

    def coords(self):
        """All grid coordinates in rank order."""
        return itertools.product(*(range(p) for p in self.dims))


def _check_index(idx: Sequence[int], bounds: Sequence[int], what: str) -> Tuple[int, ...]:
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(bounds) or any(not 0 <= i < n for i, n in zip(idx, bounds)):
        raise IndexError(f"{what} {idx} outside {tuple(bounds)}")
    return idx


@dataclass(frozen=True)
class CyclicMap:
    """d-dimensional cyclic distribution of ``shape`` over ``grid``."""

    shape: Tuple[int, ...]
    grid: ProcGrid

    def __post_init__(self):
        object.__setattr__(self, "shape", _tuple(self.shape, "shape"))
        if not isinstance(self.grid, ProcGrid):
            object.__setattr__(self, "grid", ProcGrid(self.grid))
        if len(self.shape) != len(self.grid.dims):
            raise ConfigurationError(
                f"grid {self.grid.dims} has {len(self.grid.dims)} dimensions, shape {self.shape} has {len(self.shape)}"
            )
        for l, (n, p) in enumerate(zip(self.shape, self.grid.dims)):
            if n % p:
                raise ConfigurationError(f"dimension {l}: grid size {p} does not divide n={n}")

    @property
    def nprocs(self) -> int:
        return self.grid.nprocs

    @property
    def local_shape(self) -> Tuple[int, ...]:
        return tuple(n // p for n, p in zip(self.shape, self.grid.dims))

    def local_to_global(self, s: Sequence[int], k: Sequence[int]) -> Tuple[int, ...]:
        s = _check_index(s, self.grid.dims, "grid coordinate")
        k = _check_index(k, self.local_shape, "local index")
        return tuple(si + ki * p for si, ki, p in zip(s, k, self.grid.dims))

    def global_to_local(self, j: Sequence[int]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        j = _check_index(j, self.shape, "global index")
        return (tuple(jl % p for jl, p in zip(j, self.grid.dims)),
                tuple(jl // p for jl, p in zip(j, self.grid.dims)))

    def local_slices(self, rank: int) -> Tuple[slice, ...]:
        s = self.grid.coord(rank)
        return tuple(slice(si, None, p) for si, p in zip(s, self.grid.dims))


@dataclass(frozen=True)
class SlabMap:
    """Block distribution of ``shape`` over ``nprocs`` processors along ``axis``."""

    shape: Tuple[int, ...]
    nprocs: int
    axis: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", _tuple(self.shape, "shape"))
        if not 0 <= self.axis < len(self.shape):
            raise ConfigurationError(f"slab axis {self.axis} outside shape {self.shape}")
        if self.nprocs < 1 or self.shape[self.axis] % self.nprocs:
            raise ConfigurationError(
                f"dimension {self.axis}: {self.nprocs} processors do not divide n={self.shape[self.axis]}"
            )

    @property
    def local_shape(self) -> Tuple[int, ...]:
        shape = list(self.shape)
        shape[self.axis] //= self.nprocs
        return tuple(shape)

    def local_to_global(self, rank: int, k: Sequence[int]) -> Tuple[int, ...]:
        if not 0 <= rank < self.nprocs:
            raise IndexError(f"rank {rank} outside [0, {self.nprocs})")
        j = list(_check_index(k, self.local_shape, "local index"))
        j[self.axis] += rank * self.local_shape[self.axis]
        return tuple(j)

    def global_to_local(self, j: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
        j = _check_index(j, self.shape, "global index")
        b = self.local_shape[self.axis]
        k = list(j)
        k[self.axis] %= b
        return j[self.axis] // b, tuple(k)

    def local_slices(self, rank: int) -> Tuple[slice, ...]:
        b = self.local_shape[self.axis]
        sl = [slice(None)] * len(self.shape)
        sl[self.axis] = slice(rank * b, (rank + 1) * b)
        return tuple(sl)


@dataclass(frozen=True)
class PencilMap:
    """Block distribution over a ``p1 x p2`` grid along two distinct axes."""

    shape: Tuple[int, ...]
    grid: Tuple[int, int]
    axes: Tuple[int, int] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "shape", _tuple(self.shape, "shape"))
        object.__setattr__(self, "grid", _tuple(self.grid, "pencil grid"))
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        if len(self.grid) != 2 or len(self.axes) != 2:
            raise ConfigurationError("pencil distribution needs exactly two grid sizes and two axes")
        a, b = self.axes
        if a == b or not (0 <= a < len(self.shape) and 0 <= b < len(self.shape)):
            raise ConfigurationError(f"invalid pencil axes {self.axes} for shape {self.shape}")
        for ax, p in zip(self.axes, self.grid):
            if self.shape[ax] % p:
                raise ConfigurationError(f"dimension {ax}: grid size {p} does not divide n={self.shape[ax]}")

    @property
    def nprocs(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def local_shape(self) -> Tuple[int, ...]:
        shape = list(self.shape)
        for ax, p in zip(self.axes, self.grid):
            shape[ax] //= p
        return tuple(shape)

    def local_to_global(self, rank: int, k: Sequence[int]) -> Tuple[int, ...]:
        if not 0 <= rank < self.nprocs:
            raise IndexError(f"rank {rank} outside [0, {self.nprocs})")
        s = np.unravel_index(rank, self.grid)
        j = list(_check_index(k, self.local_shape, "local index"))
        for ax, si in zip(self.axes, s):
            j[ax] += int(si) * self.local_shape[ax]
        return tuple(j)

    def global_to_local(self, j: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
        j = _check_index(j, self.shape, "global index")
        k = list(j)
        s = []
        for ax in self.axes:
            b = self.local_shape[ax]
            s.append(j[ax] // b)
            k[ax] %= b
        return int(np.ravel_multi_index(s, self.grid)), tuple(k)

    def local_slices(self, rank: int) -> Tuple[slice, ...]:
        s = np.unravel_index(rank, self.grid)
        sl = [slice(None)] * len(self.shape)
        for ax, si in zip(self.axes, s):
            b = self.local_shape[ax]
            sl[ax] = slice(int(si) * b, (int(si) + 1) * b)
        return tuple(sl)


def scatter(dist, x) -> List[np.ndarray]:
    """Split a global array into one contiguous local array per rank."""
    x = np.asarray(x)
    if x.shape != dist.shape:
        raise ConfigurationError(f"signal shape {x.shape} does not match distribution shape {dist.shape}")
    return [np.array(x[dist.local_slices(r)], order="C", copy=True) for r in range(dist.nprocs)]


def gather(dist, blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Reassemble the global array from per-rank local arrays (inverse of :func:`scatter`)."""
    if len(blocks) != dist.nprocs:
        raise ConfigurationError(f"expected {dist.nprocs} local arrays, got {len(blocks)}")
    out = np.empty(dist.shape, dtype=np.result_type(*blocks))
    for r, block in enumerate(blocks):
        if block.shape != dist.local_shape:
            raise ConfigurationError(f"rank {r}: local shape {block.shape} != {dist.local_shape}")
        out[dist.local_slices(r)] = block
    return out


def largest_square_divisor_root(n: int) -> int:
    """Largest ``q`` with ``q**2 | n``."""
    best = 1
    q = 2
    while q * q <= n:
        if n % (q * q) == 0:
            best = q
        q += 1
    return best


def max_processors(shape: Sequence[int], strategy: str = "cyclic", r: int = None, axis: int = 0) -> int:
    """Processor ceiling of a distribution strategy for a transform of ``shape``.

    ``strategy`` is one of:

    * ``"cyclic"``: product over dimensions of the largest ``p_l`` with
      ``p_l**2 | n_l``; equals ``sqrt(N)`` when every ``n_l`` is a square.
    * ``"slab"``: ``min(n_axis, N / n_axis)``.
    * ``"rdim"``: ``r``-dimensional block distribution, choosing the ``r``
      distributed axes that maximize ``min(prod distributed, prod rest)``.
    * ``"pencil"``: ``rdim`` with ``r = 2`` for ``d >= 4``; for ``d = 3``
      (two redistributions needed) the smallest pairwise product.
    """
    shape = _tuple(shape, "shape")
    d = len(shape)
    N = math.prod(shape)
    if strategy == "cyclic":
        return math.prod(largest_square_divisor_root(n) for n in shape)
    if strategy == "slab":
        if not 0 <= axis < d:
            raise ValueError(f"slab axis {axis} outside shape {shape}")
        return min(shape[axis], N // shape[axis])
    if strategy == "pencil":
        if d < 3:
            raise ValueError(f"pencil distribution needs d >= 3, got d={d}")
        if d == 3:
            return min(shape[a] * shape[b] for a, b in itertools.combinations(range(3), 2))
        return max_processors(shape, "rdim", r=2)
    if strategy == "rdim":
        if r is None or not 1 <= r < d:
            raise ValueError(f"rdim needs 1 <= r < d={d}, got r={r}")
        best = 0
        for chosen in itertools.combinations(range(d), r):
            inner = math.prod(shape[a] for a in chosen)
            best = max(best, min(inner, N // inner))
        return best
    raise ValueError(f"unknown strategy {strategy!r}")
