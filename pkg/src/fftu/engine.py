"""Cyclic-to-cyclic parallel multidimensional FFT with a single all-to-all.

The array of shape ``(n_1, ..., n_d)`` is distributed cyclically over a
``p_1 x ... x p_d`` processor grid with ``p_l**2 | n_l``. Each processor
``s`` runs three supersteps on its local box of shape ``m_l = n_l / p_l``:

0. local transform of the box, then twiddle by ``prod_l w_{n_l}^(k_l s_l)``
   fused with packing into one contiguous packet per destination
   (packet ``k`` holds ``Z[k::p]``, row-major, ``q_l = n_l / p_l**2`` per axis);
1. put packet ``k`` into processor ``k`` at box offset ``s * q``;
2. length-``p_l`` transforms along the strided subarrays ``W[t::q]``.

The result ends up in the same cyclic distribution as the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bsp import BSP, SuperstepTrace, run_spmd
from .distribution import ConfigurationError, CyclicMap, ProcGrid, gather, scatter
from .kernel import Direction, DirectionLike, fft_axes, fft_flops, omega_powers

__all__ = [
    "FftuPlan",
    "make_plan",
    "pack_and_twiddle",
    "fftu_transform",
    "fftu_inverse",
    "fftu_global",
]

# real flops of one complex multiply
CMUL_FLOPS = 6


@dataclass(frozen=True)
class FftuPlan:
    """Precomputed data for one shape/grid/direction.

    ``twiddles[l][s_l]`` holds ``w_{n_l}^(k s_l)`` for ``k < n_l / p_l``
    (conjugated for the inverse direction).
    """

    shape: Tuple[int, ...]
    grid: ProcGrid
    direction: Direction
    twiddles: Tuple[np.ndarray, ...]

    @property
    def cyclic_map(self) -> CyclicMap:
        return CyclicMap(self.shape, self.grid)

    @property
    def nprocs(self) -> int:
        return self.grid.nprocs

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def local_shape(self) -> Tuple[int, ...]:
        return tuple(n // p for n, p in zip(self.shape, self.grid.dims))

    @property
    def packet_shape(self) -> Tuple[int, ...]:
        return tuple(n // (p * p) for n, p in zip(self.shape, self.grid.dims))

    def twiddle_table(self, coord: Sequence[int]) -> Tuple[np.ndarray, ...]:
        """The per-processor weight table: one row of ``n_l / p_l`` roots per dimension."""
        return tuple(tw[s] for tw, s in zip(self.twiddles, coord))

    def twiddle_entries(self, coord: Sequence[int]) -> int:
        return sum(t.size for t in self.twiddle_table(coord))

    def with_direction(self, direction: DirectionLike) -> "FftuPlan":
        direction = Direction(direction)
        if direction is self.direction:
            return self
        return FftuPlan(self.shape, self.grid, direction, tuple(np.conj(t) for t in self.twiddles))


def make_plan(shape: Sequence[int], grid: Sequence[int], direction: DirectionLike = "forward") -> FftuPlan:
    """Validate ``p_l**2 | n_l`` for every dimension and build the twiddle tables."""
    cmap = CyclicMap(tuple(shape), ProcGrid(tuple(grid)))
    for l, (n, p) in enumerate(zip(cmap.shape, cmap.grid.dims)):
        if n % (p * p):
            raise ConfigurationError(f"dimension {l}: p_l^2 = {p * p} does not divide n_l = {n}")
    direction = Direction(direction)
    twiddles = []
    for n, p in zip(cmap.shape, cmap.grid.dims):
        tw = omega_powers(n, np.outer(np.arange(p), np.arange(n // p)), sign=direction.sign)
        tw.flags.writeable = False
        twiddles.append(tw)
    return FftuPlan(cmap.shape, cmap.grid, direction, tuple(twiddles))


def _pack_and_twiddle(local: np.ndarray, s: Sequence[int], plan: FftuPlan) -> Tuple[List[np.ndarray], int]:
    grid = plan.grid.dims
    table = plan.twiddle_table(s)
    active = [l for l, p in enumerate(grid) if p > 1]
    mults = 0
    factor = None
    # factor_l = factor_{l-1} * w_{n_l}^(t_l s_l), built outward-in as in a nested loop
    for l in active:
        row = table[l]
        if factor is None:
            factor = row
        else:
            factor = np.multiply.outer(factor, row)
            mults += factor.size
    if factor is not None:
        fshape = [1] * local.ndim
        for l in active:
            fshape[l] = local.shape[l]
        factor = factor.reshape(fshape)
    packets = []
    for k in plan.grid.coords():
        sl = tuple(slice(kl, None, p) for kl, p in zip(k, grid))
        if factor is None:
            packets.append(np.ascontiguousarray(local[sl]))
        else:
            fsl = tuple(sl[l] if l in active else slice(None) for l in range(local.ndim))
            packets.append(local[sl] * factor[fsl])
            mults += packets[-1].size
    return packets, mults * CMUL_FLOPS


def pack_and_twiddle(local: np.ndarray, s: Sequence[int], plan: FftuPlan) -> List[np.ndarray]:
    """Twiddle the post-transform local box of processor ``s`` and split it into packets.

    Returns one row-major packet per destination, in rank order; packet ``k``
    is ``Z[k::p]`` where ``Z[t] = local[t] * prod_l w_{n_l}^(t_l s_l)``.
    """
    return _pack_and_twiddle(local, s, plan)[0]


def _program(blocks: List[np.ndarray], plan: FftuPlan):
    grid = plan.grid.dims
    local_shape = plan.local_shape
    q = plan.packet_shape
    nloc = math.prod(local_shape)
    local_axes = [l for l, m in enumerate(local_shape) if m > 1]
    grid_axes = [l for l, p in enumerate(grid) if p > 1]
    inverse = plan.direction is Direction.INVERSE

    def program(bsp: BSP) -> None:
        X = blocks[bsp.pid]
        s = plan.grid.coord(bsp.pid)

        # Superstep 0: local transform, twiddle + pack
        Y = fft_axes(X, local_axes, plan.direction, normalize=False)
        bsp.add_flops(sum(nloc // local_shape[l] * fft_flops(local_shape[l]) for l in local_axes))
        if plan.nprocs == 1:
            X[...] = Y
        else:
            packets, flops = _pack_and_twiddle(Y, s, plan)
            bsp.add_flops(flops)
            del Y
            bsp.register("W", X)
            bsp.sync()

            # Superstep 1: all-to-all
            start = tuple(sl * ql for sl, ql in zip(s, q))
            for dest, packet in enumerate(packets):
                bsp.put(dest, packet, "W", start=start, count=q)
            del packets
            bsp.sync()

            # Superstep 2: F_{p_1} x ... x F_{p_d} on every W(t : q : m)
            split = tuple(x for pl, ql in zip(grid, q) for x in (pl, ql))
            V = X.reshape(split)
            V[...] = fft_axes(V, [2 * l for l in grid_axes], plan.direction, normalize=False)
            bsp.add_flops(sum(nloc // grid[l] * fft_flops(grid[l]) for l in grid_axes))
        if inverse:
            X *= 1.0 / plan.size
            bsp.add_flops(2 * nloc)

    return program


def _check_blocks(blocks: Sequence[np.ndarray], plan: FftuPlan) -> None:
    if len(blocks) != plan.nprocs:
        raise ConfigurationError(f"plan has {plan.nprocs} processors, got {len(blocks)} local arrays")
    for r, b in enumerate(blocks):
        if b.shape != plan.local_shape:
            raise ConfigurationError(f"rank {r}: local array shape {b.shape} != plan local shape {plan.local_shape}")


def _run(blocks, plan: FftuPlan, inplace: bool, serial: Optional[bool], check: Optional[bool]):
    _check_blocks(blocks, plan)
    if inplace:
        for r, b in enumerate(blocks):
            if b.dtype != np.complex128 or not b.flags.c_contiguous:
                raise TypeError(f"rank {r}: in-place execution needs C-contiguous complex128 blocks")
        work = list(blocks)
    else:
        work = [np.array(b, dtype=np.complex128, order="C", copy=True) for b in blocks]
    _, trace = run_spmd(plan.nprocs, _program(work, plan), serial=serial, check=check)
    return work, trace


def fftu_transform(blocks: Sequence[np.ndarray], plan: FftuPlan, inplace: bool = False,
                   serial: Optional[bool] = None, check: Optional[bool] = None
                   ) -> Tuple[List[np.ndarray], SuperstepTrace]:
    """Transform cyclically distributed ``blocks`` in the plan's direction.

    ``blocks[r]`` is the local box of rank ``r`` (row-major rank order over the
    grid). The output blocks are in the same cyclic distribution. With
    ``inplace=True`` the input arrays are overwritten and returned.
    """
    return _run(blocks, plan, inplace, serial, check)


def fftu_inverse(blocks: Sequence[np.ndarray], plan: FftuPlan, inplace: bool = False,
                 serial: Optional[bool] = None, check: Optional[bool] = None
                 ) -> Tuple[List[np.ndarray], SuperstepTrace]:
    """Inverse transform: conjugated roots throughout and a final ``1/N`` scale."""
    return _run(blocks, plan.with_direction(Direction.INVERSE), inplace, serial, check)


def fftu_global(x, grid: Sequence[int], direction: DirectionLike = "forward",
                serial: Optional[bool] = None) -> Tuple[np.ndarray, SuperstepTrace]:
    """Scatter ``x`` cyclically, transform, and gather the result."""
    x = np.asarray(x, dtype=np.complex128)
    plan = make_plan(x.shape, grid, direction)
    blocks = scatter(plan.cyclic_map, x)
    out, trace = fftu_transform(blocks, plan, inplace=True, serial=serial)
    return gather(plan.cyclic_map, out), trace
