import math

import numpy as np
import pytest

from fftu.distribution import ConfigurationError, CyclicMap, ProcGrid, gather, scatter
from fftu.engine import fftu_global, fftu_inverse, fftu_transform, make_plan, pack_and_twiddle
from fftu.io import generate_input
from fftu.kernel import dft_naive, dft_naive_md, fft_md

from conftest import audit_placement, legal_grids, rel_l2


def _forward(x, grid, **kw):
    plan = make_plan(x.shape, grid)
    out, trace = fftu_transform(scatter(plan.cyclic_map, x), plan, **kw)
    return gather(plan.cyclic_map, out), trace


def test_plan_table_size():
    plan = make_plan((8, 8, 8), (2, 2, 2))
    for coord in plan.grid.coords():
        assert plan.twiddle_entries(coord) == 12
    assert plan.local_shape == (4, 4, 4)
    assert plan.packet_shape == (2, 2, 2)


def test_plan_rejects_non_square_divisor():
    with pytest.raises(ConfigurationError, match="dimension 0"):
        make_plan((8, 8, 8), (4, 1, 1))
    with pytest.raises(ConfigurationError, match="dimension 1"):
        make_plan((4, 8), (2, 4))


@pytest.mark.parametrize("shape", [(7,), (3, 5), (2, 9, 1)])
def test_plan_trivial_grid_always_valid(shape):
    plan = make_plan(shape, (1,) * len(shape))
    assert plan.nprocs == 1


def test_plan_twiddles_read_only():
    plan = make_plan((16,), (2,))
    with pytest.raises(ValueError):
        plan.twiddles[0][0, 0] = 0


def test_pack_origin_has_no_twiddle():
    plan = make_plan((8, 8), (2, 2))
    local = generate_input(plan.local_shape, 1)
    packets = pack_and_twiddle(local, (0, 0), plan)
    for k, packet in zip(plan.grid.coords(), packets):
        np.testing.assert_array_equal(packet, local[k[0]::2, k[1]::2])


def test_pack_1d_element_three():
    plan = make_plan((8,), (2,))
    local = np.ones(4, dtype=complex)
    packets = pack_and_twiddle(local, (1,), plan)
    # t = 3 is odd so it sits in packet 1 at position 1
    h = math.sqrt(2) / 2
    assert abs(packets[1][1] - complex(-h, -h)) <= 1e-15


def test_pack_matches_two_pass_reference():
    shape, grid = (4, 4), (2, 2)
    plan = make_plan(shape, grid)
    local = generate_input(plan.local_shape, 2)
    for s in plan.grid.coords():
        t0, t1 = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
        z = local * np.exp(-2j * np.pi * t0 * s[0] / 4) * np.exp(-2j * np.pi * t1 * s[1] / 4)
        packets = pack_and_twiddle(local, s, plan)
        assert sum(pk.size for pk in packets) == local.size
        for k, packet in zip(plan.grid.coords(), packets):
            np.testing.assert_allclose(packet, z[k[0]::2, k[1]::2], rtol=0, atol=1e-15)


def test_p1_identical_to_fft_md():
    x = generate_input((8, 6), 3)
    y, trace = _forward(x, (1, 1))
    np.testing.assert_array_equal(y, fft_md(x))
    assert trace.communicate_count == 0


def test_1d_n16_p2():
    x = generate_input((16,), 11)
    y, trace = _forward(x, (2,))
    assert rel_l2(y, dft_naive(x)) <= 1e-11
    assert trace.communicate_count == 1


def test_3d_888_grid222():
    x = generate_input((8, 8, 8), 13)
    y, trace = _forward(x, (2, 2, 2))
    assert rel_l2(y, dft_naive_md(x)) <= 1e-11
    assert trace.communicate_count == 1
    assert trace.sync_count == 1
    N, p = 512, 8
    assert trace.words_sent_per_rank() == [N // p] * p
    assert trace.words_received_per_rank() == [N // p] * p


def test_output_stays_cyclic():
    x = generate_input((8, 4), 14)
    plan = make_plan(x.shape, (2, 2))
    out, _ = fftu_transform(scatter(plan.cyclic_map, x), plan)
    assert [b.shape for b in out] == [plan.cyclic_map.local_shape] * 4
    assert audit_placement(out, plan.cyclic_map, dft_naive_md(x)) == 32


def test_roundtrip_888():
    x = generate_input((8, 8, 8), 17)
    plan = make_plan(x.shape, (2, 2, 2))
    blocks = scatter(plan.cyclic_map, x)
    fwd, _ = fftu_transform(blocks, plan)
    back, trace = fftu_inverse(fwd, plan)
    assert rel_l2(gather(plan.cyclic_map, back), x) <= 1e-11
    assert trace.communicate_count == 1


def test_constant_and_delta():
    shape, grid = (4, 8), (2, 2)
    const = np.full(shape, 1 + 0j)
    delta = np.zeros(shape, dtype=complex)
    delta[0, 0] = 32
    y, _ = fftu_global(const, grid)
    np.testing.assert_allclose(y, delta, atol=1e-13)
    z, _ = fftu_global(delta, grid, "inverse")
    np.testing.assert_allclose(z, const, atol=1e-15)


def _circular_convolution(a, b):
    n0, n1 = a.shape
    out = np.zeros_like(a)
    for i in range(n0):
        for j in range(n1):
            for k in range(n0):
                for l in range(n1):
                    out[i, j] += a[k, l] * b[(i - k) % n0, (j - l) % n1]
    return out


def test_convolution_via_transforms():
    a = generate_input((4, 4), 20)
    b = generate_input((4, 4), 21)
    plan = make_plan((4, 4), (2, 2))
    fa, _ = fftu_transform(scatter(plan.cyclic_map, a), plan)
    fb, _ = fftu_transform(scatter(plan.cyclic_map, b), plan)
    prod = [u * v for u, v in zip(fa, fb)]
    conv, _ = fftu_inverse(prod, plan)
    assert rel_l2(gather(plan.cyclic_map, conv), _circular_convolution(a, b)) <= 1e-12


def test_grid_independence():
    x = generate_input((8, 8, 8), 22)
    results = [_forward(x, g)[0] for g in [(2, 1, 1), (1, 2, 1), (2, 2, 2)]]
    for y in results[1:]:
        assert rel_l2(y, results[0]) <= 1e-11


ORACLE_SHAPES = [(4,), (16,), (64,), (256,), (36,), (4096,), (8, 8), (16, 4), (12, 9), (4, 4, 4),
                 (8, 8, 8), (2, 4, 8), (4, 4, 4, 4), (16, 16, 16)]


@pytest.mark.parametrize("shape", ORACLE_SHAPES, ids=str)
def test_oracle_all_legal_grids(shape):
    x = generate_input(shape, 99)
    ref = dft_naive_md(x)
    for grid in legal_grids(shape):
        y, trace = _forward(x, grid)
        assert rel_l2(y, ref) <= 1e-11, grid
        p = math.prod(grid)
        assert trace.communicate_count == (1 if p > 1 else 0)


@pytest.mark.parametrize("serial", [False, True])
def test_serial_mode_identical(serial):
    x = generate_input((16, 16), 23)
    y, t = _forward(x, (2, 4), serial=serial)
    z, u = _forward(x, (2, 4), serial=not serial)
    assert np.array_equal(y, z)
    assert t.to_dict() == u.to_dict()


def test_overlap_check_passes_for_engine():
    x = generate_input((16, 16), 24)
    y, _ = _forward(x, (2, 2), check=True)
    assert rel_l2(y, fft_md(x)) <= 1e-12


def test_inplace_reuses_blocks():
    x = generate_input((16,), 25)
    plan = make_plan((16,), (4,))
    blocks = scatter(plan.cyclic_map, x)
    ids = [id(b) for b in blocks]
    out, _ = fftu_transform(blocks, plan, inplace=True)
    assert [id(b) for b in out] == ids
    assert rel_l2(gather(plan.cyclic_map, blocks), dft_naive(x)) <= 1e-12


def test_copy_out_preserves_input():
    x = generate_input((16,), 26)
    plan = make_plan((16,), (2,))
    blocks = scatter(plan.cyclic_map, x)
    saved = [b.copy() for b in blocks]
    fftu_transform(blocks, plan)
    assert all(np.array_equal(a, b) for a, b in zip(blocks, saved))


def test_block_mismatch_rejected():
    plan = make_plan((16,), (2,))
    with pytest.raises(ConfigurationError):
        fftu_transform([np.zeros(8, dtype=complex)], plan)
    with pytest.raises(ConfigurationError):
        fftu_transform([np.zeros(4, dtype=complex)] * 2, plan)


@pytest.mark.parametrize("shape, grid", [((1024,), (4,)), ((8, 8, 8), (2, 2, 2)), ((64, 64), (8, 8)),
                                         ((16, 16, 16), (4, 2, 1))])
def test_flop_count_within_bound(shape, grid):
    N, p = math.prod(shape), math.prod(grid)
    _, trace = _forward(generate_input(shape, 1), grid)
    bound = 5 * N / p * math.log2(N) + 12 * N / p
    assert max(trace.flops_per_rank()) <= 1.1 * bound


def test_flop_count_n1024_p4():
    _, trace = _forward(generate_input((1024,), 2), (4,))
    assert max(trace.flops_per_rank()) <= 15872
