import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stencilflow.grid import (
    BoundaryError, Decomposition, DecompositionError, Domain, Driver, HaloMessage, Mailbox,
    MovingLid, NoSlipWall, Outflow, Symmetry, TopologyError, WorkerPool, decompose, face_index,
    gather, read_sfg1, scatter, split_extent, write_csv_slice, write_sfg1,
)

from oracles import MIXED_BCS, exchange_matches_single_worker, local_windows, wrap_oracle


# -- Domain / decomposition ---------------------------------------------------


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain((0, 4, 4))
    with pytest.raises(ValueError):
        Domain((4, 4, 4), (1.0, 0.0, 1.0))
    assert Domain((2, 3, 4)).cells == 24


def test_split_extent_remainder_low():
    assert split_extent(10, 3) == [(0, 4), (4, 7), (7, 10)]


def test_two_workers_32():
    deco = decompose(Domain((32, 32, 32)), 2, 1)
    assert sorted(deco.proc_grid) == [1, 1, 2]
    assert [deco.block_shape(r) for r in range(2)] == [tuple(32 if p == 1 else 16 for p in deco.proc_grid)] * 2


def test_tie_prefers_larger_px():
    assert decompose(Domain((32, 32, 32)), 2, 1).proc_grid == (2, 1, 1)
    assert decompose(Domain((32, 32, 32)), 4, 1).proc_grid == (2, 2, 1)


def test_single_worker_all_physical():
    deco = decompose(Domain((64, 64, 64)), 1, 1)
    assert deco.blocks == [((0, 0, 0), (64, 64, 64))]
    assert all(deco.is_physical(0, f) for f in range(6))


def test_infeasible_small_blocks():
    with pytest.raises(DecompositionError):
        decompose(Domain((4, 4, 4)), 8, 2)


def test_surface_minimal_split():
    deco = decompose(Domain((64, 16, 16)), 4, 1)
    assert deco.proc_grid == (4, 1, 1)


def test_bad_arguments():
    with pytest.raises(DecompositionError):
        decompose(Domain((8, 8, 8)), 0, 1)
    with pytest.raises(DecompositionError):
        decompose(Domain((8, 8, 8)), 2, -1)
    with pytest.raises(DecompositionError):
        decompose(Domain((8, 8, 8)), 4, 1, proc_grid=(2, 1, 1))


@settings(max_examples=60, deadline=None)
@given(
    extents=st.tuples(*[st.integers(3, 20)] * 3),
    workers=st.sampled_from([1, 2, 3, 4, 6, 8]),
    ghost=st.integers(0, 2),
)
def test_property_blocks_tile_domain(extents, workers, ghost):
    try:
        deco = decompose(Domain(extents), workers, ghost)
    except DecompositionError:
        return
    cover = np.zeros(extents, dtype=int)
    for lo, hi in deco.blocks:
        cover[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] += 1
    assert np.all(cover == 1)
    for a in range(3):
        sizes = {hi[a] - lo[a] for lo, hi in deco.blocks}
        assert max(sizes) - min(sizes) <= 1
        if deco.proc_grid[a] > 1:
            assert min(sizes) > ghost


def test_neighbor_table_periodic():
    deco = decompose(Domain((8, 8, 8)), 2, 1, periodic=(True, False, False), proc_grid=(2, 1, 1))
    assert deco.neighbors[0][face_index("x-")] == 1
    assert deco.neighbors[0][face_index("x+")] == 1
    assert deco.neighbors[0][face_index("y-")] is None


# -- exchange -----------------------------------------------------------------


def test_one_worker_exchange_noop():
    with Driver(decompose(Domain((4, 4, 4)), 1, 1)) as drv:
        f = drv.allocate("f", fill=3.0)
        before = f.locals[0].copy()
        drv.exchange_ghosts([f])
        assert np.array_equal(f.locals[0], before)


def test_z_split_plane_value():
    deco = decompose(Domain((4, 4, 8)), 2, 1, proc_grid=(1, 1, 2))
    with Driver(deco) as drv:
        f = drv.allocate("f")
        g = deco.ghost
        f.locals[0][:, :, g + deco.block_shape(0)[2] - 1] = 7.0
        drv.exchange_ghosts([f])
        assert np.all(f.locals[1][g:-g, g:-g, 0] == 7.0)
        assert f.ghost_valid[1][face_index("z-")]


def test_physical_ghosts_untouched_without_bcs():
    deco = decompose(Domain((6, 6, 6)), 2, 1)
    with Driver(deco) as drv:
        f = drv.allocate("f", fill=-1.0)
        scatter(np.ones((6, 6, 6)), f)
        drv.exchange_ghosts([f])
        assert np.all(f.locals[0][0] == -1.0)


def test_random_8cubed_2x2x2_matches_single_worker():
    rng = np.random.default_rng(3)
    values = rng.standard_normal((8, 8, 8))
    assert exchange_matches_single_worker(values, (2, 2, 2), 1, (True,) * 3)


def test_periodic_wrap_with_corners_ghost_2():
    rng = np.random.default_rng(4)
    values = rng.standard_normal((9, 10, 11))
    deco = decompose(Domain(values.shape), 8, 2, periodic=(True,) * 3, proc_grid=(2, 2, 2))
    with Driver(deco) as drv:
        f = drv.allocate("f")
        scatter(values, f)
        drv.exchange_ghosts([f])
        for got, want in zip(f.locals, local_windows(wrap_oracle(values, 2), deco)):
            assert np.array_equal(got, want)


@pytest.mark.parametrize("pg", [(2, 1, 1), (1, 2, 2), (2, 2, 2)])
def test_mixed_bcs_match_single_worker(pg):
    rng = np.random.default_rng(5)
    assert exchange_matches_single_worker(rng.standard_normal((10, 9, 8)), pg, 2, (False,) * 3, MIXED_BCS)


def test_exchange_idempotent():
    rng = np.random.default_rng(6)
    deco = decompose(Domain((8, 8, 8)), 4, 1)
    with Driver(deco) as drv:
        f = drv.allocate("f", bc=MIXED_BCS)
        scatter(rng.standard_normal((8, 8, 8)), f)
        drv.exchange_ghosts([f], bcs=True)
        once = [a.copy() for a in f.locals]
        drv.exchange_ghosts([f], bcs=True)
        assert all(np.array_equal(a, b) for a, b in zip(once, f.locals))


def test_topology_mismatch():
    d1 = Driver(decompose(Domain((8, 8, 8)), 1, 1))
    d2 = Driver(decompose(Domain((8, 8, 8)), 2, 1))
    try:
        f = d1.allocate("f")
        with pytest.raises(TopologyError):
            d2.exchange_ghosts([f])
    finally:
        d1.close()
        d2.close()


def test_halo_message_slab_size():
    deco = decompose(Domain((8, 6, 4)), 2, 2, proc_grid=(2, 1, 1))
    with Driver(deco) as drv:
        f = drv.allocate("f")
        drv.mailbox.messages_sent = drv.mailbox.bytes_sent = 0
        drv.exchange_ghosts([f])
        # one x face each way, face area 6*4 cells, ghost width 2
        assert drv.mailbox.messages_sent == 2
        assert drv.mailbox.bytes_sent == 2 * 6 * 4 * 2 * 8


# -- physical boundaries ------------------------------------------------------


def _single(extents=(4, 4, 4), ghost=1):
    return Driver(decompose(Domain(extents), 1, ghost))


def test_symmetry_mirror():
    with _single() as drv:
        f = drv.allocate("f")
        scatter(np.arange(64.0).reshape(4, 4, 4), f)
        drv.apply_physical_boundary(f, {face: Symmetry() for face in range(6)})
        a = f.locals[0]
        assert np.array_equal(a[1:-1, 1:-1, 0], a[1:-1, 1:-1, 1])
        assert np.array_equal(a[1:-1, 1:-1, -1], a[1:-1, 1:-1, -2])


def test_no_slip_tangential_reflects():
    with _single() as drv:
        f = drv.allocate("vx", stagger=(0.5, 0, 0))
        scatter(np.full((4, 4, 4), 0.3), f)
        drv.apply_physical_boundary(f, {face: NoSlipWall() for face in range(6)})
        a = f.locals[0]
        assert np.all(a[1:-2, 0, 1:-1] == -0.3)
        # wall-interpolated tangential value is zero
        assert np.all(0.5 * (a[1:-2, 0, 1:-1] + a[1:-2, 1, 1:-1]) == 0.0)


def test_moving_lid_ghost():
    with _single() as drv:
        f = drv.allocate("vx", stagger=(0.5, 0, 0))
        scatter(np.full((4, 4, 4), 0.25), f)
        spec = {face: NoSlipWall() for face in range(6)}
        spec[face_index("y+")] = MovingLid(1.0)
        drv.apply_physical_boundary(f, spec)
        a = f.locals[0]
        assert np.all(a[1:-2, -1, 1:-1] == 2.0 * 1.0 - 0.25)


def test_normal_component_on_wall_face():
    with _single() as drv:
        f = drv.allocate("vx", stagger=(0.5, 0, 0))
        scatter(np.full((4, 4, 4), 0.5), f)
        drv.apply_physical_boundary(f, {face: NoSlipWall() for face in range(6)})
        a = f.locals[0]
        assert np.all(a[0, 1:-1, 1:-1] == 0.0)   # x- wall face, ghost index
        assert np.all(a[4, 1:-1, 1:-1] == 0.0)   # x+ wall face, last interior index
        assert np.all(a[5, 1:-1, 1:-1] == -a[3, 1:-1, 1:-1])


def test_outflow_copies():
    with _single() as drv:
        f = drv.allocate("p")
        scatter(np.arange(64.0).reshape(4, 4, 4), f)
        drv.apply_physical_boundary(f, {face: Outflow() for face in range(6)})
        a = f.locals[0]
        assert np.array_equal(a[0, 1:-1, 1:-1], a[1, 1:-1, 1:-1])


def test_missing_bc():
    with _single() as drv:
        f = drv.allocate("p")
        with pytest.raises(BoundaryError):
            drv.apply_physical_boundary(f, {face_index("x-"): Outflow()})


# -- reductions, gather/scatter, io ------------------------------------------


def test_reduce_max_abs():
    deco = decompose(Domain((6, 6, 6)), 4, 1)
    with Driver(deco) as drv:
        f = drv.allocate("f")
        assert drv.reduce_max_abs(f) == 0.0
        a = np.zeros((6, 6, 6))
        a[5, 0, 3] = -3.5
        scatter(a, f)
        assert drv.reduce_max_abs(f) == 3.5


@settings(max_examples=25, deadline=None)
@given(workers=st.sampled_from([1, 2, 4, 8]), seed=st.integers(0, 1000))
def test_property_reductions_match_scan(workers, seed):
    values = np.random.default_rng(seed).standard_normal((8, 8, 8))
    with Driver(decompose(Domain((8, 8, 8)), workers, 1)) as drv:
        f = drv.allocate("f")
        scatter(values, f)
        assert drv.reduce_max_abs(f) == float(np.max(np.abs(values)))
        assert drv.reduce_max_abs(f) == drv.reduce_max_abs(f)
        assert np.array_equal(gather(f), values)


def test_gather_worker_ids():
    deco = decompose(Domain((4, 2, 2)), 2, 1, proc_grid=(2, 1, 1))
    with Driver(deco) as drv:
        f = drv.allocate("f")
        for r in range(2):
            f.interior(r)[...] = r
        assert np.array_equal(gather(f)[:, 0, 0], [0, 0, 1, 1])


def test_scatter_gather_round_trip():
    values = np.random.default_rng(7).standard_normal((7, 5, 6))
    with Driver(decompose(Domain(values.shape), 4, 1)) as drv:
        f = drv.allocate("f")
        assert np.array_equal(gather(scatter(values, f)), values)
        with pytest.raises(TopologyError):
            scatter(np.zeros((3, 3, 3)), f)


def test_sfg1_round_trip(tmp_path):
    values = np.random.default_rng(8).standard_normal((3, 4, 5))
    path = tmp_path / "f.sfg"
    write_sfg1(path, values)
    raw = path.read_bytes()
    assert raw[:4] == b"SFG1"
    assert int.from_bytes(raw[4:12], "little") == 3
    # x varies fastest
    assert np.frombuffer(raw[28:44], "<f8").tolist() == [values[0, 0, 0], values[1, 0, 0]]
    assert np.array_equal(read_sfg1(path), values)


def test_sfg1_rejects_bad_magic(tmp_path):
    path = tmp_path / "f.sfg"
    path.write_bytes(b"XXXX" + bytes(24))
    with pytest.raises(ValueError):
        read_sfg1(path)


def test_csv_slice(tmp_path):
    path = tmp_path / "s.csv"
    write_csv_slice(path, np.arange(8.0).reshape(2, 2, 2), axis=2, index=1)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,k,value"
    assert len(lines) == 5 and all(l.split(",")[2] == "1" for l in lines[1:])


# -- workers ------------------------------------------------------------------


def test_pool_runs_every_rank():
    pool = WorkerPool(4)
    try:
        assert pool.run(lambda r: r * r) == [0, 1, 4, 9]
    finally:
        pool.close()


def test_pool_propagates_errors():
    pool = WorkerPool(3)
    try:
        def fail(r):
            if r == 1:
                raise KeyError("boom")
            return r
        with pytest.raises(KeyError):
            pool.run(fail)
        assert pool.run(lambda r: r) == [0, 1, 2]
    finally:
        pool.close()


def test_mailbox_fifo():
    box = Mailbox()
    for v in (1.0, 2.0):
        box.send(HaloMessage(0, 1, 0, "f", np.array([v]), (1, 1, 1), tag="t"))
    assert box.recv(0, 1, "t").data[0] == 1.0
    assert box.recv(0, 1, "t").data[0] == 2.0
