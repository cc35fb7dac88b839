import numpy as np
import pytest
from hypothesis import given

from qrm.errors import GridError
from qrm.grid import (
    Direction,
    LoadConfig,
    LocalQuadrant,
    OccupancyGrid,
    QuadrantId,
    SiteCoord,
    TargetRegion,
    check_width,
    feasibility,
    flip,
    global_to_local,
    local_to_global,
    merge_quadrants,
    random_load,
    split_quadrants,
    splitmix64,
    splitmix64_uniform,
)

from conftest import grids


def test_splitmix64_reference_vector():
    gen = splitmix64(0)
    assert next(gen) == 0xE220A8397B1DCDAF
    assert next(gen) == 0x6E789E6AA1B965F4


@pytest.mark.parametrize("seed", [0, 1, 12345, 2**64 - 1])
def test_vectorized_splitmix_matches_reference(seed):
    gen = splitmix64(seed)
    expect = np.array([(next(gen) >> 11) * 2.0**-53 for _ in range(200)])
    assert np.array_equal(splitmix64_uniform(seed, 200), expect)


def test_random_load_is_row_major_threshold():
    g = random_load(6, LoadConfig(0.3, 7))
    u = splitmix64_uniform(7, 36)
    assert np.array_equal(g.flat(), (u < 0.3).astype(np.uint8))
    assert random_load(6, LoadConfig(0.3, 7)) == g


def test_random_load_extremes():
    assert random_load(10, LoadConfig(0.0, 3)).popcount == 0
    assert random_load(10, LoadConfig(1.0, 3)).popcount == 100


def test_fill_fraction_near_p():
    g = random_load(100, LoadConfig(0.5, 11))
    assert abs(g.popcount / 10_000 - 0.5) < 0.02


@pytest.mark.parametrize("bad", [0, 3, -2, 7])
def test_width_validation(bad):
    with pytest.raises(GridError):
        check_width(bad)


def test_load_config_validation():
    with pytest.raises(GridError):
        LoadConfig(1.5)
    with pytest.raises(GridError):
        LoadConfig(0.5, -1)


def test_grid_is_read_only():
    g = OccupancyGrid.empty(4)
    with pytest.raises(ValueError):
        g.bits[0, 0] = True
    with pytest.raises(GridError):
        OccupancyGrid(np.zeros((4, 6), dtype=bool))


def test_target_bounds_and_holes():
    t = TargetRegion(4)
    assert t.bounds(8) == (2, 6)
    g = OccupancyGrid(t.mask(8))
    assert t.is_filled(g) and t.occupancy(g) == 16 and t.holes(g) == []
    bits = g.copy_bits()
    bits[3, 4] = False
    assert TargetRegion(4).holes(OccupancyGrid(bits)) == [SiteCoord(3, 4)]
    with pytest.raises(GridError):
        TargetRegion(3)
    with pytest.raises(GridError):
        TargetRegion(10).bounds(8)


def test_quadrant_mapping_corners():
    w = 8
    # local (0, 0) touches the center in every quadrant
    assert local_to_global(QuadrantId.NW, (0, 0), w) == (3, 3)
    assert local_to_global(QuadrantId.NE, (0, 0), w) == (3, 4)
    assert local_to_global(QuadrantId.SW, (0, 0), w) == (4, 3)
    assert local_to_global(QuadrantId.SE, (0, 0), w) == (4, 4)
    assert local_to_global(QuadrantId.NW, (3, 3), w) == (0, 0)
    assert local_to_global(QuadrantId.SE, (3, 3), w) == (7, 7)
    assert local_to_global(QuadrantId.NE, (1, 2), w) == (2, 6)
    assert local_to_global(QuadrantId.SW, (1, 2), w) == (5, 1)


def test_quadrant_mapping_rejects_out_of_range():
    with pytest.raises(GridError):
        local_to_global(QuadrantId.NW, (4, 0), 8)
    with pytest.raises(GridError):
        global_to_local((8, 0), 8)


def test_mapping_bijection_small():
    for w in (2, 4, 6):
        seen = set()
        for r in range(w):
            for c in range(w):
                q, loc = global_to_local((r, c), w)
                assert local_to_global(q, loc, w) == (r, c)
                seen.add((q, loc))
        assert len(seen) == w * w


def test_flip_is_involution():
    block = np.arange(16).reshape(4, 4)
    for q in QuadrantId:
        assert np.array_equal(flip(q, flip(q, block)), block)


@given(grids())
def test_split_merge_round_trip(g):
    quads = split_quadrants(g)
    assert merge_quadrants(quads) == g
    assert sum(lq.popcount for lq in quads.values()) == g.popcount


@given(grids())
def test_split_agrees_with_site_mapping(g):
    quads = split_quadrants(g)
    rows, cols = np.nonzero(g.bits)
    for r, c in zip(rows, cols):
        q, (i, j) = global_to_local((r, c), g.width)
        assert quads[q].bits[i, j]


def test_merge_requires_all_quadrants():
    quads = split_quadrants(OccupancyGrid.empty(4))
    quads.pop(QuadrantId.NW)
    with pytest.raises(GridError):
        merge_quadrants(quads)
    bad = dict(split_quadrants(OccupancyGrid.empty(4)))
    bad[QuadrantId.NW] = LocalQuadrant(QuadrantId.NW, np.zeros((3, 3), dtype=bool))
    with pytest.raises(GridError):
        merge_quadrants(bad)


def test_direction_deltas():
    assert Direction.N.delta == (-1, 0) and Direction.S.delta == (1, 0)
    assert Direction.E.delta == (0, 1) and Direction.W.delta == (0, -1)
    assert Direction.E.horizontal and not Direction.N.horizontal


def test_feasibility_per_quadrant():
    g = OccupancyGrid.full(8)
    reports = feasibility(g, TargetRegion(4))
    assert all(r.feasible and r.available == 16 and r.required == 4 for r in reports.values())
    bits = g.copy_bits()
    bits[:4, :4] = False
    bits[3, 3] = True
    r = feasibility(OccupancyGrid(bits), TargetRegion(4))
    assert not r[QuadrantId.NW].feasible and r[QuadrantId.SE].feasible


def test_grid_equality_and_hash():
    a = random_load(8, LoadConfig(0.5, 1))
    b = OccupancyGrid(a.copy_bits())
    assert a == b and hash(a) == hash(b)
    assert a != random_load(8, LoadConfig(0.5, 2))
