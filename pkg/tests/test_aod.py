import numpy as np
import pytest
from hypothesis import given

from qrm.aod import (
    COLLISION,
    OUT_OF_BOUNDS,
    UNINTENDED,
    TweezerMove,
    apply_move,
    lower,
    simulate,
    trap_set,
    validate_move,
)
from qrm.errors import LoweringError, MoveError
from qrm.grid import Direction, LoadConfig, OccupancyGrid, TargetRegion, random_load
from qrm.scheduler import MergedMove, baseline_schedule, qrm_schedule, trace_atoms
from qrm.shift_kernel import Axis

from conftest import grid_and_target


def grid_from(rows):
    return OccupancyGrid(np.array(rows, dtype=bool))


def test_move_normalises_and_validates():
    m = TweezerMove([3, 1, 3], (2,), "E")
    assert m.rows == (1, 3) and m.direction is Direction.E and m.size == 2
    with pytest.raises(ValueError):
        TweezerMove((), (1,), Direction.E)
    with pytest.raises(ValueError):
        TweezerMove((1,), (1,), Direction.E, steps=0)


def test_trap_set_is_cross_product():
    m = TweezerMove((0, 2), (1, 3), Direction.N)
    assert trap_set(m) == [(0, 1), (0, 3), (2, 1), (2, 3)]


def test_lockstep_chain_is_legal():
    g = grid_from([[1, 1, 1, 0]] * 4)
    out = apply_move(g, TweezerMove((0,), (0, 1, 2), Direction.E))
    assert out.bits[0].astype(int).tolist() == [0, 1, 1, 1]


def test_collision_detected():
    g = grid_from([[1, 1, 0, 0], [0] * 4, [0] * 4, [0] * 4])
    (v,) = validate_move(g, TweezerMove((0,), (0,), Direction.E))
    assert v.kind == COLLISION and v.sites == ((0, 1),)
    with pytest.raises(MoveError) as err:
        apply_move(g, TweezerMove((0,), (0,), Direction.E))
    assert err.value.violations[0].kind == COLLISION


def test_out_of_bounds_detected():
    g = OccupancyGrid.empty(4)
    (v,) = validate_move(g, TweezerMove((0,), (3,), Direction.E))
    assert v.kind == OUT_OF_BOUNDS
    # an empty trap leaving the grid is still an illegal tone
    (v,) = validate_move(g, TweezerMove((0,), (0,), Direction.N))
    assert v.kind == OUT_OF_BOUNDS


def test_unintended_capture_detected():
    g = grid_from([[1, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0], [0] * 4])
    move = TweezerMove((0, 2), (0,), Direction.E)
    (v,) = validate_move(g, move, intended=[(0, 0)])
    assert v.kind == UNINTENDED and v.sites == ((2, 0),)
    assert validate_move(g, move, intended=[(0, 0), (2, 0)]) == []


def test_simulate_stops_at_first_violation():
    g = grid_from([[1, 1, 0, 0], [0] * 4, [0] * 4, [0] * 4])
    moves = [TweezerMove((0,), (1,), Direction.E), TweezerMove((0,), (2,), Direction.E, steps=2)]
    rep = simulate(g, moves)
    assert not rep.ok and rep.failed_move == 1 and rep.moves_executed == 1
    assert rep.violations[0].kind == OUT_OF_BOUNDS


def test_lower_rejects_impossible_move():
    g = grid_from([[1, 0, 0, 0]] + [[0] * 4] * 3)
    bad = MergedMove(1, Axis.ROWS, 0, Direction.W, (0,), ((0, 2),))
    with pytest.raises(LoweringError) as err:
        lower([bad], g)
    assert err.value.diagnostics["violations"]


def test_lower_combines_disjoint_spans():
    # rows 0 and 1 shift different tails; the union trap set is still safe
    g = grid_from([[0, 1, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0]] + [[0] * 6] * 4)
    m = MergedMove(1, Axis.ROWS, 0, Direction.W, (0, 1), ((1, 6), (3, 6)))
    combined = lower([m], g)
    separate = lower([m], g, combine=False)
    assert len(combined) == 1 and len(separate) == 2
    assert simulate(g, combined).final == simulate(g, separate).final


@pytest.mark.parametrize("combine", [True, False])
@pytest.mark.parametrize("seed", range(8))
def test_lowered_schedule_is_valid(seed, combine):
    g = random_load(20, LoadConfig(0.5, seed))
    for schedule in (qrm_schedule, baseline_schedule):
        res = schedule(g, TargetRegion(10))
        moves = lower(res.moves, g, combine=combine)
        rep = simulate(g, moves, TargetRegion(10))
        assert rep.ok and rep.conserved and rep.final == res.final
        assert trace_atoms(moves, g) == res.traces


@given(grid_and_target(min_width=4))
def test_lowering_property(gt):
    g, t = gt
    res = qrm_schedule(g, TargetRegion(t))
    moves = lower(res.moves, g)
    rep = simulate(g, moves, TargetRegion(t))
    assert rep.ok and rep.final == res.final
    assert all(b >= a for a, b in zip(rep.target_history, rep.target_history[1:]))


def test_simulation_histories():
    g = random_load(12, LoadConfig(0.5, 2))
    res = qrm_schedule(g, TargetRegion(6))
    moves = lower(res.moves, g)
    rep = simulate(g, moves, TargetRegion(6))
    assert rep.target_history[0] == res.target_history[0]
    assert rep.iteration_history[max(rep.iteration_history)] == res.target_history[-1]
    assert len(rep.target_history) == len(moves) + 1
