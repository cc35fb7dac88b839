"""Multi-tweezer moves under crossed-AOD constraints.

An AOD pair selects a set of rows and a set of columns; a trap appears at
every selected (row, col) pair, and all traps shift in lockstep. Merged
schedule moves are lowered here into such row-set x column-set moves and
then replayed with full validity checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import LoweringError, MoveError
from .grid import Direction, OccupancyGrid, SiteCoord, TargetRegion
from .scheduler import SegmentTable, segment_table
from .shift_kernel import Axis

__all__ = [
    "TweezerMove",
    "MoveViolation",
    "trap_set",
    "validate_move",
    "apply_move",
    "lower",
    "simulate",
    "SimulationReport",
]

COLLISION = "collision"
OUT_OF_BOUNDS = "out-of-bounds"
UNINTENDED = "unintended-capture"

_HORIZONTAL = (Direction.E, Direction.W)


@dataclass(frozen=True)
class TweezerMove:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    direction: Direction
    steps: int = 1
    iteration: int = 0
    axis: Axis | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(set(map(int, self.rows)))))
        object.__setattr__(self, "cols", tuple(sorted(set(map(int, self.cols)))))
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.axis is not None:
            object.__setattr__(self, "axis", Axis(self.axis))
        if not self.rows or not self.cols:
            raise ValueError("a tweezer move needs at least one row and one column")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    @classmethod
    def _trusted(cls, rows, cols, direction, steps, iteration, axis) -> TweezerMove:
        # skips normalisation; callers pass sorted, de-duplicated int tuples
        move = object.__new__(cls)
        move.__dict__.update(
            rows=rows, cols=cols, direction=direction, steps=steps, iteration=iteration, axis=axis
        )
        return move

    def site_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        rr, cc = np.meshgrid(np.asarray(self.rows), np.asarray(self.cols), indexing="ij")
        return rr.reshape(-1), cc.reshape(-1)

    @property
    def size(self) -> int:
        return len(self.rows) * len(self.cols)


class MoveViolation(NamedTuple):
    kind: str
    sites: tuple[SiteCoord, ...]


def trap_set(move: TweezerMove) -> list[SiteCoord]:
    """Every (row, col) pair the AODs address, row-major."""
    return [SiteCoord(r, c) for r in move.rows for c in move.cols]


def _bits(grid) -> np.ndarray:
    return grid.bits if isinstance(grid, OccupancyGrid) else np.asarray(grid, dtype=bool)


def _sites(rr, cc) -> tuple[SiteCoord, ...]:
    return tuple(SiteCoord(int(r), int(c)) for r, c in zip(rr, cc))


def _check(bits: np.ndarray, move: TweezerMove, intended=None) -> list[MoveViolation]:
    w = bits.shape[0]
    rr, cc = move.site_arrays()
    dr, dc = move.direction.delta
    tr, tc = rr + dr * move.steps, cc + dc * move.steps
    out = []

    bad = (rr < 0) | (rr >= w) | (cc < 0) | (cc >= w) | (tr < 0) | (tr >= w) | (tc < 0) | (tc >= w)
    if bad.any():
        out.append(MoveViolation(OUT_OF_BOUNDS, _sites(rr[bad], cc[bad])))
        return out

    trapped = np.zeros_like(bits)
    trapped[rr, cc] = True
    carrying = bits[rr, cc]
    hit = carrying & bits[tr, tc] & ~trapped[tr, tc]
    if hit.any():
        out.append(MoveViolation(COLLISION, _sites(tr[hit], tc[hit])))
    if intended is not None:
        extra = carrying & ~intended[rr, cc]
        if extra.any():
            out.append(MoveViolation(UNINTENDED, _sites(rr[extra], cc[extra])))
    return out


def validate_move(grid, move: TweezerMove, intended: Iterable | None = None) -> list[MoveViolation]:
    """Violations caused by executing ``move`` on ``grid``; empty when the move is legal.

    ``intended`` optionally lists the sites whose atoms the schedule means to
    move; any other captured atom is reported as an unintended capture.
    """
    bits = _bits(grid)
    mask = None
    if intended is not None:
        mask = np.zeros_like(bits)
        for r, c in intended:
            mask[r, c] = True
    return _check(bits, move, mask)


def _apply_inplace(bits: np.ndarray, move: TweezerMove) -> None:
    rr, cc = move.site_arrays()
    dr, dc = move.direction.delta
    carrying = bits[rr, cc]
    bits[rr[carrying], cc[carrying]] = False
    bits[rr[carrying] + dr * move.steps, cc[carrying] + dc * move.steps] = True


def apply_move(grid, move: TweezerMove) -> OccupancyGrid:
    """Lift every trapped atom, then set them down displaced by ``direction x steps``."""
    bits = _bits(grid).copy()
    violations = _check(bits, move)
    if violations:
        raise MoveError(f"illegal move {move}", violations)
    _apply_inplace(bits, move)
    return OccupancyGrid(bits)


def _as_move(merged, lines, span) -> TweezerMove:
    if merged.direction.horizontal:
        return TweezerMove(tuple(lines), tuple(span), merged.direction, 1, merged.iteration, merged.axis)
    return TweezerMove(tuple(span), tuple(lines), merged.direction, 1, merged.iteration, merged.axis)


def _faults(bits, move: TweezerMove, intended=None) -> tuple[int, int, int]:
    dr, dc = move.direction.delta
    use = intended is not None
    return kernels.tweezer_faults(
        bits,
        np.asarray(move.rows, dtype=np.int64),
        np.asarray(move.cols, dtype=np.int64),
        dr * move.steps,
        dc * move.steps,
        intended if use else bits,
        use,
    )


def _apply_fast(bits, move: TweezerMove) -> None:
    dr, dc = move.direction.delta
    kernels.tweezer_apply(
        bits, np.asarray(move.rows, dtype=np.int64), np.asarray(move.cols, dtype=np.int64),
        dr * move.steps, dc * move.steps,
    )


def _lower_one(bits: np.ndarray, merged, combine: bool) -> list[TweezerMove]:
    lines = np.asarray(merged.lines, dtype=np.int64)
    seg = np.asarray(merged.segments, dtype=np.int64).reshape(-1, 2)
    lo, hi = np.ascontiguousarray(seg[:, 0]), np.ascontiguousarray(seg[:, 1])
    dr, dc = merged.direction.delta
    if combine:
        plan, unions, faults = kernels.lower_merged(bits, lines, lo, hi, merged.direction.horizontal, dr, dc)
        if not faults.any():
            return [
                _as_move(merged, lines[plan == p].tolist(), np.flatnonzero(unions[p]).tolist())
                for p in range(unions.shape[0])
            ]

    # identical segment ranges only, then one line per move as a last resort
    intended = np.zeros_like(bits)
    rr, cc = merged.site_arrays()
    intended[rr, cc] = True
    _, plan = np.unique(seg, axis=0, return_inverse=True)
    plan = plan.reshape(-1)
    moves = []
    for p in np.unique(plan):
        members = np.flatnonzero(plan == p)
        move = _as_move(merged, lines[members].tolist(), range(lo[members[0]], hi[members[0]]))
        if any(_faults(bits, move, intended)):
            singles = [_as_move(merged, [lines[m]], range(lo[m], hi[m])) for m in members]
            problems = [v for m in singles for v in _check(bits, m, intended)]
            if problems:
                raise LoweringError(
                    f"cannot lower {merged.direction.value} move at iteration {merged.iteration}, "
                    f"scan index {merged.scan_index}",
                    {"merged": merged, "violations": problems},
                )
            moves.extend(singles)
        else:
            moves.append(move)
    for move in moves:
        _apply_fast(bits, move)
    return moves


def lower(merged_moves: Sequence, grid, combine: bool = True, table: SegmentTable | None = None) -> list[TweezerMove]:
    """Turn merged schedule moves into legal tweezer moves, preserving order.

    Lines of one merged move that share a segment range become one tweezer
    move. With ``combine`` on, a group is folded into an earlier tweezer move
    when the enlarged cross product only adds traps on empty sites. Every
    emitted move is validated against the evolving grid. ``table`` is an
    optional precomputed :func:`segment_table` of ``merged_moves``.
    """
    merged_moves = list(merged_moves)
    bits = _bits(grid).copy()
    if not combine:
        out: list[TweezerMove] = []
        for merged in merged_moves:
            out.extend(_lower_one(bits, merged, False))
        return out

    if table is None:
        table = segment_table(merged_moves)
    seg_move, seg_line, seg_lo, seg_hi, _, move_dr, move_dc = table
    horiz = np.array([m.direction.horizontal for m in merged_moves], dtype=np.bool_)
    out = []
    start = 0
    while start < len(merged_moves):
        seg_plan, plan_move, plan_union, stop = kernels.lower_all(
            bits, seg_move, seg_line, seg_lo, seg_hi, horiz, move_dr, move_dc, start
        )
        _emit_plans(out, merged_moves, seg_plan, seg_line, plan_move, plan_union)
        if stop < len(merged_moves):
            out.extend(_lower_one(bits, merged_moves[stop], False))
        start = stop + 1
    return out


def _emit_plans(out, merged_moves, seg_plan, seg_line, plan_move, plan_union) -> None:
    if plan_move.size == 0:
        return
    lowered = seg_plan >= 0
    plan_of = seg_plan[lowered]
    order = np.argsort(plan_of, kind="stable")
    lines = seg_line[lowered][order].tolist()
    cuts = np.searchsorted(plan_of[order], np.arange(plan_move.size + 1)).tolist()
    pr, px = np.nonzero(plan_union)
    span_cuts = np.searchsorted(pr, np.arange(plan_move.size + 1)).tolist()
    px = px.tolist()
    trusted = TweezerMove._trusted
    for p, m in enumerate(plan_move.tolist()):
        merged = merged_moves[m]
        members = tuple(lines[cuts[p]:cuts[p + 1]])
        span = tuple(px[span_cuts[p]:span_cuts[p + 1]])
        if merged.direction in _HORIZONTAL:
            out.append(trusted(members, span, merged.direction, 1, merged.iteration, merged.axis))
        else:
            out.append(trusted(span, members, merged.direction, 1, merged.iteration, merged.axis))


@dataclass
class SimulationReport:
    initial: OccupancyGrid
    final: OccupancyGrid
    moves_executed: int
    violations: list[MoveViolation] = field(default_factory=list)
    failed_move: int | None = None
    target_history: list[int] = field(default_factory=list)
    iteration_history: dict[int, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def conserved(self) -> bool:
        return self.initial.popcount == self.final.popcount


def simulate(grid, moves: Sequence[TweezerMove], target: TargetRegion | None = None) -> SimulationReport:
    """Execute ``moves`` in order, stopping at the first illegal one.

    ``target_history`` holds the target popcount before the first move and
    after each executed move; ``iteration_history`` maps each move's
    iteration tag to the target popcount once its last move has run.
    """
    initial = grid if isinstance(grid, OccupancyGrid) else OccupancyGrid(grid)
    bits = initial.copy_bits()
    if target is not None:
        lo, hi = target.bounds(initial.width)
        occ = lambda: int(np.count_nonzero(bits[lo:hi, lo:hi]))  # noqa: E731
    else:
        occ = lambda: int(np.count_nonzero(bits))  # noqa: E731
    history = [occ()]
    per_iter: dict[int, int] = {}
    for k, move in enumerate(moves):
        if any(_faults(bits, move)):
            problems = _check(bits, move)
            return SimulationReport(initial, OccupancyGrid(bits), k, problems, k, history, per_iter)
        _apply_fast(bits, move)
        history.append(occ())
        per_iter[move.iteration] = history[-1]
    return SimulationReport(initial, OccupancyGrid(bits), len(moves), [], None, history, per_iter)
