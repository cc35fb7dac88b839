"""Quadrant-based rearrangement scheduling and the center-column baseline.

``qrm_schedule`` runs the shift kernel on the four flipped quadrants, maps
every non-empty shift command back to global coordinates and merges the
commands of quadrants that share a side of the array into one move per scan
index. ``baseline_schedule`` fills the target column by column (then row by
row) from the center outward on the unsplit grid. Both emit the same
:class:`MergedMove` records, so lowering, simulation and tracing treat them
alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import MergeError, ScheduleError
from .grid import (
    Direction,
    OccupancyGrid,
    QuadrantId,
    SiteCoord,
    TargetRegion,
    merge_quadrants,
    split_quadrants,
)
from .shift_kernel import Axis, SenPolicy, compress_pass, enable_mask

log = logging.getLogger(__name__)

__all__ = [
    "QuadrantCommand",
    "MergedMove",
    "AtomTrace",
    "TraceTable",
    "SchedulerConfig",
    "ScheduleResult",
    "move_direction",
    "command_to_global",
    "merge_commands",
    "pass_commands",
    "apply_merged",
    "qrm_schedule",
    "baseline_schedule",
    "segment_table",
    "SegmentTable",
    "trace_atoms",
    "replay_traces",
]


class QuadrantCommand(NamedTuple):
    """One shift command in local quadrant coordinates.

    ``segment`` is the half-open local range ``[hole + 1, Q_w)`` that moves one
    step toward index 0 when the command fires; ``empty`` marks commands that
    move no atom.
    """

    quadrant: QuadrantId
    iteration: int
    axis: Axis
    line: int
    scan_index: int
    segment: tuple[int, int]
    empty: bool = False


class MergedMove(NamedTuple):
    """All lines on one side of the array that shift one step at the same scan index.

    ``lines`` are global row indices for horizontal moves and global column
    indices for vertical ones; ``segments[k]`` is the half-open global range
    along line ``lines[k]`` that moves.
    """

    iteration: int
    axis: Axis
    scan_index: int
    direction: Direction
    lines: tuple[int, ...]
    segments: tuple[tuple[int, int], ...]

    def site_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        seg = np.asarray(self.segments, dtype=np.int64).reshape(-1, 2)
        lengths = seg[:, 1] - seg[:, 0]
        offsets = np.cumsum(lengths) - lengths
        along = np.arange(int(lengths.sum()), dtype=np.int64) - np.repeat(offsets - seg[:, 0], lengths)
        across = np.repeat(np.asarray(self.lines, dtype=np.int64), lengths)
        if self.direction.horizontal:
            return across, along
        return along, across

    def sites(self) -> list[SiteCoord]:
        rr, cc = self.site_arrays()
        return [SiteCoord(int(r), int(c)) for r, c in zip(rr, cc)]


class AtomTrace(NamedTuple):
    origin: SiteCoord
    hops: tuple[tuple[Direction, int], ...]
    final: SiteCoord

    def replay(self) -> SiteCoord:
        r, c = self.origin
        for d, steps in self.hops:
            dr, dc = d.delta
            r, c = r + dr * steps, c + dc * steps
        return SiteCoord(r, c)


class TraceTable(Sequence):
    """Compact, read-only sequence of :class:`AtomTrace` backed by arrays.

    Atom ``k`` starts at ``origin[k]``, ends at ``final[k]`` and makes the
    hops ``hop_dir[ptr[k]:ptr[k+1]]`` (indices into ``Direction``) with the
    matching ``hop_steps``. Items are built on access.
    """

    __slots__ = ("origin", "final", "ptr", "hop_dir", "hop_steps", "_items")

    def __init__(self, origin, final, ptr, hop_dir, hop_steps):
        self.origin = np.asarray(origin, dtype=np.int64).reshape(-1, 2)
        self.final = np.asarray(final, dtype=np.int64).reshape(-1, 2)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.hop_dir = np.asarray(hop_dir, dtype=np.int64)
        self.hop_steps = np.asarray(hop_steps, dtype=np.int64)
        self._items = None

    @classmethod
    def from_traces(cls, traces: Iterable[AtomTrace]) -> TraceTable:
        if isinstance(traces, TraceTable):
            return traces
        traces = list(traces)
        counts = [len(t.hops) for t in traces]
        ptr = np.zeros(len(traces) + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        hops = [h for t in traces for h in t.hops]
        return cls(
            [tuple(t.origin) for t in traces],
            [tuple(t.final) for t in traces],
            ptr,
            [_DIRS.index(Direction(d)) for d, _ in hops],
            [n for _, n in hops],
        )

    def _materialize(self) -> list[AtomTrace]:
        if self._items is None:
            new = tuple.__new__
            steps = self.hop_steps.tolist()
            dirs = [_DIRS[d] for d in self.hop_dir.tolist()]
            ptr = self.ptr.tolist()
            self._items = [
                new(AtomTrace, (new(SiteCoord, o), tuple(zip(dirs[a:b], steps[a:b])), new(SiteCoord, f)))
                for o, f, a, b in zip(
                    map(tuple, self.origin.tolist()), map(tuple, self.final.tolist()), ptr[:-1], ptr[1:]
                )
            ]
        return self._items

    def __len__(self):
        return self.origin.shape[0]

    def __getitem__(self, k):
        return self._materialize()[k]

    def __iter__(self):
        return iter(self._materialize())

    def __eq__(self, other):
        if isinstance(other, TraceTable):
            return all(
                np.array_equal(a, b)
                for a, b in zip(
                    (self.origin, self.final, self.ptr, self.hop_dir, self.hop_steps),
                    (other.origin, other.final, other.ptr, other.hop_dir, other.hop_steps),
                )
            )
        if isinstance(other, Sequence):
            return list(self) == list(other)
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"TraceTable({len(self)} atoms, {self.hop_dir.size} hops)"


@dataclass(frozen=True)
class SchedulerConfig:
    max_iterations: int | None = None   # None: Q_w
    sen: SenPolicy = field(default_factory=SenPolicy)
    early_stop: bool = True

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def iteration_cap(self, q_w: int) -> int:
        return q_w if self.max_iterations is None else self.max_iterations


class SegmentTable(NamedTuple):
    """Moves flattened to one row per shifted segment, plus per-move displacement."""

    seg_move: np.ndarray
    seg_line: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    seg_horiz: np.ndarray
    move_dr: np.ndarray
    move_dc: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence[SegmentTable]) -> SegmentTable:
        if not parts:
            z = np.zeros(0, dtype=np.int64)
            return cls(z, z, z, z, np.zeros(0, dtype=np.bool_), z, z)
        offsets = np.cumsum([0] + [p.move_dr.size for p in parts[:-1]])
        return cls(
            np.concatenate([p.seg_move + off for p, off in zip(parts, offsets)]),
            *(np.concatenate([getattr(p, f) for p in parts]) for f in cls._fields[1:]),
        )


@dataclass(eq=False)
class ScheduleResult:
    algorithm: str
    target: TargetRegion
    initial: OccupancyGrid
    final: OccupancyGrid
    moves: list[MergedMove]
    traces: TraceTable
    iterations: int        # iterations that emitted at least one move
    iterations_run: int    # loop passes actually executed
    target_history: list[int]  # target popcount before iteration 1, then after each
    segments: SegmentTable | None = field(default=None, repr=False)

    @property
    def residual_holes(self) -> list[SiteCoord]:
        return self.target.holes(self.final)

    @property
    def success(self) -> bool:
        return not self.residual_holes


def move_direction(quadrant: QuadrantId, axis: Axis) -> Direction:
    """Direction that points from the quadrant's side toward the array center."""
    if Axis(axis) is Axis.ROWS:
        return Direction.E if quadrant.west else Direction.W
    return Direction.S if quadrant.north else Direction.N


def _to_global(index: int, q_w: int, low_side: bool) -> int:
    return q_w - 1 - index if low_side else q_w + index


def _range_to_global(lo: int, hi: int, q_w: int, low_side: bool) -> tuple[int, int]:
    if low_side:
        return q_w - hi, q_w - lo
    return q_w + lo, q_w + hi


def command_to_global(cmd: QuadrantCommand, q_w: int) -> tuple[int, tuple[int, int], Direction]:
    """Global line index, global segment range and direction of a local command."""
    q = QuadrantId(cmd.quadrant)
    if Axis(cmd.axis) is Axis.ROWS:
        line = _to_global(cmd.line, q_w, q.north)
        seg = _range_to_global(*cmd.segment, q_w, q.west)
    else:
        line = _to_global(cmd.line, q_w, q.west)
        seg = _range_to_global(*cmd.segment, q_w, q.north)
    return line, seg, move_direction(q, cmd.axis)


def merge_commands(commands: Iterable[QuadrantCommand], q_w: int) -> list[MergedMove]:
    """Merge the commands of one ``(iteration, axis, scan index)`` group.

    Horizontal commands from NW and SW become one eastward move, NE and SE one
    westward move; vertical commands from NW and NE one southward move, SW and
    SE one northward move. Empty shifts are dropped.
    """
    commands = list(commands)
    if not commands:
        return []
    keys = {(c.iteration, Axis(c.axis), c.scan_index) for c in commands}
    if len(keys) != 1:
        raise MergeError(f"cannot merge commands from different groups: {sorted(keys, key=str)}")
    iteration, axis, scan_index = keys.pop()

    by_dir: dict[Direction, dict[int, tuple[int, int]]] = {}
    for cmd in commands:
        if cmd.empty:
            continue
        line, seg, d = command_to_global(cmd, q_w)
        bucket = by_dir.setdefault(d, {})
        if line in bucket:
            raise MergeError(f"line {line} carries two commands at scan index {scan_index}")
        bucket[line] = seg

    order = (Direction.E, Direction.W) if axis is Axis.ROWS else (Direction.S, Direction.N)
    out = []
    for d in order:
        bucket = by_dir.get(d)
        if not bucket:
            continue
        lines = tuple(sorted(bucket))
        out.append(MergedMove(iteration, axis, scan_index, d, lines, tuple(bucket[l] for l in lines)))
    return out


def apply_merged(bits: np.ndarray, move: MergedMove) -> None:
    """Shift the segments of ``move`` one step in place; raises on a collision."""
    rr, cc = move.site_arrays()
    dr, dc = move.direction.delta
    moving = bits[rr, cc].copy()
    tr, tc = rr + dr, cc + dc
    w = bits.shape[0]
    if moving.any():
        mr, mc = tr[moving], tc[moving]
        if (mr < 0).any() or (mr >= w).any() or (mc < 0).any() or (mc >= w).any():
            raise ScheduleError(f"move {move} pushes an atom off the grid")
    bits[rr, cc] = False
    inb = (tr >= 0) & (tr < w) & (tc >= 0) & (tc < w)
    if (bits[tr[moving & inb], tc[moving & inb]]).any():
        raise ScheduleError(f"move {move} lands an atom on an occupied site")
    bits[tr[moving], tc[moving]] = True


def pass_commands(result, quadrant: QuadrantId, iteration: int, include_empty: bool = False) -> list[QuadrantCommand]:
    """Shift commands of one compress pass as :class:`QuadrantCommand` records."""
    q_w = result.hole.shape[1]
    src = result.commands if include_empty else result.live
    lines, scans = np.nonzero(src)
    return [
        QuadrantCommand(quadrant, iteration, result.axis, line, i, (int(result.hole[line, i]) + 1, q_w), not result.live[line, i])
        for line, i in zip(lines.tolist(), scans.tolist())
    ]


def _merge_pass(results: dict, iteration: int, axis: Axis, q_w: int) -> tuple[list[MergedMove], SegmentTable]:
    """Array version of :func:`merge_commands` over every scan index of one pass.

    Also returns the segment table of the merged moves, built from the same arrays.
    """
    cols = ([], [], [], [], [])
    for q, res in results.items():
        lines, scans = np.nonzero(res.live)
        if lines.size == 0:
            continue
        hole = res.hole[lines, scans]
        line_low, seg_low = (q.north, q.west) if axis is Axis.ROWS else (q.west, q.north)
        glines = q_w - 1 - lines if line_low else q_w + lines
        if seg_low:
            lo, hi = np.zeros_like(hole), q_w - 1 - hole
        else:
            lo, hi = q_w + hole + 1, np.full_like(hole, 2 * q_w)
        # group key orders moves by scan index, then side
        for col, v in zip(cols, (2 * scans + (0 if seg_low else 1), glines, lo, hi)):
            col.append(v)
    if not cols[0]:
        return [], SegmentTable.concat([])
    group, gl_a, lo_a, hi_a = (np.concatenate(c).astype(np.int64) for c in cols[:4])
    order = np.argsort(group * (2 * q_w) + gl_a, kind="stable")
    group, gl_a, lo_a, hi_a = group[order], gl_a[order], lo_a[order], hi_a[order]
    cut = np.flatnonzero(group[1:] != group[:-1]) + 1
    dirs = (Direction.E, Direction.W) if axis is Axis.ROWS else (Direction.S, Direction.N)
    bounds = [0, *cut.tolist(), len(group)]
    heads = group[np.asarray(bounds[:-1])].tolist()
    gl, lo, hi = gl_a.tolist(), lo_a.tolist(), hi_a.tolist()
    new = tuple.__new__
    moves = [
        new(MergedMove, (iteration, axis, g >> 1, dirs[g & 1], tuple(gl[a:b]), tuple(zip(lo[a:b], hi[a:b]))))
        for g, a, b in zip(heads, bounds[:-1], bounds[1:])
    ]
    seg_move = np.zeros(len(group), dtype=np.int64)
    seg_move[cut] = 1
    seg_move = np.cumsum(seg_move)
    step = np.where(np.asarray(heads) & 1, -1, 1).astype(np.int64)
    zero = np.zeros(len(moves), dtype=np.int64)
    horizontal = axis is Axis.ROWS
    segs = SegmentTable(
        seg_move, gl_a, lo_a, hi_a,
        np.full(len(group), horizontal, dtype=np.bool_),
        zero if horizontal else step,
        step if horizontal else zero,
    )
    return moves, segs


def qrm_schedule(grid: OccupancyGrid, target: TargetRegion, cfg: SchedulerConfig | None = None) -> ScheduleResult:
    cfg = cfg or SchedulerConfig()
    target.bounds(grid.width)
    q_w = grid.q_w
    s_en = enable_mask(q_w, cfg.sen)
    quads = split_quadrants(grid)
    moves: list[MergedMove] = []
    tables: list[SegmentTable] = []
    history = [target.occupancy(grid)]
    used = run = 0
    current = grid

    if not target.is_filled(grid):
        for iteration in range(1, cfg.iteration_cap(q_w) + 1):
            run += 1
            emitted = 0
            for axis in (Axis.ROWS, Axis.COLUMNS):
                results = {}
                for q in QuadrantId:
                    results[q] = compress_pass(quads[q], axis, s_en)
                    quads[q] = results[q].quadrant
                merged, table = _merge_pass(results, iteration, axis, q_w)
                emitted += len(merged)
                moves.extend(merged)
                if merged:
                    tables.append(table)
            current = merge_quadrants(quads)
            history.append(target.occupancy(current))
            if emitted:
                used += 1
            elif cfg.early_stop:
                break
            if target.is_filled(current):
                break

    segments = SegmentTable.concat(tables)
    return ScheduleResult(
        algorithm="qrm",
        target=target,
        initial=grid,
        final=current,
        moves=moves,
        traces=trace_atoms(moves, grid, segments),
        iterations=used,
        iterations_run=run,
        target_history=history,
        segments=segments,
    )


def baseline_schedule(grid: OccupancyGrid, target: TargetRegion, cfg: SchedulerConfig | None = None) -> ScheduleResult:
    """Center-column-first filling on the whole array.

    For each target column, nearest the center first, every row with a hole
    there shifts its outer segment one step inward until the hole is filled
    or the row has no atom left outside it; all such rows move together.
    The same is then done for target rows with vertical moves.
    """
    cfg = cfg or SchedulerConfig()
    lo, hi = target.bounds(grid.width)
    w, half = grid.width, grid.width // 2
    bits = grid.copy_bits()
    moves: list[MergedMove] = []
    history = [target.occupancy(grid)]
    used = run = 0

    def sweep(iteration, axis, view):
        # view: lines along axis 0, positions along axis 1 (a transposed view for columns)
        count = 0
        inward, outward = (Direction.E, Direction.W) if axis is Axis.ROWS else (Direction.S, Direction.N)
        for d in range(half - lo):
            for c, direction in ((half - 1 - d, inward), (half + d, outward)):
                seg = (0, c) if direction is inward else (c + 1, w)
                while True:
                    need = ~view[:, c] & view[:, seg[0]:seg[1]].any(axis=1)
                    lines = np.flatnonzero(need)
                    if lines.size == 0:
                        break
                    move = MergedMove(iteration, axis, d, direction, tuple(lines.tolist()), (seg,) * lines.size)
                    apply_merged(bits, move)
                    moves.append(move)
                    count += 1
        return count

    if not target.is_filled(grid):
        for iteration in range(1, cfg.iteration_cap(grid.q_w) + 1):
            run += 1
            emitted = sweep(iteration, Axis.ROWS, bits)
            emitted += sweep(iteration, Axis.COLUMNS, bits.T)
            history.append(int(bits[lo:hi, lo:hi].sum()))
            if emitted:
                used += 1
            elif cfg.early_stop:
                break
            if bits[lo:hi, lo:hi].all():
                break

    return ScheduleResult(
        algorithm="baseline",
        target=target,
        initial=grid,
        final=OccupancyGrid(bits),
        moves=moves,
        traces=trace_atoms(moves, grid),
        iterations=used,
        iterations_run=run,
        target_history=history,
    )


_DIRS = tuple(Direction)
_DELTA = {d: d.delta for d in Direction}


def _runs(values) -> list[tuple[int, int]]:
    """Contiguous ``[lo, hi)`` runs of a sorted index sequence."""
    out = []
    for v in values:
        if out and out[-1][1] == v:
            out[-1][1] = v + 1
        else:
            out.append([v, v + 1])
    return [tuple(r) for r in out]


def segment_table(moves: Sequence) -> SegmentTable:
    """Flatten merged or tweezer moves into per-segment and per-move arrays.

    Returns ``(seg_move, seg_line, seg_lo, seg_hi, seg_horiz, move_dr,
    move_dc)`` as consumed by :func:`qrm.kernels.trace_replay`.
    """
    seg_move, seg_line, seg_lo, seg_hi, seg_horiz = [], [], [], [], []
    move_dr, move_dc = [], []
    for m, move in enumerate(moves):
        d = move.direction if type(move.direction) is Direction else Direction(move.direction)
        steps = getattr(move, "steps", 1)
        dr, dc = _DELTA[d]
        move_dr.append(dr * steps)
        move_dc.append(dc * steps)
        if hasattr(move, "segments"):
            n = len(move.lines)
            seg_line.extend(move.lines)
            los, his = zip(*move.segments)
            seg_lo.extend(los)
            seg_hi.extend(his)
            horiz = dc != 0
        else:
            # tweezer move: one segment per row and contiguous run of columns
            runs = _runs(move.cols)
            n = len(move.rows) * len(runs)
            for r in move.rows:
                for lo, hi in runs:
                    seg_line.append(r)
                    seg_lo.append(lo)
                    seg_hi.append(hi)
            horiz = True
        seg_move.extend([m] * n)
        seg_horiz.extend([horiz] * n)
    i64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    return SegmentTable(
        i64(seg_move), i64(seg_line), i64(seg_lo), i64(seg_hi), np.asarray(seg_horiz, dtype=np.bool_),
        i64(move_dr), i64(move_dc),
    )


def trace_atoms(moves: Sequence, grid: OccupancyGrid, table: SegmentTable | None = None) -> TraceTable:
    """Follow every atom of ``grid`` through ``moves``.

    ``moves`` may hold :class:`MergedMove` or tweezer moves, or be a
    :class:`ScheduleResult`. ``table`` is an optional precomputed
    :func:`segment_table` of ``moves``. Consecutive hops in one direction are
    coalesced. Traces are ordered by origin, row-major.
    """
    if hasattr(moves, "moves"):
        table = table if table is not None else moves.segments
        moves = moves.moves
    moves = list(moves)
    w = grid.width
    ids = np.full((w, w), -1, dtype=np.int64)
    rows, cols = np.nonzero(grid.bits)
    n = rows.size
    ids[rows, cols] = np.arange(n)
    if table is None:
        table = segment_table(moves)
    ev_atom, ev_move, status, bad = kernels.trace_replay(ids, *table)
    if status:
        what = "pushes an atom off the grid" if status == 1 else "lands an atom on an occupied site"
        raise ScheduleError(f"move {bad} ({moves[bad]}) {what}")

    move_dir = np.array([_DIRS.index(Direction(m.direction)) for m in moves], dtype=np.int64)
    move_steps = np.array([getattr(m, "steps", 1) for m in moves], dtype=np.int64)
    ptr = np.zeros(n + 1, dtype=np.int64)
    hop_dir = hop_steps = np.zeros(0, dtype=np.int64)
    if ev_atom.size:
        order = np.argsort(ev_atom, kind="stable")
        atom, mv = ev_atom[order], ev_move[order]
        dcode, steps = move_dir[mv], move_steps[mv]
        start = np.ones(atom.size, dtype=bool)
        start[1:] = (atom[1:] != atom[:-1]) | (dcode[1:] != dcode[:-1])
        hop_steps = np.bincount(np.cumsum(start) - 1, weights=steps).astype(np.int64)
        hop_dir = dcode[start]
        np.cumsum(np.bincount(atom[start], minlength=n), out=ptr[1:])

    r2, c2 = np.nonzero(ids >= 0)
    final = np.empty((n, 2), dtype=np.int64)
    final[ids[r2, c2]] = np.stack([r2, c2], axis=1)
    return TraceTable(np.stack([rows, cols], axis=1), final, ptr, hop_dir, hop_steps)


def replay_traces(traces: Iterable[AtomTrace], width: int) -> OccupancyGrid:
    """Occupancy obtained by replaying every trace from its origin."""
    bits = np.zeros((width, width), dtype=bool)
    for t in traces:
        r, c = t.replay()
        if not (0 <= r < width and 0 <= c < width) or bits[r, c]:
            raise ScheduleError(f"trace from {tuple(t.origin)} ends off-grid or on another atom")
        bits[r, c] = True
    return OccupancyGrid(bits)
