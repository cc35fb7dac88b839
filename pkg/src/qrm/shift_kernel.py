"""Software model of the pipelined shift kernel.

A *line* is one row (or column) of a local quadrant as a bit vector whose
index 0 is nearest the array center. Scanning a line from index 0 outward
emits one shift command per hole; executing the commands in ascending scan
order slides every atom beyond each hole one step toward index 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import KernelError
from .grid import LocalQuadrant

__all__ = [
    "Axis",
    "SenPolicy",
    "enable_mask",
    "scan_line",
    "execute_commands",
    "stable_pack",
    "TransposeBuffer",
    "PassResult",
    "compress_pass",
    "PipelineTiming",
    "pass_latency",
    "iteration_latency",
]


class Axis(str, Enum):
    ROWS = "rows"
    COLUMNS = "columns"


@dataclass(frozen=True)
class SenPolicy:
    """Shift-enable policy. ``limit=None`` enables every scan index;
    ``limit=k`` suppresses commands at scan indices ``>= k``."""

    limit: int | None = None

    def __post_init__(self):
        if self.limit is not None and self.limit < 0:
            raise ValueError("s_en limit must be non-negative")

    @classmethod
    def parse(cls, text: str) -> SenPolicy:
        text = text.strip().lower()
        if text in ("", "all", "on"):
            return cls()
        if text.startswith("limit:"):
            return cls(int(text.split(":", 1)[1]))
        raise ValueError(f"unknown s_en policy {text!r}; use 'all' or 'limit:K'")

    def __str__(self):
        return "all" if self.limit is None else f"limit:{self.limit}"


def enable_mask(length: int, policy: SenPolicy | None = None) -> np.ndarray:
    mask = np.ones(length, dtype=np.uint8)
    if policy is not None and policy.limit is not None:
        mask[policy.limit:] = 0
    return mask


def _as_bits(x, name) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise KernelError(f"{name} must be a 1-D bit vector")
    return (arr != 0).astype(np.uint8)


def scan_line(line, s_en=None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(cmds, emitted)`` for one line.

    ``emitted`` is the bit pushed into the column buffers (the original line);
    ``cmds[i] = (not line[i]) and s_en[i]``.
    """
    line = _as_bits(line, "line")
    s_en = np.ones_like(line) if s_en is None else _as_bits(s_en, "s_en")
    if s_en.shape != line.shape:
        raise KernelError(f"line has {line.size} bits but s_en has {s_en.size}")
    return (1 - line) & s_en, line.copy()


def execute_commands(line, cmds) -> np.ndarray:
    """Apply shift commands sequentially in ascending scan index.

    The command scanned at index ``i`` fires at position ``i - k`` where ``k``
    commands already fired, and moves everything beyond that position one
    step toward index 0. Commands with nothing beyond them change nothing.
    """
    line = _as_bits(line, "line")
    cmds = _as_bits(cmds, "cmds")
    if cmds.shape != line.shape:
        raise KernelError(f"line has {line.size} bits but cmds has {cmds.size}")
    cur = line.copy()
    fired = 0
    for i in np.flatnonzero(cmds):
        if line[i]:
            raise KernelError(f"command at scan index {i} points at an atom, not a hole")
        pos = i - fired
        cur[pos:-1] = cur[pos + 1:]
        cur[-1] = 0
        fired += 1
    return cur


def stable_pack(line) -> np.ndarray:
    """Reference result of a fully enabled pass: all atoms at the low end."""
    line = _as_bits(line, "line")
    out = np.zeros_like(line)
    out[: int(line.sum())] = 1
    return out


class TransposeBuffer:
    """Column buffers filled one emitted line at a time.

    After ``n`` pushes, ``columns[j][r]`` holds bit ``j`` of line ``r``.
    """

    def __init__(self, width: int):
        self.width = width
        self._slots: list[np.ndarray] = []

    def push(self, emitted) -> None:
        emitted = _as_bits(emitted, "emitted")
        if emitted.size != self.width:
            raise KernelError(f"expected {self.width} bits, got {emitted.size}")
        self._slots.append(emitted)

    def extend(self, lines: np.ndarray) -> None:
        """Push every row of a ``(n, width)`` 0/1 array, in order."""
        if lines.ndim != 2 or lines.shape[1] != self.width:
            raise KernelError(f"expected rows of {self.width} bits")
        self._slots.extend(lines)

    def __len__(self):
        return len(self._slots)

    @property
    def columns(self) -> np.ndarray:
        if not self._slots:
            return np.zeros((self.width, 0), dtype=np.uint8)
        return np.stack(self._slots, axis=1)

    def column(self, j: int) -> np.ndarray:
        return self.columns[j]


@dataclass(frozen=True, eq=False)
class PassResult:
    """Outcome of one compress pass over a quadrant.

    ``hole`` and ``live`` are per-line arrays from the kernel: the current
    hole position at which each command fired, and whether it moved anything.
    """

    axis: Axis
    commands: np.ndarray
    quadrant: LocalQuadrant
    transpose: TransposeBuffer
    hole: np.ndarray
    live: np.ndarray

    @property
    def nonempty(self) -> int:
        return int(self.live.sum())


def _lines(bits: np.ndarray, axis: Axis) -> np.ndarray:
    return bits if Axis(axis) is Axis.ROWS else bits.T


def compress_pass(quadrant: LocalQuadrant, axis=Axis.ROWS, s_en=None) -> PassResult:
    axis = Axis(axis)
    lines = np.ascontiguousarray(_lines(quadrant.bits, axis), dtype=np.uint8)
    q_w = lines.shape[1]
    s_en = enable_mask(q_w) if s_en is None else _as_bits(s_en, "s_en")
    if s_en.size != q_w:
        raise KernelError(f"s_en has {s_en.size} bits, quadrant side is {q_w}")

    buf = TransposeBuffer(q_w)
    buf.extend(lines)
    cmds, out, hole, live = kernels.compress_lines(lines, s_en)
    new_bits = _lines(out.astype(bool), axis)
    return PassResult(
        axis=axis,
        commands=cmds,
        quadrant=LocalQuadrant(quadrant.quadrant, np.ascontiguousarray(new_bits)),
        transpose=buf,
        hole=hole,
        live=live,
    )


@dataclass(frozen=True)
class PipelineTiming:
    """Cycle counts of a kernel that accepts one new line per cycle."""

    q_w: int
    depth: int

    def __post_init__(self):
        if self.q_w < 1 or self.depth < 1:
            raise ValueError("q_w and depth must be positive")

    @property
    def pass_cycles(self) -> int:
        return self.q_w + self.depth

    @property
    def iteration_cycles(self) -> int:
        return 2 * self.q_w + self.depth


def pass_latency(q_w: int, depth: int | None = None) -> int:
    return PipelineTiming(q_w, q_w if depth is None else depth).pass_cycles


def iteration_latency(q_w: int, depth: int | None = None) -> int:
    """Row pass then column pass; the second pass overlaps all but the issue of its lines."""
    return PipelineTiming(q_w, q_w if depth is None else depth).iteration_cycles
