"""Occupancy grids, stochastic loading and quadrant coordinate algebra.

Coordinates are ``(row, col)`` with the origin at the top-left site; row 0 is
drawn at the top. A ``W x W`` grid splits into four ``Q_w x Q_w`` quadrants
(``Q_w = W // 2``). Each quadrant is flipped into a *local* frame whose
``(0, 0)`` corner touches the array center and whose indices grow outward, so
that one compression routine serves all four quadrants.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, NamedTuple

import numpy as np

from .errors import GridError

__all__ = [
    "OccupancyGrid",
    "SiteCoord",
    "TargetRegion",
    "QuadrantId",
    "Direction",
    "LocalQuadrant",
    "LoadConfig",
    "QuadrantReport",
    "check_width",
    "splitmix64",
    "splitmix64_uniform",
    "random_load",
    "split_quadrants",
    "merge_quadrants",
    "flip",
    "local_to_global",
    "global_to_local",
    "feasibility",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def check_width(width: int) -> int:
    width = int(width)
    if width <= 0 or width % 2:
        raise GridError(f"grid width must be a positive even integer, got {width}")
    return width


class SiteCoord(NamedTuple):
    row: int
    col: int


class QuadrantId(str, Enum):
    NW = "NW"
    NE = "NE"
    SW = "SW"
    SE = "SE"

    @property
    def north(self) -> bool:
        return self in (QuadrantId.NW, QuadrantId.NE)

    @property
    def west(self) -> bool:
        return self in (QuadrantId.NW, QuadrantId.SW)


class Direction(str, Enum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def horizontal(self) -> bool:
        return self in (Direction.E, Direction.W)


_DELTAS = {Direction.N: (-1, 0), Direction.S: (1, 0), Direction.E: (0, 1), Direction.W: (0, -1)}


class OccupancyGrid:
    """Square boolean occupancy map, treated as an immutable value."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim == 1:
            side = int(round(np.sqrt(arr.size)))
            if side * side != arr.size:
                raise GridError(f"{arr.size} bits do not form a square grid")
            arr = arr.reshape(side, side)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise GridError(f"occupancy must be square, got shape {arr.shape}")
        check_width(arr.shape[0])
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def empty(cls, width: int) -> OccupancyGrid:
        return cls(np.zeros((check_width(width),) * 2, dtype=bool))

    @classmethod
    def full(cls, width: int) -> OccupancyGrid:
        return cls(np.ones((check_width(width),) * 2, dtype=bool))

    @property
    def bits(self) -> np.ndarray:
        """Read-only ``(W, W)`` boolean view."""
        return self._bits

    @property
    def width(self) -> int:
        return self._bits.shape[0]

    @property
    def q_w(self) -> int:
        return self.width // 2

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self._bits))

    def flat(self) -> np.ndarray:
        """Row-major bit vector of length ``W**2``."""
        return self._bits.reshape(-1)

    def copy_bits(self) -> np.ndarray:
        return self._bits.copy()

    def __getitem__(self, site) -> bool:
        return bool(self._bits[site[0], site[1]])

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return hash((self.width, self._bits.tobytes()))

    def __repr__(self):
        return f"OccupancyGrid(width={self.width}, popcount={self.popcount})"


@dataclass(frozen=True)
class TargetRegion:
    """Centered ``T x T`` region that must end up defect-free."""

    side: int

    def __post_init__(self):
        if self.side <= 0 or self.side % 2:
            raise GridError(f"target side must be a positive even integer, got {self.side}")

    @property
    def quadrant_side(self) -> int:
        return self.side // 2

    def bounds(self, width: int) -> tuple[int, int]:
        """Half-open ``[lo, hi)`` index range shared by target rows and columns."""
        width = check_width(width)
        if self.side > width:
            raise GridError(f"target side {self.side} exceeds grid width {width}")
        half = width // 2
        return half - self.side // 2, half + self.side // 2

    def mask(self, width: int) -> np.ndarray:
        lo, hi = self.bounds(width)
        m = np.zeros((width, width), dtype=bool)
        m[lo:hi, lo:hi] = True
        return m

    def occupancy(self, grid: OccupancyGrid) -> int:
        lo, hi = self.bounds(grid.width)
        return int(np.count_nonzero(grid.bits[lo:hi, lo:hi]))

    def holes(self, grid: OccupancyGrid) -> list[SiteCoord]:
        lo, hi = self.bounds(grid.width)
        rows, cols = np.nonzero(~grid.bits[lo:hi, lo:hi])
        return [SiteCoord(int(r) + lo, int(c) + lo) for r, c in zip(rows, cols)]

    def is_filled(self, grid: OccupancyGrid) -> bool:
        lo, hi = self.bounds(grid.width)
        return bool(grid.bits[lo:hi, lo:hi].all())


@dataclass(frozen=True)
class LoadConfig:
    fill_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fill_probability <= 1.0:
            raise GridError(f"fill probability must lie in [0, 1], got {self.fill_probability}")
        if not 0 <= self.seed <= _MASK64:
            raise GridError("seed must be an unsigned 64-bit integer")


def splitmix64(seed: int) -> Iterator[int]:
    """Reference SplitMix64 stream on Python ints (slow, bit-exact)."""
    state = seed & _MASK64
    while True:
        state = (state + _GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        yield z ^ (z >> 31)


def splitmix64_uniform(seed: int, n: int) -> np.ndarray:
    """First ``n`` SplitMix64 draws from ``seed`` mapped to ``[0, 1)`` via their top 53 bits."""
    # uint64 array arithmetic wraps modulo 2**64, which is exactly what SplitMix64 needs.
    k = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + k * np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def random_load(width: int, cfg: LoadConfig = LoadConfig()) -> OccupancyGrid:
    """Stochastically load a ``width x width`` grid, one draw per site in row-major order."""
    width = check_width(width)
    u = splitmix64_uniform(cfg.seed, width * width)
    return OccupancyGrid((u < cfg.fill_probability).reshape(width, width))


@dataclass(frozen=True, eq=False)
class LocalQuadrant:
    """One quadrant in its flipped frame; ``bits[0, 0]`` touches the array center."""

    quadrant: QuadrantId
    bits: np.ndarray

    @property
    def side(self) -> int:
        return self.bits.shape[0]

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, LocalQuadrant):
            return NotImplemented
        return self.quadrant == other.quadrant and np.array_equal(self.bits, other.bits)


def flip(quadrant: QuadrantId, block: np.ndarray) -> np.ndarray:
    """Map a quadrant block between global and local orientation (an involution)."""
    quadrant = QuadrantId(quadrant)
    rows = slice(None, None, -1) if quadrant.north else slice(None)
    cols = slice(None, None, -1) if quadrant.west else slice(None)
    return block[rows, cols]


def _block_slices(quadrant: QuadrantId, q_w: int) -> tuple[slice, slice]:
    rows = slice(0, q_w) if quadrant.north else slice(q_w, 2 * q_w)
    cols = slice(0, q_w) if quadrant.west else slice(q_w, 2 * q_w)
    return rows, cols


def split_quadrants(grid: OccupancyGrid) -> dict[QuadrantId, LocalQuadrant]:
    q_w = grid.q_w
    out = {}
    for q in QuadrantId:
        rows, cols = _block_slices(q, q_w)
        out[q] = LocalQuadrant(q, np.ascontiguousarray(flip(q, grid.bits[rows, cols])))
    return out


def merge_quadrants(quadrants) -> OccupancyGrid:
    """Inverse of :func:`split_quadrants`; accepts a dict or an iterable of four quadrants."""
    if isinstance(quadrants, dict):
        quadrants = quadrants.values()
    quadrants = list(quadrants)
    if sorted(q.quadrant.value for q in quadrants) != sorted(q.value for q in QuadrantId):
        raise GridError("need exactly one LocalQuadrant per quadrant id")
    q_w = quadrants[0].side
    bits = np.zeros((2 * q_w, 2 * q_w), dtype=bool)
    for lq in quadrants:
        if lq.bits.shape != (q_w, q_w):
            raise GridError("quadrants must share one side length")
        rows, cols = _block_slices(lq.quadrant, q_w)
        bits[rows, cols] = flip(lq.quadrant, lq.bits)
    return OccupancyGrid(bits)


def _axis_to_global(local: int, q_w: int, toward_low: bool) -> int:
    # toward_low: the quadrant sits on the low-index side along this axis,
    # so the local axis runs backwards in global coordinates.
    return q_w - 1 - local if toward_low else q_w + local


def local_to_global(quadrant: QuadrantId, local, width: int) -> SiteCoord:
    width = check_width(width)
    q_w = width // 2
    quadrant = QuadrantId(quadrant)
    i, j = int(local[0]), int(local[1])
    if not (0 <= i < q_w and 0 <= j < q_w):
        raise GridError(f"local site {(i, j)} outside a {q_w}x{q_w} quadrant")
    return SiteCoord(_axis_to_global(i, q_w, quadrant.north), _axis_to_global(j, q_w, quadrant.west))


def global_to_local(site, width: int) -> tuple[QuadrantId, SiteCoord]:
    width = check_width(width)
    q_w = width // 2
    r, c = int(site[0]), int(site[1])
    if not (0 <= r < width and 0 <= c < width):
        raise GridError(f"site {(r, c)} outside a {width}x{width} grid")
    north, west = r < q_w, c < q_w
    quadrant = {
        (True, True): QuadrantId.NW,
        (True, False): QuadrantId.NE,
        (False, True): QuadrantId.SW,
        (False, False): QuadrantId.SE,
    }[(north, west)]
    i = q_w - 1 - r if north else r - q_w
    j = q_w - 1 - c if west else c - q_w
    return quadrant, SiteCoord(i, j)


@dataclass(frozen=True)
class QuadrantReport:
    quadrant: QuadrantId
    available: int
    required: int

    @property
    def feasible(self) -> bool:
        return self.available >= self.required


def feasibility(grid: OccupancyGrid, target: TargetRegion) -> dict[QuadrantId, QuadrantReport]:
    """Per-quadrant atom supply against the ``(T/2)**2`` sites each quadrant must fill."""
    target.bounds(grid.width)
    required = target.quadrant_side ** 2
    return {
        q: QuadrantReport(q, lq.popcount, required)
        for q, lq in split_quadrants(grid).items()
    }
