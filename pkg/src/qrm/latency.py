"""Indicative cycle-count model of the rearrangement pipeline.

The model adds three parts: packet input (one 1024-bit packet per cycle),
shift-kernel compute (``2 * Q_w + D`` cycles per row+column iteration) and
output (input packets plus a fixed cost per move record). It is a rough
estimate and is not calibrated against measured hardware; ``depth`` and
``include_io`` are exposed so the assumptions stay visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import check_width
from .shift_kernel import iteration_latency

PACKET_BITS = 1024


@dataclass(frozen=True)
class LatencyModel:
    clock_hz: float = 250e6
    depth: int | None = None        # per-line processing cycles; None means Q_w
    include_io: bool = False
    cycles_per_move: int = 1
    packet_bits: int = PACKET_BITS

    def __post_init__(self):
        if self.clock_hz <= 0:
            raise ValueError("clock frequency must be positive")
        if self.packet_bits != PACKET_BITS:
            raise ValueError(f"packet width is fixed at {PACKET_BITS} bits")
        if self.depth is not None and self.depth < 1:
            raise ValueError("depth must be positive")
        if self.cycles_per_move < 0:
            raise ValueError("cycles_per_move must be non-negative")


@dataclass(frozen=True)
class CycleEstimate:
    input_packets: int
    input_cycles: int
    compute_cycles: int
    output_cycles: int
    clock_hz: float

    @property
    def total_cycles(self) -> int:
        return self.input_cycles + self.compute_cycles + self.output_cycles

    @property
    def wall_time_s(self) -> float:
        return self.total_cycles / self.clock_hz

    @property
    def wall_time_us(self) -> float:
        return self.wall_time_s * 1e6


def packet_count(width: int) -> int:
    width = check_width(width)
    return math.ceil(width * width / PACKET_BITS)


def estimate(width: int, iterations: int, model: LatencyModel | None = None, moves: int = 0) -> CycleEstimate:
    """Cycle estimate for ``iterations`` row+column rounds on a ``width``-site array.

    ``moves`` (the number of schedule records written back) only matters
    when the model includes I/O.
    """
    model = model or LatencyModel()
    width = check_width(width)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if moves < 0:
        raise ValueError("moves must be non-negative")
    q_w = width // 2
    packets = packet_count(width)
    compute = iterations * iteration_latency(q_w, model.depth)
    if model.include_io:
        in_cycles = packets
        out_cycles = packets + model.cycles_per_move * moves
    else:
        in_cycles = out_cycles = 0
    return CycleEstimate(packets, in_cycles, compute, out_cycles, model.clock_hz)
