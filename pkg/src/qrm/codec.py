"""On-disk formats: the packetized occupancy stream and the schedule file.

Packet stream (binary, little-endian)::

    offset  size  field
    0       4     magic b"QRMP"
    4       2     format version (1)
    6       2     reserved, zero
    8       4     W, grid width
    12      4     T, target side (0 if unspecified)
    16      4     popcount
    20      4     packet count, ceil(W*W / 1024)
    24      128n  packets

Each packet is sixteen little-endian 64-bit words; word 0 of packet 0 holds
row-major bits 0-63, least significant bit first. Bits past ``W*W`` in the
last packet must be zero.

The schedule file is JSON Lines: one ``header`` record, the ``move``
records in execution order, one ``trace`` record per atom and a closing
``summary`` record.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aod import TweezerMove
from .errors import CodecError, GridError
from .grid import Direction, OccupancyGrid, SiteCoord, check_width
from .latency import PACKET_BITS
from .scheduler import _DIRS, AtomTrace, TraceTable
from .shift_kernel import Axis

MAGIC = b"QRMP"
VERSION = 1
PACKET_BYTES = PACKET_BITS // 8
_HEADER = struct.Struct("<4sHHIIII")

SCHEDULE_FORMAT = "qrm-schedule"
SCHEDULE_VERSION = 1

# Enum .value is a Python-level descriptor; the writer looks names up instead
_DIR_TXT = {d: d.value for d in Direction}
_AXIS_TXT = {None: "null", **{a: f'"{a.value}"' for a in Axis}}


@dataclass(frozen=True, eq=False)
class PacketStream:
    width: int
    target: int
    popcount: int
    payload: bytes

    @property
    def packet_count(self) -> int:
        return len(self.payload) // PACKET_BYTES

    def packets(self) -> list[bytes]:
        return [self.payload[i:i + PACKET_BYTES] for i in range(0, len(self.payload), PACKET_BYTES)]

    def words(self) -> np.ndarray:
        """``(packets, 16)`` array of the little-endian 64-bit words."""
        return np.frombuffer(self.payload, dtype="<u8").reshape(-1, PACKET_BITS // 64)

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, 0, self.width, self.target, self.popcount, self.packet_count) + self.payload

    def __eq__(self, other):
        if not isinstance(other, PacketStream):
            return NotImplemented
        return (self.width, self.target, self.popcount, self.payload) == (
            other.width, other.target, other.popcount, other.payload
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> PacketStream:
        if len(data) < _HEADER.size:
            raise CodecError(f"truncated stream: {len(data)} bytes, header needs {_HEADER.size}")
        magic, version, reserved, width, target, popcount, n_packets = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CodecError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CodecError(f"unsupported packet stream version {version}")
        if reserved:
            raise CodecError("reserved header field must be zero")
        payload = data[_HEADER.size:]
        if len(payload) < n_packets * PACKET_BYTES:
            raise CodecError(f"truncated stream: header announces {n_packets} packets, found {len(payload)} bytes")
        if len(payload) > n_packets * PACKET_BYTES:
            raise CodecError("trailing bytes after the last packet")
        return cls(width, target, popcount, payload)


def pack_bitfield(grid: OccupancyGrid, target: int = 0) -> PacketStream:
    w = grid.width
    n_packets = -(-w * w // PACKET_BITS)
    bits = np.zeros(n_packets * PACKET_BITS, dtype=np.uint8)
    bits[: w * w] = grid.flat()
    return PacketStream(w, int(target), grid.popcount, np.packbits(bits, bitorder="little").tobytes())


def unpack_bitfield(stream: PacketStream) -> OccupancyGrid:
    try:
        w = check_width(stream.width)
    except GridError as exc:
        raise CodecError(str(exc)) from exc
    if stream.target and (stream.target % 2 or stream.target > w):
        raise CodecError(f"target side {stream.target} invalid for width {w}")
    expected = -(-w * w // PACKET_BITS)
    if len(stream.payload) != expected * PACKET_BYTES:
        raise CodecError(f"width {w} needs {expected} packets, stream has {len(stream.payload) / PACKET_BYTES:g}")
    bits = np.unpackbits(np.frombuffer(stream.payload, dtype=np.uint8), bitorder="little")
    if bits[w * w:].any():
        raise CodecError("nonzero padding bits after the last site")
    grid = OccupancyGrid(bits[: w * w].astype(bool).reshape(w, w))
    if grid.popcount != stream.popcount:
        raise CodecError(f"header popcount {stream.popcount} does not match payload popcount {grid.popcount}")
    return grid


def write_grid(path, grid: OccupancyGrid, target: int = 0) -> None:
    Path(path).write_bytes(pack_bitfield(grid, target).to_bytes())


def read_grid(path) -> tuple[OccupancyGrid, int]:
    """Load a packet stream file; returns the grid and the stored target side."""
    stream = PacketStream.from_bytes(Path(path).read_bytes())
    return unpack_bitfield(stream), stream.target


@dataclass
class ScheduleSummary:
    iterations: int
    success: bool
    residual_holes: list[SiteCoord]
    move_count: int
    iterations_run: int = 0
    merged_moves: int = 0
    target_history: list[int] = field(default_factory=list)


@dataclass
class ScheduleFile:
    width: int
    target: int
    algorithm: str
    moves: list[TweezerMove]
    traces: TraceTable
    summary: ScheduleSummary


def _move_record(k: int, m: TweezerMove) -> str:
    # hand-built JSON; the writer is on the schedule command's hot path
    return (
        f'{{"record":"move","ordinal":{k},"iteration":{m.iteration},"axis":{_AXIS_TXT[m.axis]},'
        f'"direction":"{_DIR_TXT[m.direction]}","steps":{m.steps},'
        f'"rows":{list(m.rows)},"cols":{list(m.cols)}}}'
    )


def _trace_lines(traces) -> list[str]:
    t = TraceTable.from_traces(traces)
    names = [d.value for d in _DIRS]
    hop = [f'["{names[k]}",{n}]' for k, n in zip(t.hop_dir.tolist(), t.hop_steps.tolist())]
    ptr = t.ptr.tolist()
    fmt = '{"record":"trace","origin":[%d,%d],"hops":[%s],"final":[%d,%d]}'
    return [
        fmt % (o[0], o[1], ",".join(hop[a:b]), f[0], f[1])
        for o, f, a, b in zip(t.origin.tolist(), t.final.tolist(), ptr[:-1], ptr[1:])
    ]


def dumps_schedule(sf: ScheduleFile) -> str:
    s = sf.summary
    lines = [
        json.dumps(
            {
                "record": "header",
                "format": SCHEDULE_FORMAT,
                "version": SCHEDULE_VERSION,
                "algorithm": sf.algorithm,
                "width": sf.width,
                "target": sf.target,
            },
            separators=(",", ":"),
        )
    ]
    lines.extend(_move_record(k, m) for k, m in enumerate(sf.moves))
    lines.extend(_trace_lines(sf.traces))
    lines.append(
        json.dumps(
            {
                "record": "summary",
                "iterations": s.iterations,
                "iterations_run": s.iterations_run,
                "success": s.success,
                "residual_holes": [list(h) for h in s.residual_holes],
                "move_count": s.move_count,
                "merged_moves": s.merged_moves,
                "target_history": list(s.target_history),
            },
            separators=(",", ":"),
        )
    )
    return "\n".join(lines) + "\n"


def _site(value, what) -> SiteCoord:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise CodecError(f"{what} must be a [row, col] pair, got {value!r}")
    return SiteCoord(*value)


def loads_schedule(text: str) -> ScheduleFile:
    header = summary = None
    moves: list[TweezerMove] = []
    traces: list[AtomTrace] = []
    last_ordinal = -1
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            kind = rec["record"]
            if kind == "header":
                if header is not None:
                    raise CodecError("duplicate header record")
                if rec.get("format") != SCHEDULE_FORMAT or rec.get("version") != SCHEDULE_VERSION:
                    raise CodecError(f"not a {SCHEDULE_FORMAT} v{SCHEDULE_VERSION} file")
                header = rec
            elif header is None:
                raise CodecError("first record must be the header")
            elif summary is not None:
                raise CodecError("records after the summary")
            elif kind == "move":
                if traces:
                    raise CodecError("move record after trace records")
                if rec["ordinal"] <= last_ordinal:
                    raise CodecError(f"move ordinals must increase strictly (got {rec['ordinal']} after {last_ordinal})")
                last_ordinal = rec["ordinal"]
                axis = rec.get("axis")
                moves.append(
                    TweezerMove(
                        tuple(rec["rows"]),
                        tuple(rec["cols"]),
                        Direction(rec["direction"]),
                        int(rec["steps"]),
                        int(rec["iteration"]),
                        Axis(axis) if axis is not None else None,
                    )
                )
            elif kind == "trace":
                hops = tuple((Direction(d), int(k)) for d, k in rec["hops"])
                traces.append(AtomTrace(_site(rec["origin"], "origin"), hops, _site(rec["final"], "final")))
            elif kind == "summary":
                summary = ScheduleSummary(
                    iterations=int(rec["iterations"]),
                    success=bool(rec["success"]),
                    residual_holes=[_site(h, "residual hole") for h in rec["residual_holes"]],
                    move_count=int(rec["move_count"]),
                    iterations_run=int(rec.get("iterations_run", 0)),
                    merged_moves=int(rec.get("merged_moves", 0)),
                    target_history=[int(x) for x in rec.get("target_history", [])],
                )
            else:
                raise CodecError(f"unknown record type {kind!r}")
        except CodecError as exc:
            raise CodecError(f"line {n}: {exc}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise CodecError(f"line {n}: malformed record ({exc})") from None
    if header is None:
        raise CodecError("empty schedule file")
    if summary is None:
        raise CodecError("missing summary record")
    if summary.move_count != len(moves):
        raise CodecError(f"summary announces {summary.move_count} moves, file has {len(moves)}")
    return ScheduleFile(
        int(header["width"]), int(header["target"]), str(header["algorithm"]), moves,
        TraceTable.from_traces(traces), summary,
    )


def write_schedule(path, sf: ScheduleFile) -> None:
    Path(path).write_text(dumps_schedule(sf))


def read_schedule(path) -> ScheduleFile:
    return loads_schedule(Path(path).read_text())
