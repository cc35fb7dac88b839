"""Command-line workflow: generate, schedule, verify, bench, show, latency.

Exit codes: 0 success, 1 verification failure, 2 input or parse error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec
from .aod import lower, simulate
from .bench import ALGORITHMS, run_bench
from .errors import QRMError
from .grid import LoadConfig, OccupancyGrid, SiteCoord, TargetRegion, feasibility, random_load
from .latency import LatencyModel, estimate
from .scheduler import SchedulerConfig, replay_traces
from .shift_kernel import SenPolicy

EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2

ATOM, HOLE = "●", "·"


class InputError(QRMError):
    """Bad command-line input or unreadable file."""


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def cmd_generate(width: int, target: int, p: float, seed: int, out_path) -> OccupancyGrid:
    TargetRegion(target).bounds(width)
    grid = random_load(width, LoadConfig(p, seed))
    codec.write_grid(out_path, grid, target)
    return grid


def cmd_schedule(in_path, algo: str = "qrm", cfg: SchedulerConfig | None = None, out_path=None,
                 target: int | None = None, combine: bool = True) -> codec.ScheduleFile:
    grid, stored = codec.read_grid(in_path)
    side = target or stored
    if not side:
        raise InputError("grid file has no target side; pass --target")
    region = TargetRegion(side)
    region.bounds(grid.width)
    if algo not in ALGORITHMS:
        raise InputError(f"unknown algorithm {algo!r}")
    short = [r for r in feasibility(grid, region).values() if not r.feasible]
    if short:
        _warn(
            "infeasible load: "
            + ", ".join(f"{r.quadrant.value} has {r.available} atoms for {r.required} target sites" for r in short)
        )

    result = ALGORITHMS[algo](grid, region, cfg or SchedulerConfig())
    moves = lower(result.moves, grid, combine=combine, table=result.segments)
    sf = codec.ScheduleFile(
        width=grid.width,
        target=side,
        algorithm=algo,
        moves=moves,
        traces=result.traces,
        summary=codec.ScheduleSummary(
            iterations=result.iterations,
            success=result.success,
            residual_holes=result.residual_holes,
            move_count=len(moves),
            iterations_run=result.iterations_run,
            merged_moves=len(result.moves),
            target_history=result.target_history,
        ),
    )
    if out_path is not None:
        codec.write_schedule(out_path, sf)
    return sf


@dataclass
class VerifyResult:
    problems: list[str] = field(default_factory=list)
    moves_executed: int = 0
    popcount: int = 0
    target_fill: tuple[int, int] = (0, 0)

    @property
    def ok(self) -> bool:
        return not self.problems


def verify_schedule(grid: OccupancyGrid, sf: codec.ScheduleFile) -> VerifyResult:
    if sf.width != grid.width:
        raise InputError(f"schedule is for width {sf.width}, grid has width {grid.width}")
    region = TargetRegion(sf.target)
    out = VerifyResult(popcount=grid.popcount)
    report = simulate(grid, sf.moves, region)
    out.moves_executed = report.moves_executed
    out.target_fill = (region.occupancy(report.final), sf.target * sf.target)
    for v in report.violations:
        out.problems.append(f"move {report.failed_move}: {v.kind} at {[tuple(s) for s in v.sites[:8]]}")
    if report.violations:
        return out
    if not report.conserved:
        out.problems.append(f"popcount changed from {report.initial.popcount} to {report.final.popcount}")
    filled = region.is_filled(report.final)
    if filled != sf.summary.success:
        out.problems.append(f"summary claims success={sf.summary.success}, replay gives {filled}")
    holes = sorted(region.holes(report.final))
    if holes != sorted(SiteCoord(*h) for h in sf.summary.residual_holes):
        out.problems.append(f"summary lists {len(sf.summary.residual_holes)} residual holes, replay finds {len(holes)}")
    if sf.traces or grid.popcount:
        origins = np.zeros_like(grid.bits)
        for t in sf.traces:
            origins[t.origin] = True
        if len(sf.traces) != grid.popcount or not np.array_equal(origins, grid.bits):
            out.problems.append("trace origins do not match the initial occupancy")
        else:
            try:
                ends = replay_traces(sf.traces, grid.width)
            except QRMError as exc:
                out.problems.append(f"traces do not replay: {exc}")
            else:
                if ends != report.final:
                    out.problems.append("trace end points do not match the simulated final occupancy")
    return out


def cmd_verify(grid_path, schedule_path) -> VerifyResult:
    grid, _ = codec.read_grid(grid_path)
    return verify_schedule(grid, codec.read_schedule(schedule_path))


def render(grid: OccupancyGrid, target: int = 0) -> str:
    """Row 0 at the top; target sites are bracketed when ``target`` is set."""
    lo = hi = -1
    if target:
        lo, hi = TargetRegion(target).bounds(grid.width)
    lines = []
    for r, row in enumerate(grid.bits):
        cells = []
        for c, v in enumerate(row):
            ch = ATOM if v else HOLE
            inside = lo <= r < hi and lo <= c < hi
            cells.append(f"[{ch}]" if inside else f" {ch} ")
        lines.append("".join(cells).rstrip())
    return "\n".join(lines)


def _fill_lines(history, side) -> list[str]:
    total = side * side
    return [
        f"  {'initial' if k == 0 else f'iteration {k}':<12} {n:>5} / {total}" for k, n in enumerate(history)
    ]


def cmd_show(path, grid_path=None) -> str:
    data = Path(path).read_bytes()
    if data[:4] == codec.MAGIC:
        grid = codec.unpack_bitfield(codec.PacketStream.from_bytes(data))
        _, side = codec.read_grid(path)
        lines = [f"W={grid.width} T={side or '-'} atoms={grid.popcount}"]
        if side:
            lines.append(f"target fill {TargetRegion(side).occupancy(grid)} / {side * side}")
        return "\n".join(lines + [render(grid, side)])

    try:
        sf = codec.loads_schedule(data.decode())
    except UnicodeDecodeError as exc:
        raise codec.CodecError("neither a packet stream nor a schedule file") from exc
    s = sf.summary
    lines = [
        f"{sf.algorithm} schedule W={sf.width} T={sf.target}",
        f"  moves {s.move_count} ({s.merged_moves} merged), iterations {s.iterations}, "
        f"success {'yes' if s.success else 'no'}, residual holes {len(s.residual_holes)}",
        "target fill per iteration:",
        *_fill_lines(s.target_history, sf.target),
    ]
    if grid_path is not None:
        grid, _ = codec.read_grid(grid_path)
        report = simulate(grid, sf.moves, TargetRegion(sf.target))
        lines += ["initial:", render(grid, sf.target), "final:", render(report.final, sf.target)]
        if report.violations:
            lines.append(f"replay stopped at move {report.failed_move}: {report.violations[0].kind}")
    return "\n".join(lines)


def parse_seeds(text: str) -> list[int]:
    seeds: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        for sep in ("..", "-", ":"):
            if sep in part[1:]:
                a, b = part.split(sep, 1)
                lo, hi = int(a), int(b)
                if hi < lo:
                    raise ValueError(f"empty seed range {part!r}")
                seeds.update(range(lo, hi + 1))
                break
        else:
            seeds.add(int(part))
    return sorted(seeds)


def _config(args) -> SchedulerConfig:
    return SchedulerConfig(
        max_iterations=args.max_iterations, sen=SenPolicy.parse(args.sen), early_stop=not args.no_early_stop
    )


def _add_sched_flags(p) -> None:
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="qrm")
    p.add_argument("--max-iterations", type=int, default=None, help="iteration cap (default: W/2)")
    p.add_argument("--sen", default="all", help="shift-enable policy: 'all' or 'limit:K'")
    p.add_argument("--no-early-stop", action="store_true", help="keep iterating after a fixpoint")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random load as a packet stream")
    g.add_argument("--width", "-W", type=int, required=True)
    g.add_argument("--target", "-T", type=int, required=True)
    g.add_argument("--fill", "-p", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o", required=True)

    s = sub.add_parser("schedule", help="compute, lower and write a schedule")
    s.add_argument("grid")
    s.add_argument("--out", "-o", required=True)
    s.add_argument("--target", "-T", type=int, default=None, help="override the target side stored in the grid")
    s.add_argument("--no-combine", action="store_true", help="one tweezer move per segment range")
    _add_sched_flags(s)

    v = sub.add_parser("verify", help="replay a schedule through the simulator")
    v.add_argument("grid")
    v.add_argument("schedule")

    b = sub.add_parser("bench", help="run many seeds and report")
    b.add_argument("--width", "-W", type=int, default=50)
    b.add_argument("--target", "-T", type=int, default=30)
    b.add_argument("--fill", "-p", type=float, default=0.5)
    b.add_argument("--seeds", default="0-99", help="e.g. 0-99 or 1,5,9")
    b.add_argument("--csv", help="write the per-seed table here instead of stdout")
    b.add_argument("--json", help="write the full report as JSON")
    _add_sched_flags(b)

    sh = sub.add_parser("show", help="render a grid or summarize a schedule")
    sh.add_argument("path")
    sh.add_argument("--grid", help="initial grid, to render a schedule's start and end")

    lt = sub.add_parser("latency", help="cycle estimate of the hardware pipeline")
    lt.add_argument("--width", "-W", type=int, default=50)
    lt.add_argument("--iterations", type=int, default=4)
    lt.add_argument("--clock-mhz", type=float, default=250.0)
    lt.add_argument("--depth", type=int, default=None, help="per-line cycles (default: W/2)")
    lt.add_argument("--include-io", action="store_true")
    lt.add_argument("--moves", type=int, default=0)
    return ap


def _run(args) -> int:
    if args.command == "generate":
        grid = cmd_generate(args.width, args.target, args.fill, args.seed, args.out)
        print(f"wrote {args.out}: W={args.width} T={args.target} atoms={grid.popcount}")
        return EXIT_OK

    if args.command == "schedule":
        sf = cmd_schedule(args.grid, args.algo, _config(args), args.out, args.target, not args.no_combine)
        s = sf.summary
        print(
            f"{sf.algorithm}: {s.move_count} moves ({s.merged_moves} merged) in {s.iterations} iterations, "
            f"success={'yes' if s.success else 'no'}, residual holes={len(s.residual_holes)}"
        )
        return EXIT_OK

    if args.command == "verify":
        res = cmd_verify(args.grid, args.schedule)
        for p in res.problems:
            print(f"FAIL {p}")
        if res.ok:
            print(
                f"ok: {res.moves_executed} moves valid, {res.popcount} atoms conserved, "
                f"target {res.target_fill[0]}/{res.target_fill[1]}"
            )
        return EXIT_OK if res.ok else EXIT_VERIFY

    if args.command == "bench":
        report = run_bench(args.width, args.target, args.fill, parse_seeds(args.seeds), args.algo, _config(args))
        if args.csv:
            Path(args.csv).write_text(report.to_csv())
        if args.json:
            Path(args.json).write_text(report.to_json() + "\n")
        if not args.csv:
            print(report.to_csv())
        print(report.summary())
        return EXIT_OK

    if args.command == "show":
        print(cmd_show(args.path, args.grid))
        return EXIT_OK

    if args.command == "latency":
        model = LatencyModel(args.clock_mhz * 1e6, args.depth, args.include_io)
        est = estimate(args.width, args.iterations, model, args.moves)
        print(
            f"W={args.width} iterations={args.iterations}: {est.total_cycles} cycles "
            f"({est.compute_cycles} compute, {est.input_cycles} in, {est.output_cycles} out) "
            f"= {est.wall_time_us:.3f} us at {args.clock_mhz:g} MHz"
        )
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (QRMError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
