"""Seeded benchmark harness: schedule, lower and simulate many random loads."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

from .aod import lower, simulate
from .grid import LoadConfig, TargetRegion, random_load
from .scheduler import SchedulerConfig, baseline_schedule, qrm_schedule

ALGORITHMS = {"qrm": qrm_schedule, "baseline": baseline_schedule}


@dataclass(frozen=True)
class BenchRow:
    seed: int
    popcount: int
    success: bool
    iterations: int
    merged_moves: int
    lowered_moves: int
    valid: bool             # simulator found no violation and popcount was conserved
    wall_time_s: float      # host time for schedule + lower; the only nondeterministic column


@dataclass
class BenchReport:
    width: int
    target: int
    fill_probability: float
    algorithm: str
    rows: list[BenchRow] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return sum(r.success for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def valid_rate(self) -> float:
        return sum(r.valid for r in self.rows) / len(self.rows) if self.rows else 0.0

    def iteration_distribution(self) -> dict[int, int]:
        return dict(sorted(Counter(r.iterations for r in self.rows).items()))

    def aggregate(self) -> dict:
        def med(attr):
            return statistics.median(getattr(r, attr) for r in self.rows) if self.rows else 0

        return {
            "runs": len(self.rows),
            "success_rate": self.success_rate,
            "valid_rate": self.valid_rate,
            "median_iterations": med("iterations"),
            "median_merged_moves": med("merged_moves"),
            "median_lowered_moves": med("lowered_moves"),
            "median_wall_time_s": med("wall_time_s"),
            "iteration_distribution": {str(k): v for k, v in self.iteration_distribution().items()},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(BenchRow.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow(asdict(r))
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "target": self.target,
                "fill_probability": self.fill_probability,
                "algorithm": self.algorithm,
                "aggregate": self.aggregate(),
                "rows": [asdict(r) for r in self.rows],
            },
            indent=2,
        )

    def summary(self) -> str:
        agg = self.aggregate()
        dist = ", ".join(f"{k}: {v}" for k, v in self.iteration_distribution().items()) or "none"
        return "\n".join(
            [
                f"{self.algorithm} W={self.width} T={self.target} p={self.fill_probability} over {agg['runs']} seeds",
                f"  success rate        {agg['success_rate']:.1%}",
                f"  valid schedules     {agg['valid_rate']:.1%}",
                f"  iterations (count)  {dist}",
                f"  median moves        {agg['median_merged_moves']} merged, {agg['median_lowered_moves']} lowered",
                f"  median host time    {agg['median_wall_time_s'] * 1e3:.2f} ms",
            ]
        )


def run_one(width: int, target: TargetRegion, p: float, seed: int, algorithm: str, cfg: SchedulerConfig) -> BenchRow:
    grid = random_load(width, LoadConfig(p, seed))
    t0 = time.perf_counter()
    result = ALGORITHMS[algorithm](grid, target, cfg)
    tweezer = lower(result.moves, grid)
    elapsed = time.perf_counter() - t0
    report = simulate(grid, tweezer, target)
    valid = report.ok and report.conserved and report.final == result.final
    return BenchRow(
        seed, grid.popcount, result.success, result.iterations, len(result.moves), len(tweezer), valid, elapsed
    )


def run_bench(
    width: int,
    target: int,
    fill_probability: float = 0.5,
    seeds=range(100),
    algorithm: str = "qrm",
    cfg: SchedulerConfig | None = None,
) -> BenchReport:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    cfg = cfg or SchedulerConfig()
    region = TargetRegion(target)
    rows = [run_one(width, region, fill_probability, s, algorithm, cfg) for s in sorted(set(seeds))]
    return BenchReport(width, target, fill_probability, algorithm, rows)
