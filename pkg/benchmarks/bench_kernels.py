"""Compare the numba kernels against their numpy twins.

Times each kernel on inputs taken from a seeded W=50 schedule, checks that
both variants return the same arrays, then times the full ``schedule``
command once per backend in a subprocess with ``QRM_DISABLE_JIT`` toggled.

    python benchmarks/bench_kernels.py [--width 50] [--target 30] [--seed 0] [--repeat 20]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import tempfile
import timeit
from pathlib import Path

import numpy as np

from qrm import codec, kernels
from qrm.grid import LoadConfig, TargetRegion, random_load, split_quadrants
from qrm.scheduler import qrm_schedule
from qrm.shift_kernel import enable_mask

_E2E = """
import statistics, sys, time
from qrm import kernels
from qrm.cli import cmd_schedule
src, out, n = sys.argv[1], sys.argv[2], int(sys.argv[3])
cmd_schedule(src, out_path=out)
times = []
for _ in range(n):
    t0 = time.perf_counter()
    cmd_schedule(src, out_path=out)
    times.append(time.perf_counter() - t0)
print(kernels.BACKEND, statistics.median(times) * 1e3, min(times) * 1e3)
"""


def _best_ms(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def _same(a, b) -> bool:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return len(a) == len(b) and all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))


def kernel_cases(width: int, target: int, seed: int):
    grid = random_load(width, LoadConfig(0.5, seed))
    res = qrm_schedule(grid, TargetRegion(target))
    q_w = width // 2
    lines = np.ascontiguousarray(next(iter(split_quadrants(grid).values())).bits, dtype=np.uint8)
    s_en = enable_mask(q_w)
    seg_move, seg_line, seg_lo, seg_hi, seg_horiz, move_dr, move_dc = res.segments
    horiz = np.array([m.direction.horizontal for m in res.moves], dtype=np.bool_)
    bits = grid.bits.copy()
    ids = np.full((width, width), -1, dtype=np.int64)
    r, c = np.nonzero(grid.bits)
    ids[r, c] = np.arange(r.size)
    return {
        "compress_lines": (lambda: (lines, s_en)),
        "lower_all": (lambda: (bits.copy(), seg_move, seg_line, seg_lo, seg_hi, horiz, move_dr, move_dc, 0)),
        "trace_replay": (lambda: (ids.copy(), *res.segments)),
    }


def end_to_end(width: int, target: int, seed: int, runs: int) -> list[str]:
    out = []
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "grid.qrmp"
        codec.write_grid(src, random_load(width, LoadConfig(0.5, seed)), target)
        for flag in ("", "1"):
            env = {**os.environ, "QRM_DISABLE_JIT": flag}
            proc = subprocess.run(
                [sys.executable, "-c", _E2E, str(src), str(Path(tmp) / "s.jsonl"), str(runs)],
                env=env, capture_output=True, text=True, check=True,
            )
            backend, med, best = proc.stdout.split()
            out.append(f"{'schedule command':<16} {backend:<6} median {float(med):8.2f} ms  min {float(best):8.2f} ms")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=50)
    ap.add_argument("--target", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--e2e-runs", type=int, default=10)
    args = ap.parse_args(argv)

    print(f"W={args.width} T={args.target} seed={args.seed}, best of {args.repeat}")
    print(f"{'kernel':<16} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  equal")
    for name, make in kernel_cases(args.width, args.target, args.seed).items():
        fast, slow = getattr(kernels, f"{name}_numba"), getattr(kernels, f"{name}_numpy")
        equal = _same(fast(*make()), slow(*make()))
        t_fast = _best_ms(lambda: fast(*make()), args.repeat)
        t_slow = _best_ms(lambda: slow(*make()), args.repeat)
        print(f"{name:<16} {t_fast:10.3f} {t_slow:10.3f} {t_slow / t_fast:7.1f}x  {equal}")
    for line in end_to_end(args.width, args.target, args.seed, args.e2e_runs):
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
