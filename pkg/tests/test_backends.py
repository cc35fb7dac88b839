"""The numba kernels and their numpy twins must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from qrm import kernels
from qrm.aod import lower
from qrm.grid import LoadConfig, TargetRegion, random_load
from qrm.scheduler import qrm_schedule, segment_table

pytestmark = pytest.mark.skipif(not kernels.JIT_ENABLED, reason="numba backend disabled")

i64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731


@pytest.mark.parametrize("length", [1, 7, 25, 64])
def test_compress_lines(length):
    rng = np.random.default_rng(length)
    lines = (rng.random((300, length)) < 0.5).astype(np.uint8)
    s_en = (rng.random(length) < 0.8).astype(np.uint8)
    a = kernels.compress_lines_numpy(lines, s_en)
    b = kernels.compress_lines_numba(lines, s_en)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_tweezer_faults_and_apply():
    rng = np.random.default_rng(1)
    for _ in range(200):
        bits = rng.random((10, 10)) < 0.4
        rows = np.unique(rng.integers(0, 10, 3))
        cols = np.unique(rng.integers(0, 10, 3))
        dr, dc = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.integers(4)]
        intended = rng.random((10, 10)) < 0.5
        for use in (False, True):
            assert kernels.tweezer_faults_numpy(bits, rows, cols, dr, dc, intended, use) == \
                kernels.tweezer_faults_numba(bits, rows, cols, dr, dc, intended, use)
        if sum(kernels.tweezer_faults_numpy(bits, rows, cols, dr, dc, intended, False)) == 0:
            a, b = bits.copy(), bits.copy()
            kernels.tweezer_apply_numpy(a, rows, cols, dr, dc)
            kernels.tweezer_apply_numba(b, rows, cols, dr, dc)
            assert np.array_equal(a, b)


@pytest.mark.parametrize("seed", range(4))
def test_lowering_and_tracing(seed):
    g = random_load(30, LoadConfig(0.5, seed))
    moves = qrm_schedule(g, TargetRegion(16)).moves
    seg_move, seg_line, seg_lo, seg_hi, seg_horiz, dr, dc = segment_table(moves)
    horiz = np.array([m.direction.horizontal for m in moves])
    a_bits, b_bits = g.copy_bits(), g.copy_bits()
    a = kernels.lower_all_numpy(a_bits, seg_move, seg_line, seg_lo, seg_hi, horiz, dr, dc, 0)
    b = kernels.lower_all_numba(b_bits, seg_move, seg_line, seg_lo, seg_hi, horiz, dr, dc, 0)
    for x, y in zip(a, b):
        assert np.array_equal(np.asarray(x), np.asarray(y))
    assert np.array_equal(a_bits, b_bits)

    ids = np.full((30, 30), -1, dtype=np.int64)
    r, c = np.nonzero(g.bits)
    ids[r, c] = np.arange(r.size)
    args = (seg_move, seg_line, seg_lo, seg_hi, seg_horiz, dr, dc)
    a = kernels.trace_replay_numpy(ids.copy(), *args)
    b = kernels.trace_replay_numba(ids.copy(), *args)
    for x, y in zip(a, b):
        assert np.array_equal(np.asarray(x), np.asarray(y))


def test_numpy_process_writes_identical_schedule(tmp_path):
    from qrm import codec
    from qrm.cli import cmd_schedule

    grid = tmp_path / "g.qrmp"
    codec.write_grid(grid, random_load(40, LoadConfig(0.5, 9)), 20)
    cmd_schedule(grid, out_path=tmp_path / "jit.jsonl")
    env = dict(os.environ, QRM_DISABLE_JIT="1")
    subprocess.run(
        [sys.executable, "-m", "qrm.cli", "schedule", str(grid), "-o", str(tmp_path / "np.jsonl")],
        env=env, check=True, capture_output=True,
    )
    probe = subprocess.run(
        [sys.executable, "-c", "from qrm import kernels; print(kernels.BACKEND)"],
        env=env, check=True, capture_output=True, text=True,
    )
    assert probe.stdout.strip() == "numpy"
    assert (tmp_path / "np.jsonl").read_text() == (tmp_path / "jit.jsonl").read_text()
