import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrm import kernels
from qrm.errors import KernelError
from qrm.grid import LocalQuadrant, QuadrantId
from qrm.shift_kernel import (
    Axis,
    PipelineTiming,
    SenPolicy,
    TransposeBuffer,
    compress_pass,
    enable_mask,
    execute_commands,
    iteration_latency,
    pass_latency,
    scan_line,
    stable_pack,
)

bit_lists = st.lists(st.integers(0, 1), min_size=1, max_size=40)


def oracle_execute(line, cmds):
    """Literal list model: each fired command deletes the hole and pads the far end."""
    cur = list(line)
    fired = 0
    for i, c in enumerate(cmds):
        if c:
            del cur[i - fired]
            cur.append(0)
            fired += 1
    return cur


def all_lines(length):
    return np.array(list(itertools.product((0, 1), repeat=length)), dtype=np.uint8)


def test_scan_line_complement_example():
    cmds, emitted = scan_line([1, 0, 1, 0, 0, 1])
    assert cmds.tolist() == [0, 1, 0, 1, 1, 0]
    assert emitted.tolist() == [1, 0, 1, 0, 0, 1]


def test_execute_example():
    line = [0, 1, 0, 0, 1, 1, 0, 1]
    cmds, _ = scan_line(line)
    assert execute_commands(line, cmds).tolist() == [1, 1, 1, 1, 0, 0, 0, 0]


def test_exhaustive_length_8_against_list_oracle():
    for line in all_lines(8):
        cmds, _ = scan_line(line)
        assert execute_commands(line, cmds).tolist() == oracle_execute(line, cmds)


@given(bit_lists, st.integers(0, 40))
def test_partial_enable_matches_oracle(line, limit):
    s_en = enable_mask(len(line), SenPolicy(limit))
    cmds, _ = scan_line(line, s_en)
    assert cmds.tolist() == [int(not b and i < limit) for i, b in enumerate(line)]
    assert execute_commands(line, cmds).tolist() == oracle_execute(line, cmds)


@given(bit_lists)
def test_pack_is_idempotent_and_conserving(line):
    cmds, _ = scan_line(line)
    once = execute_commands(line, cmds)
    assert once.sum() == sum(line)
    again = execute_commands(once, scan_line(once)[0])
    assert np.array_equal(once, again)


def test_command_on_atom_rejected():
    with pytest.raises(KernelError):
        execute_commands([1, 0], [1, 0])


def test_length_mismatch_rejected():
    with pytest.raises(KernelError):
        scan_line([1, 0, 1], [1, 1])
    with pytest.raises(KernelError):
        execute_commands([1, 0, 1], [0, 1])


def test_batched_kernel_matches_scalar_ops():
    lines = all_lines(10)
    s_en = np.ones(10, dtype=np.uint8)
    cmds, out, hole, live = kernels.compress_lines(lines, s_en)
    for k, line in enumerate(lines):
        c, _ = scan_line(line)
        assert np.array_equal(cmds[k], c)
        assert np.array_equal(out[k], stable_pack(line))
        before = np.cumsum(c) - c
        idx = np.flatnonzero(c)
        assert np.array_equal(hole[k][idx], idx - before[idx])
        beyond = np.array([line[i + 1:].any() for i in idx], dtype=bool)
        assert np.array_equal(live[k][idx].astype(bool), beyond)
        assert not live[k][c == 0].any()


def test_sen_policy_parse():
    assert SenPolicy.parse("all") == SenPolicy()
    assert SenPolicy.parse("limit:3") == SenPolicy(3)
    assert str(SenPolicy(3)) == "limit:3" and str(SenPolicy()) == "all"
    with pytest.raises(ValueError):
        SenPolicy.parse("bogus")
    with pytest.raises(ValueError):
        SenPolicy(-1)


def test_transpose_buffer_layout():
    buf = TransposeBuffer(3)
    buf.push([1, 0, 0])
    buf.push([0, 1, 1])
    assert buf.columns.tolist() == [[1, 0], [0, 1], [0, 1]]
    assert buf.column(2).tolist() == [0, 1]
    with pytest.raises(KernelError):
        buf.push([1, 0])


@pytest.mark.parametrize("axis", list(Axis))
def test_compress_pass_packs_every_line(axis):
    rng = np.random.default_rng(5)
    bits = rng.random((6, 6)) < 0.5
    res = compress_pass(LocalQuadrant(QuadrantId.NE, bits), axis)
    view = res.quadrant.bits if axis is Axis.ROWS else res.quadrant.bits.T
    src = bits if axis is Axis.ROWS else bits.T
    for k in range(6):
        assert np.array_equal(view[k], stable_pack(src[k]).astype(bool))
    assert np.array_equal(res.transpose.columns, src.T.astype(np.uint8))
    assert res.quadrant.popcount == int(bits.sum())


def test_compress_pass_respects_enable_limit():
    bits = np.array([[0, 0, 1, 1], [0, 1, 0, 1], [1, 1, 1, 1], [0, 0, 0, 0]], dtype=bool)
    res = compress_pass(LocalQuadrant(QuadrantId.SW, bits), Axis.ROWS, enable_mask(4, SenPolicy(1)))
    assert res.quadrant.bits.astype(int).tolist() == [[0, 1, 1, 0], [1, 0, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]]
    assert res.nonempty == 2


def test_pipeline_timing():
    assert pass_latency(25) == 50
    assert iteration_latency(25) == 75
    assert iteration_latency(25, depth=5) == 55
    assert PipelineTiming(4, 2).pass_cycles == 6
    with pytest.raises(ValueError):
        PipelineTiming(0, 1)
