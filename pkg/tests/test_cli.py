import json
import subprocess
import sys

import pytest

from qrm import codec
from qrm.cli import EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main, parse_seeds, render
from qrm.grid import OccupancyGrid


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def pipeline(tmp_path):
    g, s = tmp_path / "grid.qrmp", tmp_path / "sched.jsonl"
    assert run("generate", "-W", 8, "-T", 4, "-p", 0.5, "--seed", 1, "-o", g) == EXIT_OK
    assert run("schedule", g, "-o", s) == EXIT_OK
    return g, s


def test_end_to_end(pipeline, capsys):
    g, s = pipeline
    assert run("verify", g, s) == EXIT_OK
    assert "conserved" in capsys.readouterr().out


@pytest.mark.parametrize("algo", ["qrm", "baseline"])
@pytest.mark.parametrize("w, t", [(8, 4), (12, 6), (20, 10)])
def test_regression_set_verifies(tmp_path, algo, w, t):
    for seed in range(5):
        g, s = tmp_path / f"g{seed}.qrmp", tmp_path / f"s{seed}.jsonl"
        assert run("generate", "-W", w, "-T", t, "--seed", seed, "-o", g) == EXIT_OK
        assert run("schedule", g, "-o", s, "--algo", algo) == EXIT_OK
        assert run("verify", g, s) == EXIT_OK


def test_schedule_flags(tmp_path, capsys):
    g, s = tmp_path / "g.qrmp", tmp_path / "s.jsonl"
    run("generate", "-W", 12, "-T", 4, "--seed", 2, "-o", g)
    assert run("schedule", g, "-o", s, "--sen", "limit:2", "--max-iterations", 3, "--no-combine") == EXIT_OK
    assert run("verify", g, s) == EXIT_OK
    assert run("schedule", g, "-o", s, "--target", 8) == EXIT_OK
    assert codec.read_schedule(s).target == 8
    assert run("verify", g, s) == EXIT_OK


def test_full_grid_zero_moves(tmp_path, capsys):
    g, s = tmp_path / "g.qrmp", tmp_path / "s.jsonl"
    run("generate", "-W", 8, "-T", 4, "-p", 1.0, "-o", g)
    assert run("schedule", g, "-o", s) == EXIT_OK
    sf = codec.read_schedule(s)
    assert sf.summary.move_count == 0 and sf.summary.success
    assert run("verify", g, s) == EXIT_OK


def test_infeasible_load_warns(tmp_path, capsys):
    g, s = tmp_path / "g.qrmp", tmp_path / "s.jsonl"
    run("generate", "-W", 8, "-T", 8, "-p", 0.5, "-o", g)
    assert run("schedule", g, "-o", s) == EXIT_OK
    assert "infeasible" in capsys.readouterr().err
    assert run("verify", g, s) == EXIT_OK


def _rewrite(path, fn):
    lines = path.read_text().splitlines()
    recs = [json.loads(l) for l in lines]
    fn(recs)
    path.write_text("\n".join(json.dumps(r) for r in recs) + "\n")


def test_success_flag_mismatch_fails(pipeline):
    g, s = pipeline

    def flip(recs):
        recs[-1]["success"] = not recs[-1]["success"]

    _rewrite(s, flip)
    assert run("verify", g, s) == EXIT_VERIFY


def test_illegal_move_fails(pipeline, capsys):
    g, s = pipeline

    def push_off(recs):
        move = next(r for r in recs if r["record"] == "move")
        move["direction"], move["rows"], move["cols"] = "N", [0], list(range(8))

    _rewrite(s, push_off)
    assert run("verify", g, s) == EXIT_VERIFY
    assert "out-of-bounds" in capsys.readouterr().out


def test_bad_trace_fails(pipeline):
    g, s = pipeline

    def bend(recs):
        t = next(r for r in recs if r["record"] == "trace")
        t["hops"].append(["N", 1])

    _rewrite(s, bend)
    assert run("verify", g, s) == EXIT_VERIFY


def test_input_errors(tmp_path, pipeline, capsys):
    g, s = pipeline
    junk = tmp_path / "junk"
    junk.write_bytes(b"QRMP\x01")
    assert run("verify", junk, s) == EXIT_INPUT
    assert run("verify", g, junk) == EXIT_INPUT
    assert run("schedule", tmp_path / "missing", "-o", s) == EXIT_INPUT
    assert run("generate", "-W", 7, "-T", 4, "-o", junk) == EXIT_INPUT
    assert run("schedule", g, "-o", s, "--sen", "sometimes") == EXIT_INPUT
    other = tmp_path / "other.qrmp"
    run("generate", "-W", 10, "-T", 4, "-o", other)
    assert run("verify", other, s) == EXIT_INPUT
    with pytest.raises(SystemExit) as err:
        run("schedule")
    assert err.value.code == EXIT_INPUT


def test_show_grid_and_schedule(pipeline, capsys):
    g, s = pipeline
    assert run("show", g) == EXIT_OK
    out = capsys.readouterr().out
    assert "●" in out and "·" in out and "target fill" in out
    assert run("show", s, "--grid", g) == EXIT_OK
    out = capsys.readouterr().out
    assert "iteration 1" in out and "final:" in out


def test_render_orientation():
    bits = [[1, 0], [0, 0]]
    assert render(OccupancyGrid(bits)).splitlines()[0].strip().startswith("●")
    assert "[" in render(OccupancyGrid(bits), 2)


def test_bench_outputs(tmp_path, capsys):
    out_csv, out_json = tmp_path / "b.csv", tmp_path / "b.json"
    assert run("bench", "-W", 8, "-T", 4, "--seeds", "0-4", "--csv", out_csv, "--json", out_json) == EXIT_OK
    assert "success rate" in capsys.readouterr().out
    assert out_csv.read_text().count("\n") == 6
    assert json.loads(out_json.read_text())["aggregate"]["runs"] == 5
    assert run("bench", "-W", 8, "-T", 4, "--seeds", "3") == EXIT_OK
    assert capsys.readouterr().out.startswith("seed,")


def test_latency_command(capsys):
    assert run("latency", "-W", 50, "--iterations", 4) == EXIT_OK
    assert "300 cycles" in capsys.readouterr().out


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("5..6,1") == [1, 5, 6]
    assert parse_seeds("7") == [7]
    with pytest.raises(ValueError):
        parse_seeds("4-2")


def test_console_entry_point(tmp_path):
    g = tmp_path / "g.qrmp"
    proc = subprocess.run(
        [sys.executable, "-m", "qrm.cli", "generate", "-W", "4", "-T", "2", "-o", str(g)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and g.exists()
