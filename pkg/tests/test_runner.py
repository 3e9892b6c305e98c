from __future__ import annotations

import csv
import io
import statistics
from dataclasses import replace

import numpy as np
import pytest

from manetsec import runner
from manetsec.cli import main
from manetsec.network import Protocol, Simulation
from manetsec.runner import (
    CSV_FIELDS,
    ParseError,
    SchemaMismatch,
    ValidationError,
    load_scenario,
    parse_scenario,
    read_rows,
    rows_to_csv,
    run_sweep,
    summarize,
    summarize_rows,
)

TINY = """
node_count = 40
area_width = 400
area_height = 400
sim_duration = 4
cbr_pairs = 2
"""


@pytest.fixture
def tiny():
    return parse_scenario(TINY, "desk")


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ------------------------------------------------------------------ load_scenario

def test_empty_file_gives_published_defaults(tmp_path):
    sc = load_scenario(write(tmp_path, ""))
    w = sc.world
    assert w.node_count == 100 and w.area == (1000.0, 1000.0)
    assert w.radio_range == 250.0 and w.sim_duration == 50.0
    assert w.pause_time == 5.0 and w.traffic.packet_size == 512
    assert sc.protocol == "both"


def test_negative_range_rejected(tmp_path):
    with pytest.raises(ValidationError, match="radio_range"):
        load_scenario(write(tmp_path, "radio_range = -5\n"))


def test_partial_override_changes_only_that_key(tmp_path):
    base = load_scenario(write(tmp_path, "", "a.cfg"))
    sc = load_scenario(write(tmp_path, "speed = 30  # m/s\n", "b.cfg"))
    assert sc.world.speed == 30.0
    assert replace(sc.world, speed=base.world.speed) == base.world
    assert sc.trust == base.trust and sc.discovery == base.discovery


@pytest.mark.parametrize("text,lineno", [
    ("speed = 3\nbogus = 1\n", 2),
    ("# c\n\nnode_count\n", 3),
    ("speed = fast\n", 1),
    ("speed = 1\nspeed = 2\n", 2),
    ("speed = nan\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ParseError) as info:
        parse_scenario(text)
    assert info.value.lineno == lineno
    assert f"line {lineno}" in str(info.value)


@pytest.mark.parametrize("text", [
    "tc_thr = 0.6\n",
    "delta2 = 0.2\n",
    "attackers = 99\n",
    "protocol = dsr\n",
    "attack_kind = wormhole\n",
    "drop_prob = 1.5\n",
    "node_count = 0\n",
])
def test_invariant_violations(text):
    with pytest.raises(ValidationError):
        parse_scenario(text)


def test_seed_list_parsing():
    assert parse_scenario("seeds = 3, 5 7\n").seeds == (3, 5, 7)


# ------------------------------------------------------------------ sweeps

def test_attacker_sweep_row_count_and_order(tiny):
    sc = replace(tiny, seeds=(0, 1, 2))
    rows = run_sweep(sc, "attackers")
    assert len(rows) == 5 * 3 * 2
    keys = [(int(r["attackers"]), int(r["seed"]), r["protocol"]) for r in rows]
    assert keys == [(k, s, p) for k in (5, 10, 15, 20, 25) for s in (0, 1, 2)
                    for p in ("tcls", "baseline")]


def test_speed_sweep_fixes_five_attackers(tiny):
    specs = runner.plan_sweep(tiny, "speed")
    assert [s.speed for s in specs[::2]] == [10.0, 20.0, 30.0, 40.0, 50.0]
    assert {s.attackers for s in specs} == {5}


def test_identical_invocations_give_identical_bytes(tiny):
    a, b = io.StringIO(), io.StringIO()
    run_sweep(replace(tiny, seeds=(0, 1)), None, a)
    run_sweep(replace(tiny, seeds=(0, 1)), None, b)
    assert a.getvalue() == b.getvalue()
    assert a.getvalue().splitlines()[0] == ",".join(CSV_FIELDS)


def test_row_order_does_not_depend_on_concurrency(tiny):
    sc = replace(tiny, seeds=(0, 1))
    assert rows_to_csv(run_sweep(sc, None, jobs=2)) == rows_to_csv(run_sweep(sc, None))


def test_failing_run_leaves_partial_csv(tiny, monkeypatch):
    real = runner._execute
    calls = []

    def flaky(spec):
        calls.append(spec)
        if len(calls) == 3:
            raise RuntimeError("boom")
        return real(spec)

    monkeypatch.setattr(runner, "_execute", flaky)
    out = io.StringIO()
    with pytest.raises(RuntimeError):
        run_sweep(replace(tiny, seeds=(0, 1)), None, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 3


def test_paired_seeds_share_mobility_and_traffic(tiny):
    cfg_t = tiny.sim_config(Protocol.TCLS, 4)
    cfg_b = tiny.sim_config(Protocol.BASELINE, 4)
    st, sb = Simulation(cfg_t), Simulation(cfg_b)
    for t in np.linspace(0.0, cfg_t.world.sim_duration, 9):
        assert np.array_equal(st.mobility.positions_at(t), sb.mobility.positions_at(t))
    assert st.flow_pairs == sb.flow_pairs and st.attackers == sb.attackers
    st.run()
    sb.run()
    sends_t = [e for e in st.metrics.log if e[0] == "send"]
    sends_b = [e for e in sb.metrics.log if e[0] == "send"]
    assert sends_t == sends_b


# ------------------------------------------------------------------ summaries

def _row(protocol="tcls", attackers=5, seed=0, pdr="0.5", overhead="2.0"):
    return {"scenario_id": "x", "protocol": protocol, "attackers": str(attackers),
            "attack_kind": "mixed", "speed": "10.0", "seed": str(seed), "data_sent": "10",
            "data_received": "5", "pdr": pdr, "avg_delay_s": "0.01", "control_packets": "10",
            "control_overhead": overhead, "tpr": "1.0", "false_positives": "0"}


def test_singleton_summary():
    (s,) = summarize_rows([_row(pdr="0.75")])
    assert s.stats["pdr"] == (0.75, 0.0)
    assert s.n == 1


def test_grouping_by_protocol_and_axis_value():
    rows = [_row(p, k, seed) for k in (5, 10) for seed in (0, 1) for p in ("tcls", "baseline")]
    summary = summarize_rows(rows)
    assert [(s.attackers, s.protocol) for s in summary] == [
        (5, "baseline"), (5, "tcls"), (10, "baseline"), (10, "tcls")]
    assert all(s.n == 2 for s in summary)


def test_undefined_cells_are_left_out():
    (s,) = summarize_rows([_row(overhead=""), _row(seed=1, overhead="4.0")])
    assert s.stats["overhead"] == (4.0, 0.0)
    (s,) = summarize_rows([_row(overhead="")])
    assert s.stats["overhead"] is None


def test_means_match_independent_recomputation(tiny, tmp_path):
    path = tmp_path / "sweep.csv"
    with open(path, "w", newline="") as fh:
        run_sweep(replace(tiny, seeds=(0, 1, 2)), "attackers", fh)
    # recompute with plain csv + arithmetic, no shared code
    groups: dict = {}
    with open(path, newline="") as fh:
        for r in csv.reader(fh):
            if r[0] == "scenario_id":
                continue
            groups.setdefault((r[1], int(r[2])), []).append(float(r[8]))
    out = io.StringIO()
    summary = summarize(path, out)
    assert "pdr" in out.getvalue().splitlines()[0]
    for s in summary:
        vals = groups[(s.protocol, s.attackers)]
        assert abs(s.stats["pdr"][0] - sum(vals) / len(vals)) <= 1e-9
        assert abs(s.stats["pdr"][1] - statistics.pstdev(vals)) <= 1e-9


def test_schema_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("protocol,pdr\ntcls,1.0\n")
    with pytest.raises(SchemaMismatch):
        read_rows(bad)
    short = tmp_path / "short.csv"
    short.write_text(",".join(CSV_FIELDS) + "\nx,tcls\n")
    with pytest.raises(SchemaMismatch):
        read_rows(short)


# ------------------------------------------------------------------ CLI

def test_cli_writes_csv_and_logs(tmp_path, capsys):
    cfg = write(tmp_path, TINY)
    out = tmp_path / "run.csv"
    code = main(["--config", str(cfg), "--protocol", "tcls", "--seeds", "1", "--out", str(out),
                 "--emit-event-log", "--emit-trust-log", "--emit-attack-log"])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 1 and rows[0]["protocol"] == "tcls"
    stem = tmp_path / "run.tcls.a5.v10.s0"
    events = (tmp_path / f"{stem.name}.events.tsv").read_text().splitlines()
    assert events and all(len(line.split("\t")) == 4 for line in events)
    assert (tmp_path / f"{stem.name}.trust.csv").exists()
    assert (tmp_path / f"{stem.name}.attacks.csv").exists()


def test_cli_logs_are_deterministic(tmp_path):
    cfg = write(tmp_path, TINY)
    blobs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert main(["--config", str(cfg), "--seeds", "1", "--out", str(d / "r.csv"),
                     "--emit-event-log", "--emit-trust-log", "--emit-attack-log"]) == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert blobs[0] == blobs[1]
    assert len(blobs[0]) == 1 + 2 * 3


@pytest.mark.parametrize("argv", [
    ["--config", "/nonexistent/file.cfg"],
    ["--seeds", "0"],
    ["--summarize", "/nonexistent.csv"],
])
def test_cli_errors_exit_nonzero(argv, capsys):
    assert main(argv) != 0
    assert "manetsec: error:" in capsys.readouterr().err


def test_cli_bad_config_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "speed = 1\nfoo = 2\n")
    assert main(["--config", str(cfg)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_summarize(tmp_path, capsys):
    path = tmp_path / "x.csv"
    path.write_text(rows_to_csv([_row(), _row(protocol="baseline")]))
    assert main(["--summarize", str(path)]) == 0
    text = capsys.readouterr().out
    assert "tcls" in text and "baseline" in text
