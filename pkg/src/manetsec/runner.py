"""Scenario files, experiment sweeps, CSV output and summaries.

A scenario file is plain text with one ``key = value`` per line. ``#`` starts
a comment. Omitted keys fall back to the selected profile:

* ``paper``: 100 nodes, 1000 x 1000 m, 50 s (the published setup);
* ``desk``: 50 nodes, 500 x 500 m, 30 s (same node density, much faster).
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, TextIO

from .adversary import ATTACK_MIXES
from .engine import CbrTraffic, WorldConfig
from .metrics import detection_quality
from .network import DiscoveryParams, Protocol, RunLogs, SimConfig, run_simulation
from .routing.trust import TrustParams

CSV_FIELDS = ["scenario_id", "protocol", "attackers", "attack_kind", "speed", "seed",
              "data_sent", "data_received", "pdr", "avg_delay_s", "control_packets",
              "control_overhead", "tpr", "false_positives"]

SWEEPS = {
    "attackers": [5, 10, 15, 20, 25],
    "speed": [10.0, 20.0, 30.0, 40.0, 50.0],
}
SPEED_SWEEP_ATTACKERS = 5

PROFILES = {
    "paper": {"node_count": 100, "area": (1000.0, 1000.0), "sim_duration": 50.0},
    "desk": {"node_count": 50, "area": (500.0, 500.0), "sim_duration": 30.0},
}


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    world: WorldConfig = field(default_factory=WorldConfig)
    trust: TrustParams = field(default_factory=TrustParams)
    discovery: DiscoveryParams = field(default_factory=DiscoveryParams)
    protocol: str = "both"
    attackers: int = 5
    attack_kind: str = "mixed"
    drop_prob: float = 0.5
    tamper_rate: float = 1.0
    seeds: tuple[int, ...] = (0,)
    name: str = "scenario"

    @property
    def speed(self) -> float:
        return self.world.speed

    def protocols(self) -> list[Protocol]:
        if self.protocol == "both":
            return [Protocol.TCLS, Protocol.BASELINE]
        return [Protocol(self.protocol)]

    def sim_config(self, protocol: Protocol, seed: int, attackers: int | None = None,
                   speed: float | None = None) -> SimConfig:
        world = replace(self.world, seed=seed,
                        speed=self.world.speed if speed is None else float(speed))
        return SimConfig(world=world, trust=self.trust, protocol=protocol,
                         attackers=self.attackers if attackers is None else attackers,
                         attack_kind=self.attack_kind, drop_prob=self.drop_prob,
                         tamper_rate=self.tamper_rate, discovery=self.discovery)


def _as_int(v: str) -> int:
    return int(v, 0)


def _as_seeds(v: str) -> tuple[int, ...]:
    return tuple(int(x, 0) for x in v.replace(",", " ").split())


# key -> (section, field, converter)
_KEYS = {
    "node_count": ("world", "node_count", _as_int),
    "area_width": ("world", "area_width", float),
    "area_height": ("world", "area_height", float),
    "radio_range": ("world", "radio_range", float),
    "sim_duration": ("world", "sim_duration", float),
    "hop_latency": ("world", "hop_latency", float),
    "speed": ("world", "speed", float),
    "pause_time": ("world", "pause_time", float),
    "packet_size": ("traffic", "packet_size", _as_int),
    "cbr_rate": ("traffic", "rate", float),
    "cbr_pairs": ("traffic", "pairs", _as_int),
    "cbr_stop_margin": ("traffic", "stop_margin", float),
    "tc_init": ("trust", "tc_init", float),
    "delta1": ("trust", "delta1", float),
    "delta2": ("trust", "delta2", float),
    "tc_thr": ("trust", "tc_thr", float),
    "sr_min": ("trust", "sr_min", float),
    "rrep_timeout": ("trust", "rrep_timeout_t", float),
    "epoch": ("trust", "epoch_t1", float),
    "collect_window": ("discovery", "collect_window", float),
    "dest_replies": ("discovery", "dest_replies", _as_int),
    "protocol": ("scenario", "protocol", str),
    "attackers": ("scenario", "attackers", _as_int),
    "attack_kind": ("scenario", "attack_kind", str),
    "drop_prob": ("scenario", "drop_prob", float),
    "tamper_rate": ("scenario", "tamper_rate", float),
    "seeds": ("scenario", "seeds", _as_seeds),
    "name": ("scenario", "name", str),
}


def parse_scenario(text: str, profile: str = "paper") -> Scenario:
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r}")
    sections: dict[str, dict] = {"world": {}, "traffic": {}, "trust": {}, "discovery": {},
                                 "scenario": {}}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in seen:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if not value:
            raise ParseError(lineno, f"missing value for {key!r}")
        seen.add(key)
        section, name, conv = _KEYS[key]
        try:
            converted = conv(value)
        except ValueError:
            raise ParseError(lineno, f"bad value for {key!r}: {value!r}") from None
        if isinstance(converted, float) and not math.isfinite(converted):
            raise ParseError(lineno, f"non-finite value for {key!r}")
        sections[section][name] = converted
    return build_scenario(sections, profile)


def build_scenario(sections: dict[str, dict], profile: str = "paper") -> Scenario:
    base = dict(PROFILES[profile])
    w = sections.get("world", {})
    width, height = base.pop("area")
    width = w.pop("area_width", width)
    height = w.pop("area_height", height)
    sc = dict(sections.get("scenario", {}))
    try:
        traffic = CbrTraffic(**sections.get("traffic", {}))
        world = WorldConfig(**{**base, **w, "area": (width, height), "traffic": traffic})
        trust = TrustParams(**sections.get("trust", {}))
        discovery = DiscoveryParams(**sections.get("discovery", {}))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if sc.get("protocol", "both") not in ("tcls", "baseline", "both"):
        raise ValidationError("protocol must be one of tcls, baseline, both")
    if sc.get("attack_kind", "mixed") not in ATTACK_MIXES:
        raise ValidationError(f"attack_kind must be one of {', '.join(ATTACK_MIXES)}")
    for name in ("drop_prob", "tamper_rate"):
        if not 0.0 <= sc.get(name, 0.5) <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1]")
    if "seeds" in sc:
        if not sc["seeds"]:
            raise ValidationError("seeds must list at least one seed")
        if any(not 0 <= s < 2 ** 64 for s in sc["seeds"]):
            raise ValidationError("seeds must be 64-bit non-negative integers")
    attackers = sc.get("attackers", Scenario.attackers)
    if attackers < 0 or attackers + 2 * traffic.pairs > world.node_count:
        raise ValidationError("attackers + 2 * cbr_pairs must not exceed node_count")
    return Scenario(world=world, trust=trust, discovery=discovery, **sc)


def load_scenario(path: str | Path, profile: str = "paper") -> Scenario:
    return parse_scenario(Path(path).read_text(), profile)


def default_scenario(profile: str = "desk") -> Scenario:
    return parse_scenario("", profile)


# ------------------------------------------------------------------ running

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_scenario(scenario: Scenario, protocol: Protocol, seed: int, attackers: int | None = None,
                 speed: float | None = None, scenario_id: str | None = None,
                 logs: RunLogs | None = None) -> dict[str, str]:
    """Run one simulation and return its CSV row (all values already formatted)."""
    cfg = scenario.sim_config(protocol, seed, attackers, speed)
    rec = run_simulation(cfg, logs).record
    tpr, fp = detection_quality(rec)
    row = {
        "scenario_id": scenario_id or scenario.name,
        "protocol": protocol.value,
        "attackers": cfg.attackers,
        "attack_kind": cfg.attack_kind,
        "speed": cfg.world.speed,
        "seed": seed,
        "data_sent": rec.data_sent,
        "data_received": rec.data_received,
        "pdr": rec.pdr,
        "avg_delay_s": rec.avg_delay,
        "control_packets": rec.control_packets,
        "control_overhead": rec.control_overhead,
        "tpr": tpr,
        "false_positives": fp,
    }
    return {k: _fmt(v) for k, v in row.items()}


@dataclass(frozen=True)
class RunSpec:
    scenario: Scenario
    protocol: Protocol
    seed: int
    attackers: int
    speed: float
    scenario_id: str
    log_stem: str | None = None
    emit: tuple[bool, bool, bool] = (False, False, False)

    @property
    def tag(self) -> str:
        return f"{self.protocol.value}.a{self.attackers}.v{self.speed:g}.s{self.seed}"


def _execute(spec: RunSpec) -> dict[str, str]:
    handles = []
    logs = RunLogs()
    try:
        if spec.log_stem is not None:
            for on, attr, suffix in zip(spec.emit, ("events", "trust", "attacks"),
                                        ("events.tsv", "trust.csv", "attacks.csv")):
                if on:
                    fh = open(f"{spec.log_stem}.{spec.tag}.{suffix}", "w", newline="")
                    handles.append(fh)
                    setattr(logs, attr, fh)
        return run_scenario(spec.scenario, spec.protocol, spec.seed, spec.attackers, spec.speed,
                            spec.scenario_id, logs)
    finally:
        for fh in handles:
            fh.close()


def plan_sweep(scenario: Scenario, axis: str | None, log_stem: str | None = None,
               emit: tuple[bool, bool, bool] = (False, False, False)) -> list[RunSpec]:
    """Axis value x seed x protocol, in that nesting order."""
    if axis is None:
        points = [(scenario.attackers, scenario.speed)]
    elif axis == "attackers":
        points = [(k, scenario.speed) for k in SWEEPS["attackers"]]
    elif axis == "speed":
        points = [(SPEED_SWEEP_ATTACKERS, v) for v in SWEEPS["speed"]]
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    specs = []
    for attackers, speed in points:
        if attackers + 2 * scenario.world.traffic.pairs > scenario.world.node_count:
            raise ValidationError(f"{attackers} attackers do not fit in "
                                  f"{scenario.world.node_count} nodes")
        if axis == "attackers":
            sid = f"{scenario.name}/attackers={attackers}"
        elif axis == "speed":
            sid = f"{scenario.name}/speed={speed:g}"
        else:
            sid = scenario.name
        for seed in scenario.seeds:
            for proto in scenario.protocols():
                specs.append(RunSpec(scenario, proto, seed, attackers, speed, sid, log_stem, emit))
    return specs


def run_sweep(scenario: Scenario, axis: str | None = None, out: TextIO | None = None,
              jobs: int = 1, log_stem: str | None = None,
              emit: tuple[bool, bool, bool] = (False, False, False)) -> list[dict[str, str]]:
    """Run every point of a sweep; rows come back (and are written) in plan order.

    If ``out`` is given the header and each row are written as soon as the
    row is available in plan order, so a failing run leaves every earlier row
    on disk before the error propagates.
    """
    specs = plan_sweep(scenario, axis, log_stem, emit)
    writer = None
    if out is not None:
        writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
    rows = []

    def emit_row(row):
        rows.append(row)
        if writer is not None:
            writer.writerow(row)

    try:
        if jobs <= 1:
            for spec in specs:
                emit_row(_execute(spec))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for row in pool.map(_execute, specs):
                    emit_row(row)
    finally:
        if out is not None:
            out.flush()
    return rows


def rows_to_csv(rows: Iterable[dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------------ summaries

SUMMARY_COLUMNS = [("pdr", "pdr"), ("avg_delay", "avg_delay_s"), ("overhead", "control_overhead"),
                   ("tpr", "tpr"), ("fp", "false_positives")]


@dataclass
class SummaryRow:
    protocol: str
    attackers: int
    speed: float
    n: int
    stats: dict[str, tuple[float, float] | None]


def summarize_rows(rows: list[dict[str, str]]) -> list[SummaryRow]:
    """Mean and population standard deviation per (protocol, attackers, speed).

    Empty cells (undefined values) are left out of a column's statistics.
    """
    groups: dict[tuple[str, int, float], list[dict[str, str]]] = {}
    for row in rows:
        key = (row["protocol"], int(row["attackers"]), float(row["speed"]))
        groups.setdefault(key, []).append(row)
    out = []
    for (proto, attackers, speed), members in sorted(groups.items(),
                                                     key=lambda kv: (kv[0][1], kv[0][2], kv[0][0])):
        stats = {}
        for label, col in SUMMARY_COLUMNS:
            vals = [float(r[col]) for r in members if r[col] != ""]
            stats[label] = (statistics.fmean(vals), statistics.pstdev(vals)) if vals else None
        out.append(SummaryRow(proto, attackers, speed, len(members), stats))
    return out


def read_rows(source: str | Path | TextIO) -> list[dict[str, str]]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_rows(fh)
    reader = csv.DictReader(source)
    if reader.fieldnames != CSV_FIELDS:
        raise SchemaMismatch(f"expected columns {CSV_FIELDS}, got {reader.fieldnames}")
    rows = list(reader)
    for i, row in enumerate(rows, 2):
        if None in row or any(v is None for v in row.values()):
            raise SchemaMismatch(f"row {i} has the wrong number of fields")
    return rows


def format_summary(summary: list[SummaryRow]) -> str:
    head = f"{'protocol':<9} {'attackers':>9} {'speed':>6} {'n':>3}"
    for label, _ in SUMMARY_COLUMNS:
        head += f" {label:>21}"
    lines = [head]
    for s in summary:
        line = f"{s.protocol:<9} {s.attackers:>9} {s.speed:>6g} {s.n:>3}"
        for label, _ in SUMMARY_COLUMNS:
            st = s.stats[label]
            cell = "-" if st is None else f"{st[0]:.4f} ± {st[1]:.4f}"
            line += f" {cell:>21}"
        lines.append(line)
    return "\n".join(lines)


def summarize(source: str | Path | TextIO, stream: TextIO | None = None) -> list[SummaryRow]:
    """Print the grouped mean ± stddev table for a sweep CSV and return it."""
    summary = summarize_rows(read_rows(source))
    print(format_summary(summary), file=stream or sys.stdout)
    return summary
