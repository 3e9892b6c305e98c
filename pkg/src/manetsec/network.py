"""Node behaviour and the per-run simulation.

Routing is source routed. A source floods an RREQ, the destination answers
up to ``dest_replies`` copies with signed RREPs that travel back along the
accumulated route, and data packets then follow the chosen route hop by hop.
Every data hop is a CBC-X frame under the ordered link key of the two
neighbours. Control messages ride unencrypted and rely on signatures.

When a unicast fails because the next hop moved out of range, a source starts
a new discovery and a relay runs a local repair discovery towards the
destination, holding the affected packets until a new suffix is found.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, TextIO

import numpy as np

from .adversary import Adversary, AttackerProfile, assign_profiles, place_nodes
from .engine import Engine, EventHandle, EventKind, NodeId, Radio, SimEvent, WorldConfig
from .linksec import CbcxError, FrameHeader, RanCounter, cbcx_decrypt, cbcx_encrypt
from .metrics import MetricsCollector, MetricsRecord
from .mobility import RandomWaypoint
from .routing.keys import KeyStore
from .routing.messages import (
    DataPacket,
    Evidence,
    RouteReply,
    RouteRequest,
    data_mark,
    mark_chain_valid,
    originate,
    prec_mac,
    prec_mac_valid,
    rreq_mark,
)
from .routing.trust import (
    FlowKey,
    NeighborTrustTable,
    RouteEntry,
    TrustParams,
    TrustState,
    select_route,
)

AM_DATA = 0x01


class Protocol(str, Enum):
    TCLS = "tcls"
    BASELINE = "baseline"


@dataclass(frozen=True)
class DiscoveryParams:
    # how long a source keeps collecting verified RREPs after the first one
    collect_window: float = 0.05
    dest_replies: int = 3

    def __post_init__(self) -> None:
        if self.collect_window < 0:
            raise ValueError("collect_window must be >= 0")
        if self.dest_replies < 1:
            raise ValueError("dest_replies must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    trust: TrustParams = field(default_factory=TrustParams)
    protocol: Protocol = Protocol.TCLS
    attackers: int = 0
    attack_kind: str = "mixed"
    drop_prob: float = 0.5
    tamper_rate: float = 1.0
    discovery: DiscoveryParams = field(default_factory=DiscoveryParams)


@dataclass
class RunLogs:
    events: TextIO | None = None
    trust: TextIO | None = None
    attacks: TextIO | None = None


@dataclass
class RunResult:
    record: MetricsRecord
    attackers: list[NodeId]
    flows: list[tuple[NodeId, NodeId]]
    trust: dict[NodeId, TrustState]
    attack_log: list[tuple[float, NodeId, str]]


@dataclass
class _Flow:
    source: NodeId
    dest: NodeId
    trust: TrustState
    route: list[NodeId] | None = None
    open_rid: int | None = None
    timeout: EventHandle | None = None
    select: EventHandle | None = None
    candidates: list[RouteEntry] = field(default_factory=list)
    buffer: list[DataPacket] = field(default_factory=list)
    seq: int = 0


@dataclass
class _Repair:
    rid: int
    timeout: EventHandle
    buffer: list[DataPacket] = field(default_factory=list)


@dataclass
class _Node:
    nid: NodeId
    ntt: NeighborTrustTable
    next_rid: int = 1
    seen: set[tuple[NodeId, int]] = field(default_factory=set)
    replies: dict[tuple[NodeId, int], int] = field(default_factory=dict)
    prec: dict[tuple[NodeId, int], int] = field(default_factory=dict)
    recv: dict[FlowKey, int] = field(default_factory=dict)
    sent_to: dict[FlowKey, dict[NodeId, int]] = field(default_factory=lambda: defaultdict(dict))
    held: dict[FlowKey, int] = field(default_factory=dict)
    repairs: dict[NodeId, _Repair] = field(default_factory=dict)
    patches: dict[NodeId, list[NodeId]] = field(default_factory=dict)

    def rid(self) -> int:
        r = self.next_rid
        self.next_rid += 1
        return r


class Simulation:
    """One run of one protocol over one seeded world.

    ``positions``, ``flows`` and ``profiles`` override the mobility model, the
    drawn CBR pairs and the drawn attackers; they exist for hand-built
    topologies (static ``(N, 2)`` positions or a callable of time).
    """

    def __init__(self, config: SimConfig, logs: RunLogs | None = None, *,
                 positions: np.ndarray | Callable[[float], np.ndarray] | None = None,
                 flows: list[tuple[NodeId, NodeId]] | None = None,
                 profiles: dict[NodeId, AttackerProfile] | None = None):
        self.config = config
        self.logs = logs or RunLogs()
        w = config.world
        self.world = w
        self.tcls = config.protocol is Protocol.TCLS
        self.params = config.trust
        self.engine = Engine(w.seed, self.logs.events)
        self.mobility = RandomWaypoint(w.node_count, w.area, w.speed, w.pause_time, w.seed)
        if positions is None:
            where = self.mobility.positions_at
        elif callable(positions):
            where = positions
        else:
            fixed = np.asarray(positions, dtype=float)
            where = lambda t: fixed  # noqa: E731
        self.radio = Radio(self.engine, where, w.radio_range, w.hop_latency)
        self.keys = KeyStore(w.seed, w.node_count)
        self.metrics = MetricsCollector()
        self.ran = RanCounter(self.engine.rng_stream("ran"))
        self.attackers, self.flow_pairs = place_nodes(w.seed, w.node_count, config.attackers,
                                                      w.traffic.pairs)
        if flows is not None:
            self.flow_pairs = list(flows)
        if profiles is None:
            profiles = assign_profiles(self.attackers, config.attack_kind, config.drop_prob,
                                       config.tamper_rate)
        else:
            self.attackers = sorted(profiles)
        self.adversary = Adversary(profiles, self.engine.rng_stream("attack"))
        self.nodes = [_Node(i, NeighborTrustTable(i)) for i in range(w.node_count)]
        self.flows: dict[NodeId, _Flow] = {
            s: _Flow(s, d, TrustState(s, self.params)) for s, d in self.flow_pairs}
        self._next_packet = 0
        self._trust_writer = None
        if self.logs.trust is not None:
            self._trust_writer = csv.writer(self.logs.trust, lineterminator="\n")
            self._trust_writer.writerow(["epoch", "observer", "subject", "fc", "tc",
                                         "malicious_flag"])

        e = self.engine
        e.on(EventKind.FRAME_DELIVERY, self._on_frame)
        e.on(EventKind.EPOCH_TICK, self._on_epoch)
        e.on(EventKind.RREP_TIMEOUT, self._on_timeout)
        e.on(EventKind.CBR_SEND, self._on_cbr)
        e.on(EventKind.ROUTE_SELECT, self._on_select)

    # ------------------------------------------------------------------ driver

    def epoch_at(self, t: float) -> int:
        return int(math.floor(t / self.params.epoch_t1 + 1e-9))

    def run(self) -> RunResult:
        w = self.world
        e = self.engine
        e.schedule(0.0, EventKind.EPOCH_TICK, None, 0)
        rng = e.rng_stream("cbr")
        period = 1.0 / w.traffic.rate
        for s, _ in self.flow_pairs:
            offset = float(rng.uniform(0.0, period))
            if offset < w.sim_duration - w.traffic.stop_margin:
                e.schedule(offset, EventKind.CBR_SEND, s, None)
        e.schedule(w.sim_duration, EventKind.SIM_END)
        e.run_until(w.sim_duration)
        flagged: set[NodeId] = set()
        if self.tcls:
            for f in self.flows.values():
                flagged |= f.trust.malicious
        record = self.metrics.finalize(flagged, set(self.attackers))
        if self.logs.attacks is not None:
            out = csv.writer(self.logs.attacks, lineterminator="\n")
            out.writerow(["time", "node", "action"])
            for t, n, action in self.adversary.log:
                out.writerow([repr(t), n, action])
        return RunResult(record, list(self.attackers), list(self.flow_pairs),
                         {s: f.trust for s, f in self.flows.items()}, list(self.adversary.log))

    # ------------------------------------------------------------------ events

    def _on_epoch(self, ev: SimEvent) -> None:
        k = ev.payload
        for node in self.nodes:
            node.ntt.tick(k)
        for f in self.flows.values():
            self._discover(f)
        nxt = (k + 1) * self.params.epoch_t1
        if nxt < self.world.sim_duration:
            self.engine.schedule(nxt, EventKind.EPOCH_TICK, None, k + 1)

    def _on_cbr(self, ev: SimEvent) -> None:
        f = self.flows[ev.node]
        now = self.engine.now
        pkt = DataPacket(self._next_packet, f.source, f.dest, f.seq, self.epoch_at(now), now,
                         route=[], size=self.world.traffic.packet_size)
        self._next_packet += 1
        f.seq += 1
        self.metrics.record_data_send(pkt.packet_id, now)
        if f.route is not None:
            pkt.route = list(f.route)
            self._send_data(f.source, pkt)
        else:
            f.buffer.append(pkt)
        nxt = now + 1.0 / self.world.traffic.rate
        if nxt < self.world.sim_duration - self.world.traffic.stop_margin:
            self.engine.schedule(nxt, EventKind.CBR_SEND, f.source, None)

    def _on_timeout(self, ev: SimEvent) -> None:
        what = ev.payload
        if what[0] == "flow":
            f = self.flows[ev.node]
            if f.open_rid == what[1]:
                # no usable reply in time: treated as a route break
                f.timeout = None
                self._discover(f)
        else:
            _, dest, rid = what
            node = self.nodes[ev.node]
            rep = node.repairs.get(dest)
            if rep is not None and rep.rid == rid:
                del node.repairs[dest]
                if rep.buffer:
                    self._start_repair(node, dest, rep.buffer)

    def _on_select(self, ev: SimEvent) -> None:
        f = self.flows[ev.node]
        if f.open_rid != ev.payload or not f.candidates:
            return
        now = self.engine.now
        if self.tcls:
            entries = [f.trust.entry_for(c.route, now) for c in f.candidates]
        else:
            # no trust: every candidate looks equally clean
            entries = [RouteEntry(c.dest, c.route, established_at=now) for c in f.candidates]
        best = select_route(entries)
        self._install_route(f, best.route)

    def _on_frame(self, ev: SimEvent) -> None:
        sender, frame = ev.payload
        kind = frame[0]
        if kind == "RREQ":
            self._on_rreq(self.nodes[ev.node], sender, frame[1])
        elif kind == "RREP":
            self._on_rrep(self.nodes[ev.node], sender, frame[1])
        else:
            self._on_data(self.nodes[ev.node], sender, frame[1], frame[2])

    # ------------------------------------------------------------------ discovery

    def _broadcast_rreq(self, sender: NodeId, rreq: RouteRequest) -> None:
        self.metrics.record_control("RREQ")
        self.radio.broadcast(sender, ("RREQ", rreq))

    def _unicast_rrep(self, sender: NodeId, receiver: NodeId, rrep: RouteReply) -> bool:
        ok = self.radio.unicast(sender, receiver, ("RREP", rrep))
        if ok:
            self.metrics.record_control("RREP")
        return ok

    def _discover(self, f: _Flow) -> None:
        node = self.nodes[f.source]
        self.engine.cancel(f.timeout)
        self.engine.cancel(f.select)
        f.select = None
        f.candidates = []
        rid = node.rid()
        f.open_rid = rid
        now = self.engine.now
        f.timeout = self.engine.schedule(now + self.params.rrep_timeout_t,
                                         EventKind.RREP_TIMEOUT, f.source, ("flow", rid))
        rreq = originate(self.keys, f.source, f.dest, rid, self.epoch_at(now))
        node.seen.add((f.source, rid))
        self._broadcast_rreq(f.source, rreq)

    def _start_repair(self, node: _Node, dest: NodeId, buffer: list[DataPacket]) -> None:
        rid = node.rid()
        now = self.engine.now
        handle = self.engine.schedule(now + self.params.rrep_timeout_t, EventKind.RREP_TIMEOUT,
                                      node.nid, ("repair", dest, rid))
        node.repairs[dest] = _Repair(rid, handle, buffer)
        rreq = originate(self.keys, node.nid, dest, rid, self.epoch_at(now), repair=True)
        node.seen.add((node.nid, rid))
        self._broadcast_rreq(node.nid, rreq)

    def _on_rreq(self, node: _Node, sender: NodeId, rreq: RouteRequest) -> None:
        n = node.nid
        if n in rreq.accumulated_route:
            return
        key = (rreq.source, rreq.request_id)
        if n == rreq.dest:
            count = node.replies.get(key, 0)
            if count >= self.config.discovery.dest_replies:
                return
            if not rreq.marks_valid(self.keys):
                return
            node.replies[key] = count + 1
            self._reply(node, rreq)
            return
        if key in node.seen:
            return
        node.seen.add(key)
        if not rreq.marks_valid(self.keys):
            return
        if self.adversary.is_black_hole(n):
            forged = self.adversary.forge_rrep(n, rreq, self.keys, self.engine.now)
            self._unicast_rrep(n, rreq.accumulated_route[-1], forged)
        prev = rreq.hop_marks[-1]
        mark = rreq_mark(self.keys, n, rreq.source, rreq.dest, rreq.request_id, prev)
        self._broadcast_rreq(n, rreq.extended(n, mark))

    def _reply(self, node: _Node, rreq: RouteRequest) -> None:
        d = node.nid
        s = rreq.source
        window = rreq.epoch - 1
        prec = 0 if rreq.repair else node.prec.get((s, window), 0)
        route = rreq.accumulated_route + [d]
        rrep = RouteReply(s, d, rreq.request_id, route, prec,
                          prec_mac(self.keys, s, d, rreq.request_id, rreq.epoch, prec),
                          epoch=rreq.epoch, repair=rreq.repair)
        if not rreq.repair and len(route) >= 3:
            up = route[-2]
            rrep.evidence.append(Evidence("W", up, node.ntt.witnessed(up, (s, d, window))))
        rrep.add_signature(self.keys, d)
        self._unicast_rrep(d, route[-2], rrep)

    def _success_ratio(self, node: _Node, flow: FlowKey, witnessed: int | None,
                       successor: NodeId) -> float | None:
        if witnessed is None:
            return None
        received = node.recv.get(flow, 0) - node.held.get(flow, 0)
        if received <= 0:
            return None
        if any(nb != successor for nb in node.sent_to.get(flow, {})):
            # part of the window went to a different next hop than the one
            # vouching now; the witness count is incomplete
            return None
        return witnessed / received

    def _chain_ok(self, rrep: RouteReply, signed_upto: int) -> bool:
        return (len(rrep.signatures) == signed_upto
                and rrep.first_invalid_signature(self.keys) is None)

    def _on_rrep(self, node: _Node, sender: NodeId, rrep: RouteReply) -> None:
        n = node.nid
        route = rrep.route
        if n == rrep.source and route and route[0] == n:
            if rrep.repair:
                self._repair_reply(node, sender, rrep)
            else:
                self._source_reply(sender, rrep)
            return
        try:
            idx = route.index(n)
        except ValueError:
            return
        if idx == 0 or idx >= len(route) - 1 or route[idx + 1] != sender:
            return
        if not self._chain_ok(rrep, len(route) - 1 - idx):
            self.metrics.record_invalid_rrep()
            return
        rrep = rrep.copy()
        if not rrep.repair:
            flow = (rrep.source, rrep.dest, rrep.epoch - 1)
            sr = self._success_ratio(node, flow, rrep.witness.get(n), route[idx + 1])
            rrep.evidence.append(Evidence("S", n, sr))
            if idx - 1 >= 1:
                up = route[idx - 1]
                rrep.evidence.append(Evidence("W", up, node.ntt.witnessed(up, flow)))
        rrep.add_signature(self.keys, n)
        self._unicast_rrep(n, route[idx - 1], rrep)

    def _source_reply(self, sender: NodeId, rrep: RouteReply) -> None:
        f = self.flows.get(rrep.source)
        if f is None or f.dest != rrep.dest or f.open_rid != rrep.request_id:
            return
        route = rrep.route
        now = self.engine.now
        if len(route) < 2 or not self.radio.in_range(f.source, route[1], now):
            self.metrics.record_invalid_rrep()
            return
        relays = rrep.relays
        signers = rrep.expected_signers()
        pos = None if prec_mac_valid(self.keys, rrep) else 0
        if pos is None:
            pos = rrep.first_invalid_signature(self.keys)
        if pos is None and len(rrep.signatures) != len(signers):
            pos = len(rrep.signatures)
        witness = rrep.witness
        if pos is not None:
            if self.tcls:
                relay_set = set(relays)
                for subject in signers[pos:]:
                    if subject in relay_set:
                        self._trust_update(f, subject, rrep.epoch, witness.get(subject),
                                           sig_ok=False)
            self.metrics.record_invalid_rrep()
            return
        if self.tcls:
            srs = rrep.sr_list
            for subject in relays:
                self._trust_update(f, subject, rrep.epoch, witness.get(subject), sig_ok=True,
                                   sr=srs.get(subject))
        f.candidates.append(RouteEntry(rrep.dest, list(route), established_at=now))
        if f.select is None:
            f.select = self.engine.schedule(now + self.config.discovery.collect_window,
                                            EventKind.ROUTE_SELECT, f.source, f.open_rid)

    def _trust_update(self, f: _Flow, subject: NodeId, epoch: int, fc: int | None,
                      sig_ok: bool | None = None, sr: float | None = None) -> None:
        tc = f.trust.record_outcome(subject, epoch, sig_ok=sig_ok, sr=sr)
        if self._trust_writer is not None:
            self._trust_writer.writerow([epoch, f.source, subject, "" if fc is None else fc,
                                         repr(tc), int(subject in f.trust.malicious)])

    def _install_route(self, f: _Flow, route: list[NodeId]) -> None:
        self.engine.cancel(f.timeout)
        self.engine.cancel(f.select)
        f.timeout = f.select = None
        f.open_rid = None
        f.candidates = []
        f.route = list(route)
        pending, f.buffer = f.buffer, []
        for pkt in pending:
            if f.route is None:
                f.buffer.append(pkt)
                continue
            pkt.route = list(f.route)
            pkt.hop = 0
            self._send_data(f.source, pkt)

    def _repair_reply(self, node: _Node, sender: NodeId, rrep: RouteReply) -> None:
        rep = node.repairs.get(rrep.dest)
        if rep is None or rep.rid != rrep.request_id:
            return
        ok = (len(rrep.route) >= 2
              and self.radio.in_range(node.nid, rrep.route[1], self.engine.now)
              and prec_mac_valid(self.keys, rrep)
              and self._chain_ok(rrep, len(rrep.route) - 1))
        if not ok:
            self.metrics.record_invalid_rrep()
            return
        self.engine.cancel(rep.timeout)
        del node.repairs[rrep.dest]
        suffix = list(rrep.route)
        node.patches[rrep.dest] = suffix
        for pkt in rep.buffer:
            flow = (pkt.source, pkt.dest, pkt.epoch)
            node.held[flow] -= 1
            pkt.route = pkt.route[:pkt.hop] + suffix
            self._send_data(node.nid, pkt)

    # ------------------------------------------------------------------ data plane

    def _send_data(self, n: NodeId, pkt: DataPacket) -> None:
        nxt = pkt.route[pkt.hop + 1]
        key = self.keys.link_key(n, nxt)
        header = FrameHeader(nxt, AM_DATA, len(pkt.payload), 0, self.ran.next(n, nxt))
        frame = cbcx_encrypt(key, header, pkt.payload)
        frame = self.adversary.tamper(n, frame, self.engine.now)
        pkt.hop += 1
        if self.radio.unicast(n, nxt, ("DATA", pkt, frame)):
            if n != pkt.source:
                sent = self.nodes[n].sent_to[(pkt.source, pkt.dest, pkt.epoch)]
                sent[nxt] = sent.get(nxt, 0) + 1
            return
        pkt.hop -= 1
        self._link_break(n, pkt, nxt)

    def _link_break(self, n: NodeId, pkt: DataPacket, broken: NodeId) -> None:
        if n == pkt.source:
            f = self.flows[n]
            f.route = None
            f.buffer.append(pkt)
            if f.open_rid is None:
                self._discover(f)
            return
        node = self.nodes[n]
        patch = node.patches.get(pkt.dest)
        if patch is not None and patch[1] != broken and patch[0] == n:
            pkt.route = pkt.route[:pkt.hop] + patch
            self._send_data(n, pkt)
            return
        node.patches.pop(pkt.dest, None)
        flow = (pkt.source, pkt.dest, pkt.epoch)
        node.held[flow] = node.held.get(flow, 0) + 1
        rep = node.repairs.get(pkt.dest)
        if rep is not None:
            rep.buffer.append(pkt)
        else:
            self._start_repair(node, pkt.dest, [pkt])

    def _on_data(self, node: _Node, sender: NodeId, pkt: DataPacket, frame) -> None:
        n = node.nid
        try:
            payload = cbcx_decrypt(self.keys.link_key(sender, n), frame)
        except CbcxError:
            self.metrics.record_corrupt()
            return
        pkt.payload = payload
        flow = (pkt.source, pkt.dest, pkt.epoch)
        node.ntt.record_forward(sender, flow)
        if n == pkt.dest:
            if not mark_chain_valid(self.keys, pkt, pkt.route[1:-1]):
                self.metrics.record_corrupt()
                return
            if self.metrics.record_data_receive(pkt.packet_id, self.engine.now):
                k = (pkt.source, pkt.epoch)
                node.prec[k] = node.prec.get(k, 0) + 1
            return
        node.recv[flow] = node.recv.get(flow, 0) + 1
        if self.adversary.drops(n, self.engine.now):
            return
        pkt.marks.append((n, data_mark(self.keys, n, pkt)))
        self._send_data(n, pkt)


def run_simulation(config: SimConfig, logs: RunLogs | None = None, **overrides) -> RunResult:
    return Simulation(config, logs, **overrides).run()
