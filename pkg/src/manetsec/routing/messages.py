"""Routing-layer messages and their canonical byte encodings.

Only the encodings matter for security: hop marks and signatures are computed
over these bytes, so any change to a covered field breaks verification.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from ..engine import NodeId
from .keys import KeyStore, mac, sign, verify

MARK_LEN = 8


def _ids(nodes) -> bytes:
    return struct.pack(f">H{len(nodes)}H", len(nodes), *nodes)


# --------------------------------------------------------------------------- RREQ

def rreq_mark(keys: KeyStore, node: NodeId, source: NodeId, dest: NodeId, request_id: int,
              prev: bytes) -> bytes:
    msg = b"rreq" + struct.pack(">HHHI", node, source, dest, request_id) + prev
    return sign(keys.node_auth(node), msg)[:MARK_LEN]


@dataclass
class RouteRequest:
    source: NodeId
    dest: NodeId
    request_id: int
    accumulated_route: list[NodeId]
    hop_marks: list[bytes]
    epoch: int = 0
    # issued by a relay repairing a broken link, not by the flow source
    repair: bool = False

    def extended(self, node: NodeId, mark: bytes) -> "RouteRequest":
        return RouteRequest(self.source, self.dest, self.request_id,
                            self.accumulated_route + [node], self.hop_marks + [mark],
                            self.epoch, self.repair)

    def marks_valid(self, keys: KeyStore) -> bool:
        if len(self.hop_marks) != len(self.accumulated_route):
            return False
        prev = b""
        for node, mark in zip(self.accumulated_route, self.hop_marks):
            if rreq_mark(keys, node, self.source, self.dest, self.request_id, prev) != mark:
                return False
            prev = mark
        return True


def originate(keys: KeyStore, source: NodeId, dest: NodeId, request_id: int, epoch: int = 0,
              repair: bool = False) -> RouteRequest:
    mark = rreq_mark(keys, source, source, dest, request_id, b"")
    return RouteRequest(source, dest, request_id, [source], [mark], epoch, repair)


# --------------------------------------------------------------------------- RREP

@dataclass(frozen=True)
class Evidence:
    """One forwarding-evidence entry carried by an RREP.

    ``kind`` is ``"W"`` for a witnessed forward count (value: int) attached by
    the subject's downstream successor, or ``"S"`` for the subject's success
    ratio (value: float, or None when there is no usable evidence).
    """

    kind: str
    subject: NodeId
    value: float | int | None

    def encode(self) -> bytes:
        if self.value is None:
            v = b"\xff" * 8
        elif self.kind == "W":
            v = struct.pack(">q", int(self.value))
        else:
            v = struct.pack(">d", float(self.value))
        return self.kind.encode() + struct.pack(">H", self.subject) + v


@dataclass(frozen=True)
class Signature:
    signer: NodeId
    # number of evidence entries present when the signer signed
    evidence_len: int
    tag: bytes


@dataclass
class RouteReply:
    source: NodeId
    dest: NodeId
    request_id: int
    route: list[NodeId]
    prec: int
    prec_mac: bytes
    epoch: int = 0
    repair: bool = False
    evidence: list[Evidence] = field(default_factory=list)
    signatures: list[Signature] = field(default_factory=list)

    @property
    def relays(self) -> list[NodeId]:
        return self.route[1:-1]

    @property
    def sr_list(self) -> dict[NodeId, float | None]:
        return {e.subject: e.value for e in self.evidence if e.kind == "S"}

    @property
    def witness(self) -> dict[NodeId, int]:
        return {e.subject: int(e.value) for e in self.evidence if e.kind == "W"}

    def base_bytes(self) -> bytes:
        return (b"rrep" + struct.pack(">HHIiB", self.source, self.dest, self.request_id,
                                      self.epoch, int(self.repair))
                + _ids(self.route) + struct.pack(">q", self.prec) + self.prec_mac)

    def signed_bytes(self, upto: int, evidence_len: int) -> bytes:
        """Bytes covered by the signature at chain position ``upto``."""
        out = [self.base_bytes()]
        out.extend(e.encode() for e in self.evidence[:evidence_len])
        out.extend(s.tag for s in self.signatures[:upto])
        return b"".join(out)

    def add_signature(self, keys: KeyStore, signer: NodeId) -> None:
        n = len(self.evidence)
        tag = sign(keys.node_auth(signer), self.signed_bytes(len(self.signatures), n))
        self.signatures.append(Signature(signer, n, tag))

    def expected_signers(self) -> list[NodeId]:
        """Destination first, then relays in reverse-route order."""
        return [self.route[-1]] + list(reversed(self.relays))

    def first_invalid_signature(self, keys: KeyStore) -> int | None:
        """Index of the first bad or missing signature in the chain, else None.

        Only the signatures present so far are required; a chain that is
        complete at the source has one signature per expected signer.
        """
        expected = self.expected_signers()
        if len(self.signatures) > len(expected):
            return len(expected)
        prev_len = 0
        for pos, sig in enumerate(self.signatures):
            if sig.signer != expected[pos] or not prev_len <= sig.evidence_len <= len(self.evidence):
                return pos
            msg = self.signed_bytes(pos, sig.evidence_len)
            if not verify(keys.node_auth(sig.signer), msg, sig.tag):
                return pos
            prev_len = sig.evidence_len
        return None

    def copy(self) -> "RouteReply":
        return RouteReply(self.source, self.dest, self.request_id, list(self.route), self.prec,
                          self.prec_mac, self.epoch, self.repair, list(self.evidence),
                          list(self.signatures))


def prec_message(source: NodeId, dest: NodeId, request_id: int, epoch: int, prec: int) -> bytes:
    return b"prec" + struct.pack(">HHIiq", source, dest, request_id, epoch, prec)


def prec_mac(keys: KeyStore, source: NodeId, dest: NodeId, request_id: int, epoch: int,
             prec: int) -> bytes:
    return mac(keys.pairwise(source, dest), prec_message(source, dest, request_id, epoch, prec))


def prec_mac_valid(keys: KeyStore, rrep: RouteReply) -> bool:
    expected = prec_mac(keys, rrep.source, rrep.dest, rrep.request_id, rrep.epoch, rrep.prec)
    return expected == rrep.prec_mac


# --------------------------------------------------------------------------- data

PAYLOAD_FMT = ">IHHhId"


@dataclass
class DataPacket:
    """A CBR data packet travelling along a source route.

    ``payload`` is the compact application record that rides in the CBC-X
    data field; ``size`` is the nominal packet size used for accounting.
    """

    packet_id: int
    source: NodeId
    dest: NodeId
    seq: int
    epoch: int
    created_at: float
    route: list[NodeId]
    hop: int = 0
    size: int = 512
    marks: list[tuple[NodeId, bytes]] = field(default_factory=list)
    payload: bytes = b""

    def __post_init__(self) -> None:
        if not self.payload:
            self.payload = struct.pack(PAYLOAD_FMT, self.packet_id, self.source, self.dest,
                                       self.epoch, self.seq, self.created_at)

    @property
    def flow(self) -> tuple[NodeId, NodeId]:
        return (self.source, self.dest)

    def digest(self) -> bytes:
        return hashlib.sha256(self.payload).digest()[:8]


def data_mark(keys: KeyStore, node: NodeId, packet: DataPacket) -> bytes:
    msg = b"data" + struct.pack(">IH", packet.packet_id, node) + packet.digest()
    return sign(keys.node_auth(node), msg)[:MARK_LEN]


def mark_chain_valid(keys: KeyStore, packet: DataPacket, relays: list[NodeId]) -> bool:
    """Destination-side check that every relay's mark covers the current payload."""
    if [n for n, _ in packet.marks] != list(relays):
        return False
    return all(data_mark(keys, n, packet) == m for n, m in packet.marks)
