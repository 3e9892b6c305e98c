"""Misbehaviour models attached to attacker nodes.

Attackers only hold their own key material. A black hole can therefore sign
as itself but has to fake the destination's signature and the source and
destination MAC on the route replies it invents.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .engine import NodeId, rng_stream
from .linksec import LinkFrame
from .routing.keys import MAC_LEN as PREC_MAC_LEN
from .routing.keys import SIG_LEN, KeyStore
from .routing.messages import RouteReply, RouteRequest, Signature


class AttackKind(str, Enum):
    BLACK_HOLE = "blackhole"
    SELECTIVE_DROP = "selective"
    FRAME_TAMPER = "tamper"


ATTACK_MIXES = ("blackhole", "selective", "tamper", "mixed")


@dataclass(frozen=True)
class AttackerProfile:
    kind: AttackKind
    drop_prob: float = 0.5
    tamper_rate: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must lie in [0, 1]")
        if not 0.0 <= self.tamper_rate <= 1.0:
            raise ValueError("tamper_rate must lie in [0, 1]")


def place_nodes(seed: int, node_count: int, attackers: int,
                pairs: int) -> tuple[list[NodeId], list[tuple[NodeId, NodeId]]]:
    """Draw attacker ids and CBR (source, dest) pairs from one seeded shuffle.

    Attackers are the first ``attackers`` ids of the shuffle and the CBR
    endpoints come from its tail, so traffic endpoints are always honest and
    do not move when the attacker count changes.
    """
    if attackers < 0 or attackers + 2 * pairs > node_count:
        raise ValueError(f"cannot place {attackers} attackers and {pairs} pairs "
                         f"among {node_count} nodes")
    perm = [int(x) for x in rng_stream(seed, "placement").permutation(node_count)]
    tail = perm[node_count - 2 * pairs:]
    flows = [(tail[2 * i], tail[2 * i + 1]) for i in range(pairs)]
    return sorted(perm[:attackers]), flows


def assign_profiles(attackers: list[NodeId], mix: str, drop_prob: float = 0.5,
                    tamper_rate: float = 1.0) -> dict[NodeId, AttackerProfile]:
    """``mix`` is a single kind or ``"mixed"`` (black hole and selective drop alternating)."""
    if mix not in ATTACK_MIXES:
        raise ValueError(f"unknown attack kind {mix!r}")
    out = {}
    for i, node in enumerate(attackers):
        if mix == "mixed":
            kind = AttackKind.BLACK_HOLE if i % 2 == 0 else AttackKind.SELECTIVE_DROP
        else:
            kind = AttackKind(mix)
        out[node] = AttackerProfile(kind, drop_prob, tamper_rate)
    return out


class Adversary:
    """Decisions of every attacker in one run, drawn from the ``"attack"`` stream."""

    def __init__(self, profiles: dict[NodeId, AttackerProfile], rng: np.random.Generator):
        self.profiles = profiles
        self.rng = rng
        self.log: list[tuple[float, NodeId, str]] = []

    def profile(self, node: NodeId) -> AttackerProfile | None:
        return self.profiles.get(node)

    def is_black_hole(self, node: NodeId) -> bool:
        p = self.profiles.get(node)
        return p is not None and p.kind is AttackKind.BLACK_HOLE

    def drops(self, node: NodeId, now: float) -> bool:
        p = self.profiles.get(node)
        if p is None:
            return False
        if p.kind is AttackKind.BLACK_HOLE:
            drop = True
        elif p.kind is AttackKind.SELECTIVE_DROP:
            drop = selective_drop(self.rng, p.drop_prob)
        else:
            return False
        if drop:
            self.log.append((now, node, "drop"))
        return drop

    def tamper(self, node: NodeId, frame: LinkFrame, now: float) -> LinkFrame:
        p = self.profiles.get(node)
        if p is None or p.kind is not AttackKind.FRAME_TAMPER:
            return frame
        if p.tamper_rate < 1.0 and self.rng.random() >= p.tamper_rate:
            return frame
        self.log.append((now, node, "tamper"))
        return tamper_frame(self.rng, frame)

    def forge_rrep(self, node: NodeId, rreq: RouteRequest, keys: KeyStore,
                   now: float) -> RouteReply:
        self.log.append((now, node, "forge_rrep"))
        return blackhole_rrep(node, rreq, keys, self.rng)


def selective_drop(rng: np.random.Generator, drop_prob: float) -> bool:
    if drop_prob <= 0.0:
        return False
    if drop_prob >= 1.0:
        return True
    return bool(rng.random() < drop_prob)


def tamper_frame(rng: np.random.Generator, frame: LinkFrame) -> LinkFrame:
    """Flip one uniformly chosen bit of the ciphertext body."""
    bit = int(rng.integers(0, 8 * len(frame.body)))
    body = bytearray(frame.body)
    body[bit // 8] ^= 0x80 >> (bit % 8)
    return LinkFrame(frame.header, bytes(body), frame.mac)


def blackhole_rrep(node: NodeId, rreq: RouteRequest, keys: KeyStore,
                   rng: np.random.Generator) -> RouteReply:
    """Claim a one-hop route to the destination without the destination's keys."""
    route = list(rreq.accumulated_route) + [node, rreq.dest]
    rrep = RouteReply(rreq.source, rreq.dest, rreq.request_id, route, prec=0,
                      prec_mac=rng.bytes(PREC_MAC_LEN), epoch=rreq.epoch, repair=rreq.repair)
    rrep.signatures.append(Signature(rreq.dest, 0, rng.bytes(SIG_LEN)))
    rrep.add_signature(keys, node)
    return rrep
