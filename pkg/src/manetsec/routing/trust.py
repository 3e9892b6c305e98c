"""Trust bookkeeping: forward counters, trust counters and route selection.

Trust is kept per source. A source folds every piece of evidence it receives
about a node during one epoch into a single update for that epoch:

* signature outcome: ``+delta1`` if the node's signature verified, ``-delta1``
  if it is implicated in a failed chain;
* forwarding outcome (when the node's success ratio is known): ``-delta2`` and
  loss of the signature reward when the ratio is below ``sr_min``,
  ``+delta2`` otherwise.

Failures dominate successes when several outcomes arrive in one epoch.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..engine import NodeId, SimTime

FlowKey = tuple[NodeId, NodeId, int]  # (source, dest, epoch)


class NoRoute(LookupError):
    pass


@dataclass(frozen=True)
class TrustParams:
    tc_init: float = 0.5
    delta1: float = 0.1
    delta2: float = 0.05
    tc_thr: float = 0.25
    sr_min: float = 0.9
    rrep_timeout_t: float = 1.0
    epoch_t1: float = 5.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tc_init <= 1.0:
            raise ValueError("tc_init must lie in [0, 1]")
        if not 0.0 <= self.tc_thr <= 1.0:
            raise ValueError("tc_thr must lie in [0, 1]")
        if not 0.0 < self.delta2 < self.delta1:
            raise ValueError("need 0 < delta2 < delta1")
        if not self.tc_thr < self.tc_init:
            raise ValueError("tc_thr must be below tc_init")
        if self.sr_min < 0:
            raise ValueError("sr_min must be >= 0")
        if not self.rrep_timeout_t > 0:
            raise ValueError("rrep_timeout_t must be > 0")
        if not self.epoch_t1 > 0:
            raise ValueError("epoch_t1 must be > 0")

    def penalized_epochs_to_flag(self) -> int:
        """Closed form for a relay that signs correctly but never forwards."""
        steps = round((self.tc_init - self.tc_thr) / self.delta2, 9)
        return int(-(-steps // 1)) + 1


@dataclass
class NttEntry:
    neighbor: NodeId
    fc: int = 0


class NeighborTrustTable:
    """One node's forward counters for the neighbors it receives data from.

    ``fc`` is the counter for the current epoch and is reset at every epoch
    tick. Per-flow, per-origination-epoch counts are kept alongside for the
    evidence a node reports in route replies; only the last few epochs are
    retained.
    """

    keep_epochs = 3

    def __init__(self, owner: NodeId):
        self.owner = owner
        self.epoch = 0
        self.entries: dict[NodeId, NttEntry] = {}
        self._by_flow: dict[FlowKey, dict[NodeId, int]] = defaultdict(dict)

    def record_forward(self, upstream: NodeId, flow: FlowKey | None = None) -> NttEntry:
        entry = self.entries.get(upstream)
        if entry is None:
            entry = self.entries[upstream] = NttEntry(upstream)
        entry.fc += 1
        if flow is not None:
            counts = self._by_flow[flow]
            counts[upstream] = counts.get(upstream, 0) + 1
        return entry

    def fc(self, upstream: NodeId) -> int:
        entry = self.entries.get(upstream)
        return 0 if entry is None else entry.fc

    def witnessed(self, upstream: NodeId, flow: FlowKey) -> int:
        return self._by_flow.get(flow, {}).get(upstream, 0)

    def tick(self, epoch: int) -> None:
        self.epoch = epoch
        for entry in self.entries.values():
            entry.fc = 0
        stale = [k for k in self._by_flow if k[2] < epoch - self.keep_epochs]
        for k in stale:
            del self._by_flow[k]


@dataclass
class _Pending:
    epoch: int
    base: float
    sig: bool | None = None
    sr_low: bool | None = None


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, round(x, 12)))


@dataclass
class TrustUpdate:
    epoch: int
    subject: NodeId
    tc: float
    malicious: bool


class TrustState:
    """Trust counters and the malicious set held by one source."""

    def __init__(self, owner: NodeId, params: TrustParams):
        self.owner = owner
        self.params = params
        self.tc: dict[NodeId, float] = {}
        self.malicious: set[NodeId] = set()
        self._pending: dict[NodeId, _Pending] = {}
        self.history: list[TrustUpdate] = []

    def tc_of(self, node: NodeId) -> float:
        return self.tc.get(node, self.params.tc_init)

    def record_outcome(self, subject: NodeId, epoch: int, sig_ok: bool | None = None,
                       sr: float | None = None) -> float:
        """Fold one piece of evidence about ``subject`` into this epoch's update.

        ``sig_ok`` is the signature-chain outcome (None if not applicable) and
        ``sr`` the subject's success ratio (None when unknown, which is
        neutral). Returns the new trust counter.
        """
        p = self.params
        pend = self._pending.get(subject)
        if pend is None or pend.epoch != epoch:
            pend = self._pending[subject] = _Pending(epoch, self.tc_of(subject))
        if sig_ok is not None:
            pend.sig = sig_ok if pend.sig is None else (pend.sig and sig_ok)
        if sr is not None:
            low = sr < p.sr_min
            pend.sr_low = low if pend.sr_low is None else (pend.sr_low or low)

        delta = 0.0
        if pend.sig is False:
            delta -= p.delta1
        elif pend.sig and not pend.sr_low:
            delta += p.delta1
        if pend.sr_low is True:
            delta -= p.delta2
        elif pend.sr_low is False:
            delta += p.delta2
        tc = _clamp(pend.base + delta)
        self.tc[subject] = tc
        if tc < p.tc_thr:
            self.malicious.add(subject)
        self.history.append(TrustUpdate(epoch, subject, tc, subject in self.malicious))
        return tc

    def entry_for(self, route: list[NodeId], now: SimTime) -> "RouteEntry":
        relays = route[1:-1]
        return RouteEntry(
            dest=route[-1], route=list(route),
            malicious_count=sum(1 for n in relays if n in self.malicious),
            established_at=now,
            min_tc=min((self.tc_of(n) for n in relays), default=1.0))


@dataclass
class RouteEntry:
    dest: NodeId
    route: list[NodeId]
    malicious_count: int = 0
    established_at: SimTime = 0.0
    min_tc: float = 1.0
    meta: dict = field(default_factory=dict, compare=False, repr=False)


def select_route(candidates: list[RouteEntry]) -> RouteEntry:
    """Fewest malicious relays, then highest minimum trust, then shortest, then lexicographic."""
    if not candidates:
        raise NoRoute("no candidate routes")
    return min(candidates, key=lambda c: (c.malicious_count, -c.min_tc, len(c.route), c.route))
