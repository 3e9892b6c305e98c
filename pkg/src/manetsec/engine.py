"""Deterministic discrete-event kernel and the abstract broadcast radio.

The kernel owns the simulation clock and a priority queue ordered by
``(fire_at, seq)``. ``seq`` is a per-engine insertion counter, so events
scheduled for the same instant dispatch in the order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, TextIO

import numpy as np

NodeId = int
SimTime = float


class SchedulingInPast(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(str, Enum):
    FRAME_DELIVERY = "FrameDelivery"
    WAYPOINT_ARRIVAL = "WaypointArrival"
    EPOCH_TICK = "EpochTick"
    RREP_TIMEOUT = "RrepTimeout"
    CBR_SEND = "CbrSend"
    SIM_END = "SimEnd"
    # route-selection deadline after the first valid RREP of a discovery round
    ROUTE_SELECT = "RouteSelect"


@dataclass(order=True)
class SimEvent:
    fire_at: SimTime
    seq: int
    kind: EventKind = field(compare=False)
    node: NodeId | None = field(default=None, compare=False)
    payload: Any = field(default=None, compare=False)
    cancelled: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class EventHandle:
    """Cancellable reference to a scheduled event."""

    seq: int
    fire_at: SimTime


@dataclass(frozen=True)
class CbrTraffic:
    packet_size: int = 512
    rate: float = 4.0
    pairs: int = 4
    # sources stop this many seconds before the horizon so packets can drain
    stop_margin: float = 1.0


@dataclass(frozen=True)
class WorldConfig:
    """Physical world parameters. Defaults follow the published setup."""

    node_count: int = 100
    area: tuple[float, float] = (1000.0, 1000.0)
    radio_range: float = 250.0
    sim_duration: float = 50.0
    hop_latency: float = 0.002
    seed: int = 0
    speed: float = 10.0
    pause_time: float = 5.0
    traffic: CbrTraffic = field(default_factory=CbrTraffic)

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if not self.radio_range > 0:
            raise ValueError("radio_range must be > 0")
        if not (self.area[0] > 0 and self.area[1] > 0):
            raise ValueError("area dimensions must be > 0")
        if not self.sim_duration > 0:
            raise ValueError("sim_duration must be > 0")
        if self.hop_latency < 0:
            raise ValueError("hop_latency must be >= 0")
        if not self.speed > 0:
            raise ValueError("speed must be > 0")
        if self.pause_time < 0:
            raise ValueError("pause_time must be >= 0")
        if self.traffic.rate <= 0 or self.traffic.packet_size <= 0:
            raise ValueError("traffic rate and packet size must be > 0")
        if 2 * self.traffic.pairs > self.node_count:
            raise ValueError("not enough nodes for the requested CBR pairs")


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent random stream keyed by ``(seed, label)``.

    The label is folded into the seed sequence through SHA-256 so the mapping
    does not depend on Python's per-process string hashing.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    entropy = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, *words]
    return np.random.default_rng(np.random.SeedSequence(entropy))


Handler = Callable[[SimEvent], None]


class Engine:
    """Single-threaded event loop.

    Handlers are registered per :class:`EventKind` and run to completion.
    An optional event log receives one tab-separated line per dispatch:
    ``time, seq, kind, node``.
    """

    def __init__(self, seed: int = 0, event_log: TextIO | None = None):
        self.seed = seed
        self.now: SimTime = 0.0
        self._queue: list[SimEvent] = []
        self._by_seq: dict[int, SimEvent] = {}
        self._next_seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self.event_log = event_log
        self.dispatched = 0

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: SimTime, kind: EventKind, node: NodeId | None = None,
                 payload: Any = None) -> EventHandle:
        if math.isnan(fire_at) or fire_at < self.now:
            raise SchedulingInPast(f"cannot schedule {kind.value} at {fire_at} (now {self.now})")
        ev = SimEvent(fire_at, self._next_seq, kind, node, payload)
        self._next_seq += 1
        heapq.heappush(self._queue, ev)
        self._by_seq[ev.seq] = ev
        return EventHandle(ev.seq, fire_at)

    def cancel(self, handle: EventHandle | None) -> bool:
        """Cancel a pending event. Returns False if it already fired or was cancelled."""
        if handle is None:
            return False
        ev = self._by_seq.pop(handle.seq, None)
        if ev is None:
            return False
        ev.cancelled = True
        return True

    def pending(self) -> int:
        return len(self._by_seq)

    def run_until(self, t_end: SimTime) -> int:
        """Dispatch every event with ``fire_at <= t_end``; leave the clock at ``t_end``."""
        if t_end < self.now:
            raise SchedulingInPast(f"run_until({t_end}) is before now ({self.now})")
        count = 0
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            del self._by_seq[ev.seq]
            self.now = ev.fire_at
            if self.event_log is not None:
                node = "" if ev.node is None else str(ev.node)
                self.event_log.write(f"{ev.fire_at:.9f}\t{ev.seq}\t{ev.kind.value}\t{node}\n")
            handler = self._handlers.get(ev.kind)
            if handler is not None:
                handler(ev)
            count += 1
        self.now = t_end
        self.dispatched += count
        return count

    def rng_stream(self, label: str) -> np.random.Generator:
        return rng_stream(self.seed, label)


class Radio:
    """Collision-free broadcast medium with a fixed per-hop latency.

    ``positions`` is any callable returning an ``(N, 2)`` array of node
    positions at a given time; in a simulation it is the mobility model.
    """

    def __init__(self, engine: Engine, positions: Callable[[SimTime], np.ndarray],
                 radio_range: float, hop_latency: float):
        self.engine = engine
        self.positions = positions
        self.radio_range = radio_range
        self.hop_latency = hop_latency
        self._cache_t: SimTime | None = None
        self._cache_pos: np.ndarray | None = None

    def _pos(self, at: SimTime) -> np.ndarray:
        if self._cache_t != at:
            self._cache_pos = self.positions(at)
            self._cache_t = at
        return self._cache_pos

    def neighbors(self, node: NodeId, at: SimTime) -> list[NodeId]:
        pos = self._pos(at)
        d2 = np.sum((pos - pos[node]) ** 2, axis=1)
        hits = np.flatnonzero(d2 <= self.radio_range ** 2)
        return [int(i) for i in hits if i != node]

    def in_range(self, a: NodeId, b: NodeId, at: SimTime) -> bool:
        pos = self._pos(at)
        dx, dy = pos[a] - pos[b]
        return dx * dx + dy * dy <= self.radio_range ** 2

    def broadcast(self, sender: NodeId, frame: Any, at: SimTime | None = None) -> set[NodeId]:
        """Schedule a delivery of ``frame`` to every node in range of ``sender``."""
        at = self.engine.now if at is None else at
        recipients = self.neighbors(sender, at)
        for r in recipients:
            self.engine.schedule(at + self.hop_latency, EventKind.FRAME_DELIVERY, r, (sender, frame))
        return set(recipients)

    def unicast(self, sender: NodeId, receiver: NodeId, frame: Any,
                at: SimTime | None = None) -> bool:
        """Deliver to one neighbor. Returns False (nothing scheduled) if out of range."""
        at = self.engine.now if at is None else at
        if not self.in_range(sender, receiver, at):
            return False
        self.engine.schedule(at + self.hop_latency, EventKind.FRAME_DELIVERY, receiver,
                             (sender, frame))
        return True

