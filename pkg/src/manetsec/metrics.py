"""Per-run delivery, delay, overhead and detection metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import NodeId, SimTime


class UnknownPacketId(KeyError):
    pass


CONTROL_KINDS = ("RREQ", "RREP")


@dataclass
class MetricsRecord:
    data_sent: int = 0
    data_received: int = 0
    control_packets: int = 0
    delay_sum: float = 0.0
    corrupt_frames: int = 0
    invalid_rreps: int = 0
    flagged: set[NodeId] = field(default_factory=set)
    true_attackers: set[NodeId] = field(default_factory=set)

    @property
    def pdr(self) -> float:
        return self.data_received / self.data_sent if self.data_sent else 0.0

    @property
    def avg_delay(self) -> float | None:
        return self.delay_sum / self.data_received if self.data_received else None

    @property
    def control_overhead(self) -> float | None:
        """Control transmissions per received data packet; None when nothing arrived."""
        return self.control_packets / self.data_received if self.data_received else None


class MetricsCollector:
    """Accumulates one run's counters.

    Every accepted call is also appended to ``log`` so the record can be
    rebuilt from the log alone (see :func:`metrics_from_log`).
    """

    def __init__(self) -> None:
        self.record = MetricsRecord()
        self._sent_at: dict[int, SimTime] = {}
        self._delivered: set[int] = set()
        self.control_by_kind = {k: 0 for k in CONTROL_KINDS}
        self.log: list[tuple] = []

    def record_data_send(self, packet_id: int, t: SimTime) -> None:
        if packet_id in self._sent_at:
            raise ValueError(f"packet id {packet_id} sent twice")
        self._sent_at[packet_id] = t
        self.record.data_sent += 1
        self.log.append(("send", packet_id, t))

    def record_data_receive(self, packet_id: int, t: SimTime) -> bool:
        """Count a delivery. Returns False for a duplicate of an already delivered id."""
        sent = self._sent_at.get(packet_id)
        if sent is None:
            raise UnknownPacketId(packet_id)
        if packet_id in self._delivered:
            return False
        self._delivered.add(packet_id)
        self.record.data_received += 1
        self.record.delay_sum += t - sent
        self.log.append(("recv", packet_id, t))
        return True

    def record_corrupt(self) -> None:
        self.record.corrupt_frames += 1
        self.log.append(("corrupt",))

    def record_control(self, kind: str) -> None:
        if kind not in self.control_by_kind:
            raise ValueError(f"not a control packet kind: {kind!r}")
        self.control_by_kind[kind] += 1
        self.record.control_packets += 1
        self.log.append(("control", kind))

    def record_invalid_rrep(self) -> None:
        self.record.invalid_rreps += 1
        self.log.append(("invalid_rrep",))

    def delivered(self, packet_id: int) -> bool:
        return packet_id in self._delivered

    def finalize(self, flagged: set[NodeId], attackers: set[NodeId]) -> MetricsRecord:
        self.record.flagged = set(flagged)
        self.record.true_attackers = set(attackers)
        return self.record


def metrics_from_log(log: list[tuple], flagged: set[NodeId] = frozenset(),
                     attackers: set[NodeId] = frozenset()) -> MetricsRecord:
    """Rebuild a record by replaying a collector's log through a fresh collector."""
    c = MetricsCollector()
    for entry in log:
        tag = entry[0]
        if tag == "send":
            c.record_data_send(entry[1], entry[2])
        elif tag == "recv":
            c.record_data_receive(entry[1], entry[2])
        elif tag == "control":
            c.record_control(entry[1])
        elif tag == "corrupt":
            c.record_corrupt()
        elif tag == "invalid_rrep":
            c.record_invalid_rrep()
        else:
            raise ValueError(f"unknown metrics log entry {entry!r}")
    return c.finalize(set(flagged), set(attackers))


def detection_quality(record: MetricsRecord) -> tuple[float | None, int]:
    """(true positive rate, false positive count). The rate is None without attackers."""
    attackers = record.true_attackers
    tpr = len(record.flagged & attackers) / len(attackers) if attackers else None
    return tpr, len(record.flagged - attackers)
