from __future__ import annotations

import pytest

from manetsec import SimConfig
from manetsec.metrics import (
    MetricsCollector,
    MetricsRecord,
    UnknownPacketId,
    detection_quality,
    metrics_from_log,
)
from manetsec.network import Simulation
from tests.conftest import desk_world


def test_pdr_ratio():
    c = MetricsCollector()
    for i in range(100):
        c.record_data_send(i, 0.0)
    for i in range(80):
        c.record_data_receive(i, 1.0)
    assert c.record.pdr == 0.8


def test_average_delay():
    c = MetricsCollector()
    c.record_data_send(1, 0.0)
    c.record_data_send(2, 1.0)
    c.record_data_receive(1, 0.1)
    c.record_data_receive(2, 1.3)
    assert c.record.avg_delay == pytest.approx(0.2)


def test_duplicates_ignored_and_unknown_ids_rejected():
    c = MetricsCollector()
    c.record_data_send(1, 0.0)
    assert c.record_data_receive(1, 0.5)
    assert not c.record_data_receive(1, 0.7)
    assert c.record.data_received == 1 and c.record.delay_sum == 0.5
    with pytest.raises(UnknownPacketId):
        c.record_data_receive(2, 1.0)


def test_control_counting_and_overhead():
    c = MetricsCollector()
    for _ in range(10):
        c.record_control("RREQ")
    assert c.record.control_packets == 10
    with pytest.raises(ValueError):
        c.record_control("DATA")
    rec = MetricsRecord(data_sent=400, data_received=400, control_packets=200)
    assert rec.control_overhead == 0.5


def test_overhead_undefined_without_deliveries():
    rec = MetricsRecord(data_sent=10, data_received=0, control_packets=50)
    assert rec.control_overhead is None and rec.avg_delay is None and rec.pdr == 0.0
    assert MetricsRecord().pdr == 0.0


def test_detection_quality():
    assert detection_quality(MetricsRecord(flagged={1, 2}, true_attackers={1, 2})) == (1.0, 0)
    assert detection_quality(MetricsRecord()) == (None, 0)
    rec = MetricsRecord(flagged={1, 2, 9}, true_attackers={1, 2, 3, 4, 5})
    assert detection_quality(rec) == (0.4, 1)


def test_corrupt_arrivals_never_counted_as_received():
    sim = Simulation(SimConfig(world=desk_world(6), attackers=8, attack_kind="tamper"))
    res = sim.run()
    tampered = sum(1 for _, _, a in res.attack_log if a == "tamper")
    assert tampered > 0
    assert res.record.corrupt_frames == tampered
    assert res.record.data_received <= res.record.data_sent


def test_record_is_reproducible_from_the_metrics_log():
    sim = Simulation(SimConfig(world=desk_world(2), attackers=6))
    res = sim.run()
    again = metrics_from_log(sim.metrics.log, res.record.flagged, res.record.true_attackers)
    assert again == res.record
    assert res.record.data_received <= res.record.data_sent
