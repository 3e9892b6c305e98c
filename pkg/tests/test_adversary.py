from __future__ import annotations

import numpy as np
import pytest

from manetsec import SimConfig
from manetsec.adversary import (
    Adversary,
    AttackerProfile,
    AttackKind,
    assign_profiles,
    blackhole_rrep,
    place_nodes,
    selective_drop,
    tamper_frame,
)
from manetsec.linksec import AuthFailed, FrameHeader, cbcx_decrypt, cbcx_encrypt
from manetsec.network import Simulation
from manetsec.routing import KeyStore, originate, prec_mac_valid
from tests.conftest import desk_world


def test_profile_ranges():
    with pytest.raises(ValueError):
        AttackerProfile(AttackKind.SELECTIVE_DROP, drop_prob=1.5)
    with pytest.raises(ValueError):
        AttackerProfile(AttackKind.FRAME_TAMPER, tamper_rate=-0.1)


def test_selective_drop_degenerate_and_empirical():
    rng = np.random.default_rng(0)
    assert not any(selective_drop(rng, 0.0) for _ in range(1000))
    assert all(selective_drop(rng, 1.0) for _ in range(1000))
    rate = np.mean([selective_drop(rng, 0.5) for _ in range(10_000)])
    assert abs(rate - 0.5) <= 0.02


def test_adversary_drop_decisions():
    adv = Adversary({1: AttackerProfile(AttackKind.BLACK_HOLE),
                     2: AttackerProfile(AttackKind.SELECTIVE_DROP, drop_prob=0.0),
                     3: AttackerProfile(AttackKind.FRAME_TAMPER)}, np.random.default_rng(1))
    assert adv.drops(1, 0.0)
    assert not adv.drops(2, 0.0)
    assert not adv.drops(3, 0.0)
    assert not adv.drops(4, 0.0)
    assert adv.log == [(0.0, 1, "drop")]


def test_tamper_rate_one_always_breaks_mac():
    key = bytes(16)
    rng = np.random.default_rng(2)
    adv = Adversary({5: AttackerProfile(AttackKind.FRAME_TAMPER, tamper_rate=1.0)}, rng)
    for i in range(200):
        data = bytes([i % 256]) * (i % 30)
        f = cbcx_encrypt(key, FrameHeader(1, 1, len(data), 0, i), data)
        with pytest.raises(AuthFailed):
            cbcx_decrypt(key, adv.tamper(5, f, 0.0))


def test_tamper_rate_zero_is_harmless():
    key = bytes(16)
    adv = Adversary({5: AttackerProfile(AttackKind.FRAME_TAMPER, tamper_rate=0.0)},
                    np.random.default_rng(3))
    f = cbcx_encrypt(key, FrameHeader(1, 1, 3, 0, 9), b"abc")
    assert adv.tamper(5, f, 0.0) is f
    assert adv.tamper(6, f, 0.0) is f
    assert adv.log == []


def test_tamper_flips_exactly_one_body_bit():
    f = cbcx_encrypt(bytes(16), FrameHeader(1, 1, 20, 0, 9), bytes(20))
    g = tamper_frame(np.random.default_rng(4), f)
    diff = int.from_bytes(f.body, "big") ^ int.from_bytes(g.body, "big")
    assert bin(diff).count("1") == 1
    assert g.header == f.header and g.mac == f.mac


def test_forged_reply_lacks_valid_destination_credentials():
    ks = KeyStore(0, 10)
    rreq = originate(ks, 0, 9, 4)
    forged = blackhole_rrep(5, rreq, ks, np.random.default_rng(5))
    assert forged.route == [0, 5, 9]
    assert forged.first_invalid_signature(ks) == 0
    assert not prec_mac_valid(ks, forged)
    # its own signature is genuine: attackers hold their own key and no other
    assert forged.signatures[1].signer == 5


def test_placement():
    attackers, flows = place_nodes(11, 50, 10, 4)
    ends = [n for f in flows for n in f]
    assert len(attackers) == 10 and len(set(ends)) == 8
    assert not set(attackers) & set(ends)
    # flows do not depend on how many attackers are drawn
    assert place_nodes(11, 50, 25, 4)[1] == flows
    assert set(place_nodes(11, 50, 5, 4)[0]) <= set(attackers)
    with pytest.raises(ValueError):
        place_nodes(11, 10, 5, 4)


def test_mixed_assignment_alternates():
    prof = assign_profiles([3, 7, 9, 12], "mixed")
    assert [prof[n].kind for n in (3, 7, 9, 12)] == [
        AttackKind.BLACK_HOLE, AttackKind.SELECTIVE_DROP] * 2
    assert {p.kind for p in assign_profiles([1, 2], "tamper").values()} == {AttackKind.FRAME_TAMPER}
    with pytest.raises(ValueError):
        assign_profiles([1], "wormhole")


def _trace(sim):
    sent = []
    orig = sim.metrics.record_data_send
    sim.metrics.record_data_send = lambda pid, t: (sent.append(t), orig(pid, t))[1]
    sim.run()
    return sent


def test_attacks_do_not_perturb_mobility_or_traffic():
    a = Simulation(SimConfig(world=desk_world(8, sim_duration=10.0), attackers=0))
    b = Simulation(SimConfig(world=desk_world(8, sim_duration=10.0), attackers=20))
    ta, tb = _trace(a), _trace(b)
    assert ta == tb
    for t in (0.0, 3.3, 9.9):
        assert np.array_equal(a.mobility.positions_at(t), b.mobility.positions_at(t))
    assert a.flow_pairs == b.flow_pairs
