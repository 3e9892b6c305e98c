"""A five-node chain with one data-dropping relay.

S(0) - 1 - 2 - 3 - D(4) on a line, node 2 signs every route reply correctly
but silently discards every data packet. The source keeps getting replies that
show node 2's success ratio at zero and lowers its trust until node 2 is
quarantined. Prints the source's trust trajectory per epoch and the routes used.
"""

from __future__ import annotations

import numpy as np

from manetsec import CbrTraffic, SimConfig, WorldConfig
from manetsec.adversary import AttackerProfile, AttackKind
from manetsec.network import Simulation

N = 5
world = WorldConfig(node_count=N, area=(2000.0, 2000.0), sim_duration=46.0, seed=1,
                    traffic=CbrTraffic(pairs=1, rate=4.0))
positions = np.array([[200.0 * i, 0.0] for i in range(N)])
dropper = AttackerProfile(AttackKind.SELECTIVE_DROP, drop_prob=1.0)
sim = Simulation(SimConfig(world=world), positions=positions, flows=[(0, N - 1)],
                 profiles={2: dropper})
res = sim.run()

print("epoch  Tc(1)  Tc(2)  Tc(3)  quarantined")
last: dict[int, dict[int, float]] = {}
flagged: dict[int, set[int]] = {}
for u in res.trust[0].history:
    last.setdefault(u.epoch, {})[u.subject] = u.tc
    if u.malicious:
        flagged.setdefault(u.epoch, set()).add(u.subject)
tc = {1: 0.5, 2: 0.5, 3: 0.5}
for epoch in sorted(last):
    tc.update(last[epoch])
    marks = sorted(flagged.get(epoch, ()))
    print(f"{epoch:5d}  {tc[1]:.2f}   {tc[2]:.2f}   {tc[3]:.2f}   {marks or ''}")
rec = res.record
print(f"\nsent {rec.data_sent}, received {rec.data_received}, pdr {rec.pdr:.3f}")
print(f"flagged by the source: {sorted(rec.flagged)}")
print("on a pure chain there is no detour, so quarantine stops traffic rather than rerouting it")
