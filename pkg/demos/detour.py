"""Two parallel paths, one through a black hole.

S(0) reaches D(3) either through 1 (a black hole) or through 2 (honest).
The black hole answers the route request first with an invented reply. The
source rejects it because the destination's signature does not verify, takes
the honest path, and still delivers everything.

The baseline also rejects the invented reply, but the black hole relays the
destination's genuine reply honestly, so the baseline is offered a valid
route through node 1. Without success ratios it never notices the lost data.
"""

from __future__ import annotations

import numpy as np

from manetsec import CbrTraffic, SimConfig, WorldConfig
from manetsec.adversary import AttackerProfile, AttackKind
from manetsec.network import Protocol, Simulation

positions = np.array([[0.0, 0.0], [200.0, 100.0], [200.0, -100.0], [400.0, 0.0]])
for protocol in (Protocol.TCLS, Protocol.BASELINE):
    world = WorldConfig(node_count=4, area=(2000.0, 2000.0), sim_duration=20.0, seed=1,
                        traffic=CbrTraffic(pairs=1, rate=4.0))
    sim = Simulation(SimConfig(world=world, protocol=protocol), positions=positions,
                     flows=[(0, 3)], profiles={1: AttackerProfile(AttackKind.BLACK_HOLE)})
    res = sim.run()
    print(f"{protocol.value:8s} route {sim.flows[0].route}  pdr {res.record.pdr:.3f}  "
          f"Tc(1) {res.trust[0].tc_of(1):.2f}  flagged {sorted(res.record.flagged)}")
