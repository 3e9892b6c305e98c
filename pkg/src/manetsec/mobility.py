"""Random waypoint mobility.

Each node alternates between travelling in a straight line at a constant
speed towards a uniformly drawn waypoint and pausing there for a fixed time.
Every node owns its own substream of the ``"mobility"`` stream, so the
trajectory of a node is a pure function of ``(seed, node)`` and does not depend
on the order in which positions are queried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import NodeId, SimTime, rng_stream


@dataclass
class MobilityState:
    current: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float
    pause_until: SimTime | None
    leg_start: tuple[tuple[float, float], SimTime]
    arrival: SimTime

    def position(self, t: SimTime) -> tuple[float, float]:
        (x0, y0), t0 = self.leg_start
        if t >= self.arrival:
            return self.waypoint
        if t <= t0:
            return (x0, y0)
        frac = (t - t0) / (self.arrival - t0)
        wx, wy = self.waypoint
        return (x0 + (wx - x0) * frac, y0 + (wy - y0) * frac)


class RandomWaypoint:
    """Random waypoint model over a rectangular area.

    Args:
        node_count: number of nodes.
        area: ``(width, height)`` in metres.
        speed: constant travel speed in m/s, shared by all nodes.
        pause_time: dwell time at each waypoint in seconds.
        seed: global scenario seed.

    Initial positions are uniform over the area and every node starts
    "paused until 0", so the first leg begins at t = 0.
    """

    def __init__(self, node_count: int, area: tuple[float, float], speed: float,
                 pause_time: float, seed: int):
        if speed <= 0:
            raise ValueError("speed must be > 0")
        self.node_count = node_count
        self.width, self.height = float(area[0]), float(area[1])
        self.speed = float(speed)
        self.pause_time = float(pause_time)
        self._rngs = [rng_stream(seed, f"mobility:{i}") for i in range(node_count)]
        self._states: list[MobilityState] = []
        for i in range(node_count):
            start = self._draw(i)
            self._states.append(MobilityState(
                current=start, waypoint=start, speed=self.speed, pause_until=0.0,
                leg_start=(start, 0.0), arrival=0.0))
        self._legs_started = [0] * node_count

    def _draw(self, node: NodeId) -> tuple[float, float]:
        x, y = self._rngs[node].uniform((0.0, 0.0), (self.width, self.height))
        return (float(x), float(y))

    def next_waypoint(self, node: NodeId) -> tuple[tuple[float, float], SimTime]:
        """Start the next leg of ``node`` once its pause ends.

        Returns the new waypoint and the arrival time at it.
        """
        st = self._states[node]
        start_t = st.pause_until if st.pause_until is not None else st.arrival
        origin = st.waypoint
        target = self._draw(node)
        dist = math.hypot(target[0] - origin[0], target[1] - origin[1])
        st.leg_start = (origin, start_t)
        st.waypoint = target
        st.arrival = start_t + dist / self.speed
        st.pause_until = st.arrival + self.pause_time
        st.current = origin
        self._legs_started[node] += 1
        return target, st.arrival

    def _advance(self, node: NodeId, t: SimTime) -> MobilityState:
        st = self._states[node]
        # a node whose pause has ended by t starts a fresh leg; several legs may
        # elapse between two queries
        while st.pause_until is not None and t >= st.pause_until and (
                st.pause_until > st.leg_start[1] or self._legs_started[node] == 0):
            self.next_waypoint(node)
        return st

    def position_at(self, node: NodeId, t: SimTime) -> tuple[float, float]:
        st = self._advance(node, t)
        st.current = st.position(t)
        return st.current

    def positions_at(self, t: SimTime) -> np.ndarray:
        return np.array([self.position_at(i, t) for i in range(self.node_count)])

    def state(self, node: NodeId) -> MobilityState:
        return self._states[node]
