"""Deterministic MANET simulator with trust-based routing and CBC-X link security."""

from .engine import CbrTraffic, Engine, EventKind, Radio, SchedulingInPast, WorldConfig, rng_stream
from .network import DiscoveryParams, Protocol, RunLogs, RunResult, SimConfig, run_simulation
from .routing.trust import TrustParams

__version__ = "0.1.0"

__all__ = [
    "CbrTraffic", "DiscoveryParams", "Engine", "EventKind", "Protocol", "Radio", "RunLogs",
    "RunResult", "SchedulingInPast", "SimConfig", "TrustParams", "WorldConfig", "rng_stream",
    "run_simulation",
]
