"""Partial-order message delivery: gates, a seeded simulator, applications
and an offline trace verifier."""

from .causality import EventHistory, PulseHistory
from .config import build, demo, load, normalize
from .simnet import ConfigError, IncompatibleDelays, RunReport, SimConfig, SimulationError, run
from .trace import MalformedTrace, Trace
from .verifier import CONDITIONS, CheckResult, check, donation_overtakes, fixtures

__version__ = "0.1.0"

__all__ = [
    "CONDITIONS", "CheckResult", "ConfigError", "EventHistory", "IncompatibleDelays",
    "MalformedTrace", "PulseHistory", "RunReport", "SimConfig", "SimulationError", "Trace",
    "build", "check", "demo", "donation_overtakes", "fixtures", "load", "normalize", "run",
]
