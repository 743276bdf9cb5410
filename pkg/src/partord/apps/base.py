from __future__ import annotations

from typing import Any

from ..graph import Topology


class EventApp:
    """Event-driven application: one handler call per node event.

    ``on_event`` is called with ``src = payload = None`` for the initial
    event (and for self-scheduled wake-ups).
    """

    framework = "event"
    name = "event-app"

    def init_node(self, i: int, topo: Topology) -> Any:
        return None

    def on_event(self, ctx, src: int | None, payload: Any) -> None:
        raise NotImplementedError

    def done(self, states: list) -> bool:
        """Global termination as seen by the kernel; handlers are skipped
        afterwards while in-flight messages drain."""
        return False

    def metrics(self, states: list) -> dict:
        return {}


class PulseApp:
    """Pulse-driven application: messages fold information into the state,
    pulses compute and send."""

    framework = "pulse"
    name = "pulse-app"

    def init_node(self, i: int, topo: Topology) -> Any:
        return None

    def on_deliver(self, ctx, src: int, payload: Any) -> None:
        pass

    def on_pulse(self, ctx, rank: int) -> None:
        raise NotImplementedError

    def finished(self, state: Any) -> bool:
        return False

    def ready(self, states: list, i: int, rank: int) -> bool:
        return True

    def metrics(self, states: list) -> dict:
        return {}
