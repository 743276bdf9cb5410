"""Local clock mechanism and delivery gate for pulse-driven computations.

Timing conventions used throughout:

* ``rank`` is the rank of the last pulse a node generated (0 before the
  first one).
* A message delivered while a node sits at ``rank`` feeds the node's next
  pulse; the event belongs to pulse ``rank + 1``, called its *window*.
* A message sent at pulse ``l_j`` with minimum delay ``rho`` may be
  delivered only in a window ``>= l_j + rho``.
* Before generating pulse ``L``, a node needs every message from neighbor j
  sent at a pulse ``<= L - 1 - delta_j(L)`` to be delivered. With
  ``rho = 1`` and ``delta = 0`` this is the synchronous round structure:
  the messages of pulse ``l`` are consumed in window ``l + 1``.

Control messages announce, per sender pulse and destination, how many
application messages follow; they are never gated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .graph import Topology


class PulseContractError(RuntimeError):
    pass


class DelayPolicy:
    """Minimum delay attached by senders and maximum delay used by receivers."""

    name = "delays"

    def rho(self, i: int, rank: int, j: int) -> int:
        raise NotImplementedError

    def delta(self, i: int, rank: int, j: int) -> int:
        raise NotImplementedError


class ConstantDelays(DelayPolicy):
    def __init__(self, rho: int = 1, delta: int = 0):
        if rho < 1 or delta < 0:
            raise ValueError("need rho >= 1 and delta >= 0")
        self._rho = rho
        self._delta = delta
        self.name = "synchronous" if (rho, delta) == (1, 0) else f"constant({rho},{delta})"

    def rho(self, i, rank, j):
        return self._rho

    def delta(self, i, rank, j):
        return min(self._delta, rank)

    def __repr__(self) -> str:
        return f"ConstantDelays(rho={self._rho}, delta={self._delta})"


def synchronous() -> ConstantDelays:
    return ConstantDelays(1, 0)


@dataclass
class PulseState:
    owner: int
    neighbors: tuple
    delta: Callable[[int, int], int]
    rank: int = 0
    safe: set = field(default_factory=set)
    announced: dict = field(default_factory=dict)
    delivered: dict = field(default_factory=dict)
    confirmed: dict = field(default_factory=dict)
    last_delta: dict = field(default_factory=dict)
    _unread: bool = False

    def __post_init__(self):
        self.confirmed = {j: 0 for j in self.neighbors}

    @property
    def window(self) -> int:
        return self.rank + 1

    def on_control(self, j: int, rank: int, count: int) -> None:
        if (j, rank) in self.safe:
            raise PulseContractError(f"second control message for pulse {rank} of {j}")
        self.safe.add((j, rank))
        self.announced[(j, rank)] = count

    def pending(self, j: int, rank: int) -> int:
        """Announced-but-undelivered messages of pulse ``rank`` at ``j``;
        ranks <= 0 count as safe and empty."""
        if rank <= 0:
            return 0
        return self.announced.get((j, rank), 0) - self.delivered.get((j, rank), 0)

    def is_complete(self, j: int, rank: int) -> bool:
        return rank <= 0 or ((j, rank) in self.safe and self.pending(j, rank) == 0)

    def has_advanced(self) -> bool:
        if self._unread:
            return False
        nxt = self.rank + 1
        deltas = {}
        for j in self.neighbors:
            d = self.delta(nxt, j)
            if not 0 <= d <= nxt:
                raise PulseContractError(f"delta {d} outside 0..{nxt} at node {self.owner}")
            deltas[j] = d
            target = nxt - 1 - d
            c = self.confirmed[j]
            while c < target and self.is_complete(j, c + 1):
                c += 1
            self.confirmed[j] = c
            if c < target:
                return False
        self.rank = nxt
        self.last_delta = deltas
        self._unread = True
        return True

    def get_current(self) -> int:
        if not self._unread:
            raise PulseContractError("get_current without a preceding advance")
        self._unread = False
        return self.rank


def pulse_clock_tick(state: PulseState) -> int:
    return state.get_current()


def gate_psdc(state: PulseState, src: int, send_rank: int | None, rho: int | None) -> bool:
    """Accept iff the receiving window is at least ``send_rank + rho``; on
    acceptance the message is counted against the sender pulse's announcement."""
    if send_rank is None or rho is None:
        raise ValueError(f"message from {src} lacks pulse rank or minimum delay")
    if state.window < send_rank + rho:
        return False
    key = (src, send_rank)
    state.delivered[key] = state.delivered.get(key, 0) + 1
    return True


def force_deliver(state: PulseState, src: int, send_rank: int) -> None:
    key = (src, send_rank)
    state.delivered[key] = state.delivered.get(key, 0) + 1


def validate_compatibility(policy: DelayPolicy, topo: Topology, horizon: int):
    """First (send_rank, j, i) whose message could be forced out before its
    earliest acceptance window, or None.

    A message from j at pulse l_j with minimum delay rho is first acceptable
    in window l_j + rho; every receiver pulse L in (l_j, l_j + rho) must leave
    it outstanding, i.e. ``delta_i^j(L) >= L - l_j``.
    """
    for lj in range(1, horizon + 1):
        for j in topo.nodes:
            for i in topo.neighbors(j):
                rho = policy.rho(j, lj, i)
                if rho < 1:
                    return (lj, j, i)
                for L in range(lj + 1, lj + rho):
                    if policy.delta(i, L, j) < L - lj:
                        return (lj, j, i)
    return None
