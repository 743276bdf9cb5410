"""Delivery gates for event-driven computations: FIFO, causal, and their
tolerance-relaxed variants.

All four conditions share one implementation. A node keeps

* ``s[(k, l)]`` -- its view of how many messages k has sent to l,
* ``r[j]``      -- how many messages it has received from neighbor j,
* ``got[j]``    -- which of j's messages (by channel index) it has received,
* ``carriers[(k, l)][i]`` -- tolerances of the messages to i that carried
  entry (k, l) since it last changed (its length is the update counter U).

A message from j to i carries its tolerance mu and a set of ``s`` entries;
it is deliverable when, for every carried entry (k, i), at most mu of k's
first ``s[k->i]`` messages to i are still missing. The plain counter test
``s[k->i] - r_i[k] <= mu`` (``literal_counts``) agrees as long as no
message on the channel overtakes another; once a tolerance lets a later
message in early, r_i[k] also counts messages outside the causal past and
the test can accept too much. FDC/RFDC carry only the sender's own channel
entry; CDC/RCDC carry the sender's whole view, either every nonzero entry
(``full``) or only entries the receiver may still be missing (``sparse``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .graph import Topology

INF = math.inf


class MissingAttachment(ValueError):
    pass


class TolerancePolicy:
    """Chooses the tolerance attached to each outgoing message."""

    def init_node(self, i: int, topo: Topology) -> Any:
        return None

    def tolerance(self, state: Any, payload: Any, dst: int) -> float:
        raise NotImplementedError


class ConstantTolerance(TolerancePolicy):
    def __init__(self, mu: float):
        if mu < 0:
            raise ValueError("tolerance must be nonnegative")
        self.mu = mu

    def tolerance(self, state, payload, dst):
        return self.mu

    def __repr__(self) -> str:
        return f"ConstantTolerance({self.mu})"


class ChannelLog:
    """Received channel indices: all of 1..low plus the set ``above``."""

    __slots__ = ("low", "above")

    def __init__(self):
        self.low = 0
        self.above: set = set()

    def add(self, idx: int) -> None:
        self.above.add(idx)
        while self.low + 1 in self.above:
            self.low += 1
            self.above.remove(self.low)

    def discard(self, idx: int) -> None:
        if idx <= self.low:
            # only the newest tentative add is ever undone; reopen the prefix
            self.above.update(range(idx + 1, self.low + 1))
            self.low = idx - 1
        else:
            self.above.discard(idx)

    def missing(self, upto: int) -> int:
        if upto <= self.low:
            return 0
        return upto - self.low - sum(1 for x in self.above if x <= upto)


@dataclass
class GateState:
    node: int
    s: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    got: dict = field(default_factory=dict)
    carriers: dict = field(default_factory=dict)
    policy: Any = None


class DeliveryGate:
    """Relaxed causal delivery gate.

    ``own_row_only`` restricts attachments to the sender's own channel entry
    (the FIFO family). ``mode`` selects full or sparse piggybacking for the
    causal family. With ``literal_eq5`` the sparse rule omits an entry once
    it rode more than mu earlier messages, regardless of their tolerances.
    """

    framework = "event"

    def __init__(self, policy: TolerancePolicy, *, own_row_only: bool = False,
                 mode: str = "full", literal_eq5: bool = False, literal_counts: bool = False,
                 name: str | None = None):
        if mode not in ("full", "sparse"):
            raise ValueError(f"unknown attachment mode {mode!r}")
        self.policy = policy
        self.own_row_only = own_row_only
        self.mode = mode
        self.literal_eq5 = literal_eq5
        self.literal_counts = literal_counts
        self.name = name or ("rfdc" if own_row_only else "rcdc")

    def init_node(self, i: int, topo: Topology) -> GateState:
        st = GateState(i)
        st.r = {j: 0 for j in topo.neighbors(i)}
        st.got = {j: ChannelLog() for j in topo.neighbors(i)}
        st.policy = self.policy.init_node(i, topo)
        return st

    # -- sending ---------------------------------------------------------

    def stamp(self, st: GateState, dst: int, payload: Any) -> tuple[float, dict]:
        """Attach tolerance and counter entries to one message for ``dst``."""
        return self.stamp_event(st, [(dst, payload)])[0]

    def stamp_event(self, st: GateState, sends: list) -> list[tuple[float, dict]]:
        """Stamp all messages sent by one event. The event's own counters
        are bumped first: every send of the event precedes anything that
        later learns of the event, so each attachment already counts them."""
        mus = [self.policy.tolerance(st.policy, payload, dst) for dst, payload in sends]
        for dst, _ in sends:
            own = (st.node, dst)
            st.s[own] = st.s.get(own, 0) + 1
            self._refresh(st, own)
        out = []
        for (dst, _), mu in zip(sends, mus):
            own = (st.node, dst)
            entries: dict = {}
            if not self.own_row_only:
                for key, value in st.s.items():
                    if key == own or value == 0:
                        continue
                    if self.mode == "full":
                        entries[key] = value
                        continue
                    riders = st.carriers.setdefault(key, {}).setdefault(dst, [])
                    if self.literal_eq5:
                        keep = len(riders) <= mu
                    else:
                        keep = sum(1 for c in riders if c <= mu) <= mu
                    if keep:
                        entries[key] = value
                        riders.append(mu)
            entries[own] = st.s[own]
            out.append((mu, entries))
        return out

    @staticmethod
    def _refresh(st: GateState, key) -> None:
        st.carriers.pop(key, None)

    # -- receiving -------------------------------------------------------

    def admissible(self, st: GateState, src: int, mu: float, entries: dict) -> bool:
        """Delivery test with the message itself already counted as received."""
        if mu is None or not entries or (src, st.node) not in entries:
            raise MissingAttachment(f"message from {src} to {st.node} lacks ordering attachments")
        i = st.node
        for (k, l), value in entries.items():
            if l != i:
                continue
            if self.literal_counts:
                missing = value - st.r[k]
            else:
                missing = st.got[k].missing(value)
            if missing > mu:
                return False
        return True

    def _receive(self, st: GateState, src: int, entries: dict) -> int:
        st.r[src] += 1
        idx = entries.get((src, st.node), 0) if entries else 0
        if idx:
            st.got[src].add(idx)
        return idx

    def offer(self, st: GateState, src: int, mu: float, entries: dict) -> bool:
        idx = self._receive(st, src, entries)
        if not self.admissible(st, src, mu, entries):
            st.r[src] -= 1
            if idx:
                st.got[src].discard(idx)
            return False
        self._merge(st, entries)
        return True

    def force(self, st: GateState, src: int, mu: float, entries: dict) -> None:
        self._receive(st, src, entries)
        self._merge(st, entries)

    def _merge(self, st: GateState, entries: dict) -> None:
        for key, value in entries.items():
            if value > st.s.get(key, 0):
                st.s[key] = value
                self._refresh(st, key)

    def __repr__(self) -> str:
        return f"DeliveryGate({self.name}, {self.policy!r}, mode={self.mode})"


class UnorderedGate(DeliveryGate):
    """Accepts every message on arrival; attaches nothing but mu = inf."""

    def __init__(self):
        super().__init__(ConstantTolerance(INF), own_row_only=True, name="none")

    def stamp_event(self, st, sends):
        for dst, _ in sends:
            own = (st.node, dst)
            st.s[own] = st.s.get(own, 0) + 1
        return [(INF, {}) for _ in sends]

    def admissible(self, st, src, mu, entries):
        return True

    def _merge(self, st, entries):
        pass


def gate_fdc() -> DeliveryGate:
    return DeliveryGate(ConstantTolerance(0), own_row_only=True, name="fdc")


def gate_rfdc(policy: TolerancePolicy | float) -> DeliveryGate:
    if not isinstance(policy, TolerancePolicy):
        policy = ConstantTolerance(policy)
    return DeliveryGate(policy, own_row_only=True, name="rfdc")


def gate_cdc(mode: str = "full") -> DeliveryGate:
    return DeliveryGate(ConstantTolerance(0), mode=mode, name="cdc")


def gate_rcdc(policy: TolerancePolicy | float, mode: str = "full", **kw) -> DeliveryGate:
    if not isinstance(policy, TolerancePolicy):
        policy = ConstantTolerance(policy)
    return DeliveryGate(policy, mode=mode, name="rcdc", **kw)


def encode_entries(entries: dict) -> list[list[int]]:
    return [[k, l, v] for (k, l), v in sorted(entries.items())]


def decode_entries(raw) -> dict:
    try:
        return {(int(k), int(l)): int(v) for k, l, v in raw}
    except (TypeError, ValueError) as exc:
        raise MissingAttachment(f"malformed counter attachment {raw!r}") from exc
