"""Happened-before, vector clocks, pred/succ and in-transit counts.

Online pieces (``EventVectorClock``, ``merge_clock``) are used by the
simulator; everything else rebuilds causality offline from a ``Trace``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .trace import MalformedTrace, Trace


class EventId(NamedTuple):
    node: int
    time: int


class PulseId(NamedTuple):
    node: int
    rank: int


@dataclass(frozen=True)
class EventVectorClock:
    owner: int
    at: int
    entries: tuple  # entries[h] for h in 1..n; index 0 unused

    @classmethod
    def initial(cls, owner: int, n: int) -> "EventVectorClock":
        """Clock of the first event at ``owner`` (no message involved)."""
        e = [0] * (n + 1)
        e[owner] = 1
        return cls(owner, 1, tuple(e))

    def tick(self, incoming: Sequence[int] | None = None) -> "EventVectorClock":
        return merge_clock(self, incoming)


def merge_clock(local: EventVectorClock, incoming: Sequence[int] | None) -> EventVectorClock:
    """Clock of the next event at ``local.owner``, optionally triggered by a
    message stamped with the sender's clock ``incoming``."""
    entries = list(local.entries)
    if incoming is not None:
        if len(incoming) != len(entries):
            raise ValueError(f"clock length mismatch: {len(incoming)} vs {len(entries)}")
        entries = [max(a, b) for a, b in zip(entries, incoming)]
    t = local.at + 1
    entries[local.owner] = t
    return EventVectorClock(local.owner, t, tuple(entries))


class Message(NamedTuple):
    msg: int
    src: int
    dst: int
    send_t: int        # sender event time (event-driven) or sender pulse rank
    recv_t: int        # receiver event time / event window rank, -1 if undelivered
    mu: float | None
    rho: int | None
    attach: dict | None
    send_seq: int
    recv_seq: int


class EventHistory:
    """Offline causal structure of an event-driven trace.

    Events are the ``local`` and ``deliver`` records; event ``e`` has clock
    row ``clocks[e]`` (column h is E^h, column 0 unused).
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        n = self.n = trace.n
        nodes: list[int] = []
        times: list[int] = []
        self.index: dict[EventId, int] = {}
        self.event_seq: list[int] = []
        self.event_msg: list[int | None] = []
        last_t = [0] * (n + 1)
        sends: dict[int, tuple] = {}
        recv: dict[int, tuple] = {}
        for r in trace.records:
            if r.kind == "send":
                if r.t is None:
                    raise MalformedTrace(f"seq {r.seq}: event-driven send needs t")
                sends[r.msg] = r
            elif r.kind in ("local", "deliver"):
                t = r.t
                if t != last_t[r.node] + 1:
                    raise MalformedTrace(
                        f"seq {r.seq}: event time {t} at node {r.node} after {last_t[r.node]}")
                last_t[r.node] = t
                self.index[EventId(r.node, t)] = len(nodes)
                nodes.append(r.node)
                times.append(t)
                self.event_seq.append(r.seq)
                self.event_msg.append(r.msg if r.kind == "deliver" else None)
                if r.kind == "deliver":
                    recv[r.msg] = r
        self.last_time = last_t
        m = len(nodes)
        self.ev_node = np.asarray(nodes, dtype=np.int64)
        self.ev_time = np.asarray(times, dtype=np.int64)
        prev = np.full(m, -1, dtype=np.int64)
        src = np.full(m, -1, dtype=np.int64)
        for e in range(m):
            if times[e] > 1:
                prev[e] = self.index[EventId(nodes[e], times[e] - 1)]
            mid = self.event_msg[e]
            if mid is not None:
                s = sends[mid]
                key = EventId(s.node, s.t)
                if key not in self.index:
                    raise MalformedTrace(f"message {mid} sent from unknown event {key}")
                src[e] = self.index[key]
        self.ev_prev = prev
        self.ev_src = src
        self.clocks = _kernels.event_clocks(n, self.ev_node, self.ev_time, prev, src)

        self.messages: dict[int, Message] = {}
        for mid, s in sends.items():
            d = recv.get(mid)
            self.messages[mid] = Message(
                mid, s.node, s.peer, s.t, d.t if d is not None else -1,
                s.mu, s.rho, s.attach, s.seq, d.seq if d is not None else -1)
        self._build_inbound()

    def _build_inbound(self) -> None:
        by_dst: list[list[Message]] = [[] for _ in range(self.n + 1)]
        for m in self.messages.values():
            if not m.attach or "control" not in m.attach:
                by_dst[m.dst].append(m)
        ptr = [0]
        src, st, rt = [], [], []
        for i in range(self.n + 1):
            for m in by_dst[i]:
                src.append(m.src)
                st.append(m.send_t)
                rt.append(m.recv_t)
            ptr.append(len(src))
        self.in_ptr = np.asarray(ptr, dtype=np.int64)
        self.in_src = np.asarray(src, dtype=np.int64)
        self.in_send_t = np.asarray(st, dtype=np.int64)
        self.in_recv_t = np.asarray(rt, dtype=np.int64)

    # -- lookups ---------------------------------------------------------

    def event(self, e: EventId) -> int:
        try:
            return self.index[EventId(*e)]
        except KeyError:
            raise KeyError(f"unknown event {tuple(e)}") from None

    def clock(self, e: EventId) -> tuple[int, ...]:
        return tuple(int(v) for v in self.clocks[self.event(e)])

    def send_event(self, msg: int) -> int:
        m = self.messages[msg]
        return self.index[EventId(m.src, m.send_t)]

    def transit_matrix(self, q_ev, q_node, q_time) -> np.ndarray:
        """Row q, column k: messages k -> q_node[q] sent causally no later than
        the clock row of event q_ev[q] and not received by time q_time[q]."""
        return _kernels.transit_counts(
            self.clocks, np.asarray(q_ev, dtype=np.int64), np.asarray(q_node, dtype=np.int64),
            np.asarray(q_time, dtype=np.int64), self.in_ptr, self.in_src,
            self.in_send_t, self.in_recv_t, self.n)


def happened_before(h: EventHistory, a: EventId, b: EventId) -> bool:
    ia, ib = h.event(a), h.event(b)
    if ia == ib:
        return False
    return int(h.clocks[ib, a[0]]) >= a[1]


def pred(h: EventHistory, j: int, e: EventId) -> EventId | None:
    """Latest event at ``j`` that happened before ``e`` (None if there is none)."""
    if j == e[0]:
        raise ValueError("pred is defined for a node other than the event's own")
    t = int(h.clocks[h.event(e), j])
    return EventId(j, t) if t > 0 else None


def succ(h: EventHistory, i: int, e: EventId) -> EventId | None:
    """Earliest event at ``i`` that ``e`` happened before (None if there is none)."""
    if i == e[0]:
        raise ValueError("succ is defined for a node other than the event's own")
    h.event(e)
    node, t = e
    for ti in range(1, h.last_time[i] + 1):
        if int(h.clocks[h.index[EventId(i, ti)], node]) >= t:
            return EventId(i, ti)
    return None


def event_time(e: EventId | None) -> int:
    return 0 if e is None else e.time


def transit_count(h: EventHistory, i: int, t_i: int) -> dict[int, int]:
    """M_i(t_i): per-neighbor count of messages in transit toward ``i`` in the
    global state induced by the clock of event (i, t_i)."""
    if not 1 <= t_i <= h.last_time[i]:
        raise ValueError(f"node {i} has no event at time {t_i}")
    e = h.index[EventId(i, t_i)]
    row = h.transit_matrix([e], [i], [t_i])[0]
    senders = {int(s) for s in h.in_src[h.in_ptr[i]:h.in_ptr[i + 1]]}
    return {k: int(row[k]) for k in sorted(senders)}


def reachability(h: EventHistory) -> np.ndarray:
    """Transitive closure of the immediate-precedence relation, built by
    explicit graph search; independent of the vector clocks."""
    m = len(h.ev_node)
    succs: list[list[int]] = [[] for _ in range(m)]
    for e in range(m):
        if h.ev_prev[e] >= 0:
            succs[int(h.ev_prev[e])].append(e)
        if h.ev_src[e] >= 0:
            succs[int(h.ev_src[e])].append(e)
    reach = np.zeros((m, m), dtype=np.bool_)
    for a in range(m):
        stack = list(succs[a])
        while stack:
            b = stack.pop()
            if not reach[a, b]:
                reach[a, b] = True
                stack.extend(succs[b])
    return reach


def clock_mismatches(h: EventHistory) -> int:
    """Pairs where clock comparison and graph reachability disagree."""
    return int(_kernels.hb_mismatches(h.clocks, h.ev_node, h.ev_time, reachability(h)))


# -- pulse-driven ---------------------------------------------------------


class PulseHistory:
    """Offline view of a pulse-driven trace: pulses per node, application
    messages with (send rank, delivery window), and recorded delays."""

    def __init__(self, trace: Trace):
        self.trace = trace
        n = self.n = trace.n
        self.max_rank = [0] * (n + 1)
        self.pulse_seq: dict[PulseId, int] = {}
        self.delta: dict[PulseId, dict[int, int]] = {}
        sends = {}
        recv = {}
        for r in trace.records:
            if r.kind == "pulse":
                if r.rank != self.max_rank[r.node] + 1:
                    raise MalformedTrace(f"seq {r.seq}: pulse ranks at node {r.node} not consecutive")
                self.max_rank[r.node] = r.rank
                self.pulse_seq[PulseId(r.node, r.rank)] = r.seq
                if r.attach and "delta" in r.attach:
                    self.delta[PulseId(r.node, r.rank)] = {
                        int(k): int(v) for k, v in r.attach["delta"].items()}
            elif r.kind == "send":
                if r.rank is None:
                    raise MalformedTrace(f"seq {r.seq}: pulse-driven send needs rank")
                sends[r.msg] = r
            elif r.kind == "deliver":
                recv[r.msg] = r
        self.messages: dict[int, Message] = {}
        for mid, s in sends.items():
            d = recv.get(mid)
            self.messages[mid] = Message(
                mid, s.node, s.peer, s.rank, d.rank if d is not None else -1,
                s.mu, s.rho, s.attach, s.seq, d.seq if d is not None else -1)

    def app_messages(self) -> list[Message]:
        return [m for m in self.messages.values() if not (m.attach and "control" in m.attach)]


def pulse_clocks(h: PulseHistory, topo) -> dict[PulseId, tuple[int, ...]]:
    """P_i(l) rebuilt from the pulse precedence relation: same-node succession
    plus l-1 at a neighbor preceding l at i."""
    n = h.n
    clocks: dict[PulseId, tuple[int, ...]] = {}
    top = max(h.max_rank[1:], default=0)
    for rank in range(1, top + 1):
        for i in range(1, n + 1):
            if rank > h.max_rank[i]:
                continue
            entries = [0] * (n + 1)
            preds = []
            if rank > 1:
                preds.append(PulseId(i, rank - 1))
                preds += [PulseId(j, rank - 1) for j in topo.neighbors(i)
                          if h.max_rank[j] >= rank - 1]
            for p in preds:
                entries = [max(a, b) for a, b in zip(entries, clocks[p])]
            entries[i] = rank
            clocks[PulseId(i, rank)] = tuple(entries)
    return clocks
