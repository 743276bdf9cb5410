"""Asynchronous Karp-Zhang backtrack search with donation-protecting
tolerances.

Subproblems are identified by their path (tuple of child indices) in the
search tree, so lexicographic order on paths is depth-first order and the
leftmost subproblem of a frontier is simply its minimum.
"""

from __future__ import annotations

import bisect
import math
import random
from collections import Counter
from dataclasses import dataclass, field

from ..event_order import TolerancePolicy
from ..graph import Topology
from ..trace import Trace
from .base import EventApp

REQ = "req"
NOREQ = "noreq"
DON = "don"


# -- search trees ----------------------------------------------------------


class TreeSource:
    name = "tree"

    def branch(self, path: tuple) -> list[tuple]:
        """Children of ``path``; an empty list means the subproblem is a leaf."""
        raise NotImplementedError


class SyntheticTree(TreeSource):
    """Seeded random tree with exactly ``leaves`` leaves; every internal
    node has between 2 and ``maxb`` children."""

    def __init__(self, seed: int = 0, leaves: int = 15, maxb: int = 3):
        if leaves < 1 or maxb < 2:
            raise ValueError("need leaves >= 1 and maxb >= 2")
        self.seed, self.leaves, self.maxb = seed, leaves, maxb
        self.name = f"synthetic({seed},{leaves},{maxb})"
        rng = random.Random(seed)
        self._children: dict[tuple, list[tuple]] = {}
        stack = [((), leaves)]
        while stack:
            path, budget = stack.pop()
            if budget == 1:
                self._children[path] = []
                continue
            k = rng.randint(2, min(self.maxb, budget))
            cuts = sorted(rng.sample(range(1, budget), k - 1))
            sizes = [b - a for a, b in zip([0] + cuts, cuts + [budget])]
            kids = [path + (c,) for c in range(k)]
            self._children[path] = kids
            stack.extend(reversed(list(zip(kids, sizes))))

    def branch(self, path):
        return list(self._children[tuple(path)])


class NQueens(TreeSource):
    """Row-by-row queen placement; leaves are full boards and dead ends."""

    def __init__(self, size: int = 4):
        if size < 1:
            raise ValueError("board size must be >= 1")
        self.size = size
        self.name = f"queens({size})"

    def branch(self, path):
        path = tuple(path)
        row = len(path)
        if row == self.size:
            return []
        out = []
        for c in range(self.size):
            if all(c != pc and abs(c - pc) != row - r for r, pc in enumerate(path)):
                out.append(path + (c,))
        return out


def enumerate_leaves(source: TreeSource) -> list[tuple]:
    """Sequential depth-first enumeration of the leaves."""
    out = []
    stack = [()]
    while stack:
        p = stack.pop()
        kids = source.branch(p)
        if kids:
            stack.extend(reversed(kids))
        else:
            out.append(p)
    return out


# -- tolerance policy ------------------------------------------------------


class KZTolerance(TolerancePolicy):
    """Zero tolerance for donation requests, growing tolerance otherwise,
    tracked per destination."""

    def __init__(self, small: int = 0):
        self.small = small

    def init_node(self, i, topo):
        return {j: 0 for j in topo.neighbors(i)}

    def tolerance(self, state, payload, dst):
        if payload.get("tag") == REQ:
            state[dst] = self.small
        else:
            state[dst] += 1
        return state[dst]

    def __repr__(self) -> str:
        return f"KZTolerance(small={self.small})"


# -- the search application -------------------------------------------------


@dataclass
class KZState:
    node: int
    frontier: list = field(default_factory=list)   # sorted paths
    branchings: int = 0
    leaves: int = 0
    donations_sent: int = 0
    donations_received: int = 0
    subproblems_donated: int = 0
    requests_sent: int = 0
    requests_received: int = 0
    requests_failed: int = 0
    credit: dict = field(default_factory=dict)
    wake_pending: bool = False


def lowest_level(frontier: list) -> list:
    top = min(len(p) for p in frontier)
    return [p for p in frontier if len(p) == top]


class KarpZhang(EventApp):
    """Per-event logic of the search.

    With ``throttle`` (the default) a node sends a pairing message to k only
    while it holds a credit for k; each pairing message received from k
    returns one. Every edge then carries at most two pairing messages,
    where the unthrottled rule multiplies traffic by |N(i)| per event.
    A busy node also keeps one wake-up event of its own pending, so it
    goes on branching when no message reaches it (a single node, or a
    two-node system after a refused request).
    """

    name = "backtrack"

    def __init__(self, source: TreeSource, root_holder: int = 1, throttle: bool = True):
        self.source = source
        self.root_holder = root_holder
        self.throttle = throttle

    def init_node(self, i, topo: Topology):
        st = KZState(i)
        st.credit = {j: 1 for j in topo.neighbors(i)}
        if i == self.root_holder:
            st.frontier = [()]
        return st

    def on_event(self, ctx, src, payload):
        st: KZState = ctx.state
        F = st.frontier
        tag = payload.get("tag") if payload else None
        if src is None:
            st.wake_pending = False
        if tag in (REQ, NOREQ):
            st.credit[src] += 1
        if self.throttle:
            avail = {k for k, c in st.credit.items() if c > 0}
        else:
            avail = set(ctx.neighbors)
        if tag == REQ:
            st.requests_received += 1
            if len(F) >= 2:
                T = lowest_level(F)
                D = T[:math.ceil(len(T) / 2)]
                for p in D:
                    F.remove(p)
                ctx.send(src, {"tag": DON, "D": [list(p) for p in D]})
                st.donations_sent += 1
                st.subproblems_donated += len(D)
            else:
                st.requests_failed += 1
            avail.discard(src)
        elif tag == DON:
            st.donations_received += 1
            for p in payload["D"]:
                bisect.insort(F, tuple(p))
        if F:
            s = F.pop(0)
            kids = self.source.branch(s)
            for k in kids:
                bisect.insort(F, tuple(k))
            st.branchings += 1
            leaf = not kids
            st.leaves += leaf
            ctx.note(branched=list(s), leaf=leaf)
        if not F and avail:
            dest = ctx.rng.choice(sorted(avail))
            avail.discard(dest)
            ctx.send(dest, {"tag": REQ})
            st.credit[dest] -= 1
            st.requests_sent += 1
        for k in sorted(avail):
            ctx.send(k, {"tag": NOREQ})
            st.credit[k] -= 1
        if F and not st.wake_pending:
            st.wake_pending = True
            ctx.wake()

    def done(self, states):
        live = 0
        for s in states[1:]:
            live += len(s.frontier) + s.donations_sent - s.donations_received
        return live == 0

    def metrics(self, states):
        ss = states[1:]
        return {
            "leaves": sum(s.leaves for s in ss),
            "branchings": sum(s.branchings for s in ss),
            "donations": sum(s.donations_sent for s in ss),
            "requests": sum(s.requests_sent for s in ss),
            "requests_failed": sum(s.requests_failed for s in ss),
        }


def leaf_census(trace: Trace) -> Counter:
    """How many branching events solved each leaf, read from the trace."""
    out: Counter = Counter()
    for r in trace.records:
        if r.kind in ("local", "deliver") and r.attach and r.attach.get("leaf"):
            out[tuple(r.attach["branched"])] += 1
    return out


def branch_census(trace: Trace) -> Counter:
    out: Counter = Counter()
    for r in trace.records:
        if r.kind in ("local", "deliver") and r.attach and "branched" in r.attach:
            out[tuple(r.attach["branched"])] += 1
    return out
