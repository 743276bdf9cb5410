"""Offline conformance checks over recorded traces.

Every check rebuilds causality from the trace alone; no gate state is
reused. Event-driven conditions count messages in transit with the vector
clocks of ``causality``; pulse-driven conditions compare send ranks with
delivery windows (the rank of the pulse a delivery feeds).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .causality import EventHistory, PulseHistory, pulse_clocks
from .graph import build_topology
from .trace import MalformedTrace, Trace, validate

EVENT_CONDITIONS = ("fdc", "rfdc", "cdc", "rcdc")
PULSE_CONDITIONS = ("sdc", "spgc", "psdc", "pspgc", "pspgc-gloss", "pulse-cdc", "lockstep")
CONDITIONS = EVENT_CONDITIONS + PULSE_CONDITIONS


@dataclass(frozen=True)
class CheckResult:
    condition: str
    ok: bool
    seq: int | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return f"{self.condition}: pass"
        return f"{self.condition}: violation at seq {self.seq}: {self.detail}"


def _pass(cond: str) -> CheckResult:
    return CheckResult(cond, True)


def check(trace: Trace, condition: str, params: dict | None = None) -> CheckResult:
    """Evaluate ``condition`` on every delivery (or pulse) of ``trace`` and
    return the earliest violation, if any."""
    params = params or {}
    cond = condition.lower()
    if cond not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}; expected one of {', '.join(CONDITIONS)}")
    validate(trace)
    if cond in EVENT_CONDITIONS:
        if trace.pulse_driven:
            raise MalformedTrace(f"{cond} applies to event-driven traces")
        return _EVENT_CHECKS[cond](EventHistory(trace), params)
    if not trace.pulse_driven and any(r.kind == "send" for r in trace.records):
        raise MalformedTrace(f"{cond} applies to pulse-driven traces")
    return _PULSE_CHECKS[cond](PulseHistory(trace), params)


def check_all(trace: Trace, conditions, params: dict | None = None) -> dict[str, CheckResult]:
    return {c: check(trace, c, params) for c in conditions}


# -- event-driven ------------------------------------------------------------


def _mu_of(m, params) -> float:
    if "mu" in params:
        mu = params["mu"]
        return math.inf if mu in ("inf", math.inf) else float(mu)
    if m.mu is None:
        raise MalformedTrace(f"message {m.msg} carries no tolerance and none was given")
    return float(m.mu)


def _delivered(h: EventHistory):
    out = [m for m in h.messages.values()
           if m.recv_t >= 0 and not (m.attach and "control" in m.attach)]
    out.sort(key=lambda m: m.recv_seq)
    return out


def _send_past_transit(h: EventHistory, msgs) -> np.ndarray:
    """Row q: per-sender messages toward the receiver of msgs[q] that are in
    the causal past of its send and still undelivered at its delivery."""
    if not msgs:
        return np.zeros((0, h.n + 1), dtype=np.int64)
    return h.transit_matrix([h.send_event(m.msg) for m in msgs],
                            [m.dst for m in msgs], [m.recv_t for m in msgs])


def _check_fifo(h: EventHistory, params, cond: str, relaxed: bool) -> CheckResult:
    msgs = _delivered(h)
    rows = _send_past_transit(h, msgs)
    for q, m in enumerate(msgs):
        # every message on m's channel sent no later than m, minus those received by now
        overtaken = int(rows[q, m.src])
        bound = _mu_of(m, params) if relaxed else 0
        if overtaken > bound:
            return CheckResult(cond, False, m.recv_seq,
                               f"message {m.msg} {m.src}->{m.dst} overtook {overtaken} earlier "
                               f"message(s) on its channel (allowed {bound:g})")
    return _pass(cond)


def check_fdc(h, params):
    return _check_fifo(h, params, "fdc", relaxed=False)


def check_rfdc(h, params):
    return _check_fifo(h, params, "rfdc", relaxed=True)


def check_rcdc(h: EventHistory, params) -> CheckResult:
    msgs = _delivered(h)
    rows = _send_past_transit(h, msgs)
    for q, m in enumerate(msgs):
        mu = _mu_of(m, params)
        k = int(np.argmax(rows[q]))
        if rows[q, k] > mu:
            return CheckResult("rcdc", False, m.recv_seq,
                               f"message {m.msg} {m.src}->{m.dst} delivered with {int(rows[q, k])} "
                               f"message(s) from {k} of its causal past in transit (allowed {mu:g})")
    return _pass("rcdc")


def check_cdc(h: EventHistory, params) -> CheckResult:
    """Transit counts of the global state of every event must vanish."""
    m = len(h.ev_node)
    if m == 0:
        return _pass("cdc")
    rows = h.transit_matrix(np.arange(m), h.ev_node, h.ev_time)
    bad = np.nonzero(rows.max(axis=1) > 0)[0]
    if len(bad) == 0:
        return _pass("cdc")
    e = int(min(bad, key=lambda e: h.event_seq[e]))
    k = int(np.argmax(rows[e]))
    return CheckResult("cdc", False, h.event_seq[e],
                       f"event ({int(h.ev_node[e])}, {int(h.ev_time[e])}): {int(rows[e, k])} "
                       f"message(s) from {k} in transit in its global state")


_EVENT_CHECKS: dict[str, Callable] = {
    "fdc": check_fdc, "rfdc": check_rfdc, "cdc": check_cdc, "rcdc": check_rcdc,
}


# -- pulse-driven ------------------------------------------------------------


def _windows(m) -> float:
    return m.recv_t if m.recv_t >= 0 else math.inf


def _channels(h: PulseHistory):
    """(src, dst) -> (send ranks ascending, running max of windows, messages)."""
    by: dict[tuple, list] = {}
    for m in h.app_messages():
        by.setdefault((m.src, m.dst), []).append(m)
    out = {}
    for key, ms in by.items():
        ms.sort(key=lambda m: (m.send_t, m.send_seq))
        ranks = [m.send_t for m in ms]
        run, best = [], -math.inf
        for m in ms:
            best = max(best, _windows(m))
            run.append(best)
        out[key] = (ranks, run, ms)
    return out


def _worst_upto(chan, rank_bound):
    """Latest window among the channel's messages sent at ranks <= bound."""
    ranks, run, ms = chan
    k = bisect.bisect_right(ranks, rank_bound)
    if k == 0:
        return -math.inf, None
    w = run[k - 1]
    culprit = next(m for m in ms[:k] if _windows(m) == w)
    return w, culprit


def check_sdc(h: PulseHistory, params, cond="sdc", partial=False) -> CheckResult:
    for m in sorted(h.app_messages(), key=lambda m: m.recv_seq):
        if m.recv_t < 0:
            continue
        if partial:
            if m.rho is None:
                raise MalformedTrace(f"message {m.msg} carries no minimum delay")
            need = m.send_t + m.rho
        else:
            need = m.send_t + 1
        if m.recv_t < need:
            return CheckResult(cond, False, m.recv_seq,
                               f"message {m.msg} {m.src}->{m.dst} from pulse {m.send_t} delivered "
                               f"in window {m.recv_t} (earliest allowed {need})")
    return _pass(cond)


def check_psdc(h, params):
    return check_sdc(h, params, "psdc", partial=True)


def _pulse_gen(h: PulseHistory, params, cond: str, delta_of, shift: int) -> CheckResult:
    """No message from j sent at a rank <= L - shift - delta may be delivered
    after pulse L of i."""
    chans = _channels(h)
    found = []
    for (i, L), seq in h.pulse_seq.items():
        for (j, dst), chan in chans.items():
            if dst != i:
                continue
            d = delta_of(i, L, j)
            if not 0 <= d <= L:
                raise MalformedTrace(f"pulse ({i}, {L}) has delay bound {d} outside 0..{L}")
            w, m = _worst_upto(chan, L - shift - d)
            if w > L:
                found.append((seq, i, L, j, d, m))
    if not found:
        return _pass(cond)
    seq, i, L, j, d, m = min(found, key=lambda f: f[0])
    where = "never delivered" if m.recv_t < 0 else f"delivered in window {m.recv_t}"
    return CheckResult(cond, False, seq,
                       f"pulse {L} at {i} (delta {d} for {j}) with message {m.msg} from pulse "
                       f"{m.send_t} of {j} {where}")


def _recorded_delta(h: PulseHistory, params):
    default = int(params.get("delta", 0))

    def delta_of(i, L, j):
        rec = h.delta.get((i, L))
        if rec is None or j not in rec:
            return min(default, L)
        return rec[j]
    return delta_of


def check_spgc(h, params):
    return _pulse_gen(h, params, "spgc", lambda i, L, j: 0, shift=1)


def check_pspgc(h, params):
    return _pulse_gen(h, params, "pspgc", _recorded_delta(h, params), shift=1)


def check_pspgc_gloss(h, params):
    """Reading of the pulse-generation bound that includes the pulse of rank
    L - delta itself."""
    return _pulse_gen(h, params, "pspgc-gloss", _recorded_delta(h, params), shift=0)


def _topology(h: PulseHistory, params):
    edges = params.get("edges", h.trace.edges)
    if edges is None:
        raise MalformedTrace("pulse checks need the topology (trace header or params['edges'])")
    return build_topology(h.n, edges)


def check_pulse_cdc(h: PulseHistory, params) -> CheckResult:
    """Causal order in the pulse model: a delivery may not precede (by
    window) a message on the same destination sent from its causal past."""
    topo = _topology(h, params)
    clocks = pulse_clocks(h, topo)
    chans = _channels(h)
    for m in sorted(h.app_messages(), key=lambda m: m.recv_seq):
        if m.recv_t < 0:
            continue
        P = clocks[(m.src, m.send_t)]
        for (j, dst), chan in chans.items():
            if dst != m.dst:
                continue
            bound = m.send_t - 1 if j == m.src else P[j]
            w, old = _worst_upto(chan, bound)
            if w > m.recv_t:
                return CheckResult("pulse-cdc", False, m.recv_seq,
                                   f"message {m.msg} {m.src}->{m.dst} delivered in window "
                                   f"{m.recv_t} before message {old.msg} from pulse {old.send_t} "
                                   f"of {j} in its causal past")
    return _pass("pulse-cdc")


def check_lockstep(h: PulseHistory, params) -> CheckResult:
    topo = _topology(h, params)
    dist = topo.all_distances()
    rank = [0] * (h.n + 1)
    for r in h.trace.records:
        if r.kind != "pulse":
            continue
        rank[r.node] = r.rank
        i = r.node
        for j in topo.nodes:
            if abs(rank[i] - rank[j]) > dist[i][j]:
                return CheckResult("lockstep", False, r.seq,
                                   f"ranks {rank[i]} at {i} and {rank[j]} at {j} differ by more "
                                   f"than their distance {dist[i][j]}")
    return _pass("lockstep")


_PULSE_CHECKS: dict[str, Callable] = {
    "sdc": check_sdc, "psdc": check_psdc, "spgc": check_spgc, "pspgc": check_pspgc,
    "pspgc-gloss": check_pspgc_gloss, "pulse-cdc": check_pulse_cdc, "lockstep": check_lockstep,
}


# -- application-level scans -------------------------------------------------


def donation_overtakes(trace: Trace) -> list[int]:
    """Delivery seqs of donation requests that were refused while a donation
    to the requester's destination, sent in the causal past of the request,
    was still in transit."""
    h = EventHistory(trace)
    donations: dict[int, list] = {}
    requests = []
    sent_by_seq: dict[int, list] = {}
    for m in h.messages.values():
        tag = (m.attach or {}).get("p", {}).get("tag")
        if tag == "don":
            donations.setdefault(m.dst, []).append(m)
        elif tag == "req" and m.recv_t >= 0:
            requests.append(m)
    for r in trace.records:
        if r.kind == "send":
            sent_by_seq.setdefault((r.node, r.t), []).append(r)
    out = []
    for m in requests:
        answered = any((s.attach or {}).get("p", {}).get("tag") == "don"
                       for s in sent_by_seq.get((m.dst, m.recv_t), []))
        if answered:
            continue
        E = h.clocks[h.send_event(m.msg)]
        for d in donations.get(m.dst, []):
            in_past = d.send_t <= E[d.src]
            pending = d.recv_t < 0 or d.recv_t > m.recv_t
            if in_past and pending:
                out.append(m.recv_seq)
                break
    return sorted(out)


# -- hand-encoded scenarios ----------------------------------------------------


@dataclass(frozen=True)
class Fixture:
    name: str
    trace: Trace
    expect: dict
    about: str


def _fig1a() -> Trace:
    # i = 1, j = 2
    t = Trace(2, edges=[(1, 2)])
    t.add("local", 1, t=1)
    t.add("send", 1, peer=2, msg=0, t=1, mu=0, attach={"s": [[1, 2, 1]]})
    t.add("local", 2, t=1)
    t.add("deliver", 2, peer=1, msg=0, t=2)
    t.add("send", 2, peer=1, msg=1, t=2, mu=0, attach={"s": [[1, 2, 1], [2, 1, 1]]})
    t.add("deliver", 1, peer=2, msg=1, t=2)
    return t


def _overtake(n=3) -> Trace:
    # i = 1, j = 2, k = 3: j sends a to i and b to k; k relays c to i, which
    # reaches i before a does
    t = Trace(3, edges=[(1, 2), (1, 3), (2, 3)])
    t.add("local", 2, t=1)
    t.add("send", 2, peer=1, msg=0, t=1, mu=0, attach={"s": [[2, 1, 1]]})
    t.add("send", 2, peer=3, msg=1, t=1, mu=0, attach={"s": [[2, 1, 1], [2, 3, 1]]})
    t.add("local", 3, t=1)
    t.add("deliver", 3, peer=2, msg=1, t=2)
    t.add("send", 3, peer=1, msg=2, t=2, mu=0,
          attach={"s": [[2, 1, 1], [2, 3, 1], [3, 1, 1]]})
    t.add("local", 1, t=1)
    t.add("deliver", 1, peer=3, msg=2, t=2)
    t.add("deliver", 1, peer=2, msg=0, t=3)
    return t


def _fig6(overtaken: bool) -> Trace:
    # a = 1 requested work from b = 2; b donates to a and pairs with c = 3,
    # which then asks a for work
    t = Trace(3, edges=[(1, 2), (1, 3), (2, 3)])
    t.add("local", 1, t=1)
    t.add("send", 1, peer=2, msg=0, t=1, mu=0, attach={"p": {"tag": "req"}})
    t.add("local", 2, t=1)
    t.add("local", 3, t=1)
    t.add("deliver", 2, peer=1, msg=0, t=2)
    t.add("send", 2, peer=1, msg=1, t=2, mu=1, attach={"p": {"tag": "don", "D": [[0], [1]]}})
    t.add("send", 2, peer=3, msg=2, t=2, mu=1, attach={"p": {"tag": "noreq"}})
    t.add("deliver", 3, peer=2, msg=2, t=2)
    t.add("send", 3, peer=1, msg=3, t=2, mu=0, attach={"p": {"tag": "req"}})
    if overtaken:
        t.add("deliver", 1, peer=3, msg=3, t=2)
        t.add("deliver", 1, peer=2, msg=1, t=3)
    else:
        t.add("deliver", 1, peer=2, msg=1, t=2)
        t.add("deliver", 1, peer=3, msg=3, t=3)
        t.add("send", 1, peer=3, msg=4, t=3, mu=1, attach={"p": {"tag": "don", "D": [[1]]}})
        t.add("deliver", 3, peer=1, msg=4, t=3)
    return t


def fixtures() -> dict[str, Fixture]:
    return {
        "fig1a": Fixture("fig1a", _fig1a(), {"pred_j": (2, 2), "succ_i": (1, 2)},
                         "succ_i(j@1) = i@2 while pred_j(i@2) = j@2"),
        "fig1b": Fixture("fig1b", _overtake(), {"pred_j": (2, 1), "succ_i": (1, 2)},
                         "pred_j(i@3) = j@1 while succ_i(j@1) = i@2"),
        "fig3": Fixture("fig3", _overtake(), {"cdc": False, "fdc": True, "rcdc": False},
                        "a single message overtaken by a two-message chain"),
        "fig6a": Fixture("fig6a", _fig6(True), {"cdc": False, "overtakes": 1},
                         "donation overtaken; the request it precedes is refused"),
        "fig6b": Fixture("fig6b", _fig6(False), {"cdc": True, "overtakes": 0},
                         "donation delivered first; the request is answered"),
    }
