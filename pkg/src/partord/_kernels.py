"""Hot loops of the offline analyses.

Each kernel has a numba ``@njit`` build and a pure-numpy twin. The numba
build is used when numba imports cleanly and ``PARTORD_NO_NUMBA`` is unset
or ``0``; ``BACKEND`` names the active path.
"""

from __future__ import annotations

import os

import numpy as np


def _clocks_py(n, ev_node, ev_time, ev_prev, ev_src):
    m = ev_node.shape[0]
    E = np.zeros((m, n + 1), dtype=np.int64)
    for e in range(m):
        p = ev_prev[e]
        if p >= 0:
            E[e] = E[p]
        s = ev_src[e]
        if s >= 0:
            np.maximum(E[e], E[s], out=E[e])
        E[e, ev_node[e]] = ev_time[e]
    return E


def _transit_py(E, q_ev, q_node, q_time, in_ptr, in_src, in_send_t, in_recv_t, n):
    out = np.zeros((q_ev.shape[0], n + 1), dtype=np.int64)
    for q in range(q_ev.shape[0]):
        i = q_node[q]
        lo, hi = in_ptr[i], in_ptr[i + 1]
        if lo == hi:
            continue
        src = in_src[lo:hi]
        recv = in_recv_t[lo:hi]
        known = in_send_t[lo:hi] <= E[q_ev[q], src]
        pending = (recv < 0) | (recv > q_time[q])
        np.add.at(out[q], src[known & pending], 1)
    return out


def _hb_mismatch_py(E, ev_node, ev_time, reach):
    m = ev_node.shape[0]
    bad = 0
    for a in range(m):
        for b in range(m):
            by_clock = a != b and E[b, ev_node[a]] >= ev_time[a]
            if by_clock != reach[a, b]:
                bad += 1
    return bad


_disabled = os.environ.get("PARTORD_NO_NUMBA", "0") not in ("", "0")

try:
    if _disabled:
        raise ImportError("numba disabled by PARTORD_NO_NUMBA")
    from numba import njit

    @njit(cache=True)
    def _clocks_nb(n, ev_node, ev_time, ev_prev, ev_src):
        m = ev_node.shape[0]
        E = np.zeros((m, n + 1), dtype=np.int64)
        for e in range(m):
            p = ev_prev[e]
            s = ev_src[e]
            for h in range(n + 1):
                v = 0
                if p >= 0:
                    v = E[p, h]
                if s >= 0 and E[s, h] > v:
                    v = E[s, h]
                E[e, h] = v
            E[e, ev_node[e]] = ev_time[e]
        return E

    @njit(cache=True)
    def _transit_nb(E, q_ev, q_node, q_time, in_ptr, in_src, in_send_t, in_recv_t, n):
        out = np.zeros((q_ev.shape[0], n + 1), dtype=np.int64)
        for q in range(q_ev.shape[0]):
            i = q_node[q]
            row = q_ev[q]
            for k in range(in_ptr[i], in_ptr[i + 1]):
                src = in_src[k]
                if in_send_t[k] <= E[row, src]:
                    r = in_recv_t[k]
                    if r < 0 or r > q_time[q]:
                        out[q, src] += 1
        return out

    @njit(cache=True)
    def _hb_mismatch_nb(E, ev_node, ev_time, reach):
        m = ev_node.shape[0]
        bad = 0
        for a in range(m):
            for b in range(m):
                by_clock = a != b and E[b, ev_node[a]] >= ev_time[a]
                if by_clock != reach[a, b]:
                    bad += 1
        return bad

    event_clocks = _clocks_nb
    transit_counts = _transit_nb
    hb_mismatches = _hb_mismatch_nb
    BACKEND = "numba"
except ImportError:
    event_clocks = _clocks_py
    transit_counts = _transit_py
    hb_mismatches = _hb_mismatch_py
    BACKEND = "numpy"

__all__ = ["BACKEND", "event_clocks", "transit_counts", "hb_mismatches"]
