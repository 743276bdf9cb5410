import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import random_event_trace
from partord.causality import (EventHistory, EventId, EventVectorClock, PulseHistory,
                               clock_mismatches, happened_before, merge_clock, pred,
                               pulse_clocks, reachability, succ, transit_count)
from partord.graph import grid_graph, ring_graph
from partord.trace import MalformedTrace, Trace
from partord.verifier import fixtures


def drawn_trace(data, n, steps):
    return random_event_trace(lambda lo, hi: data.draw(st.integers(lo, hi)), n, steps)


def test_online_clock_merge():
    c = EventVectorClock.initial(2, 3)
    assert c.entries == (0, 0, 1, 0)
    d = merge_clock(c, (0, 4, 0, 2))
    assert d.entries == (0, 4, 2, 2) and d.at == 2
    with pytest.raises(ValueError):
        merge_clock(c, (0, 1))


def test_fixture_pred_succ_asymmetry():
    fx = fixtures()
    h = EventHistory(fx["fig1a"].trace)
    assert succ(h, 1, EventId(2, 1)) == EventId(1, 2)
    assert pred(h, 2, EventId(1, 2)) == EventId(2, 2)
    h = EventHistory(fx["fig1b"].trace)
    assert pred(h, 2, EventId(1, 3)) == EventId(2, 1)
    assert succ(h, 1, EventId(2, 1)) == EventId(1, 2)


def test_pred_succ_reject_own_node():
    h = EventHistory(fixtures()["fig1a"].trace)
    with pytest.raises(ValueError):
        pred(h, 1, EventId(1, 1))
    with pytest.raises(ValueError):
        succ(h, 2, EventId(2, 1))


def test_out_of_order_event_times_rejected():
    t = Trace(2, edges=[(1, 2)])
    t.add("local", 1, t=2)
    with pytest.raises(MalformedTrace):
        EventHistory(t)


@given(st.data(), st.integers(2, 5), st.integers(1, 40))
def test_clocks_match_graph_search(data, n, steps):
    h = EventHistory(drawn_trace(data, n, steps))
    assert clock_mismatches(h) == 0


@given(st.data())
def test_pred_succ_against_reachability(data):
    h = EventHistory(drawn_trace(data, 4, 30))
    reach = reachability(h)
    evs = list(h.index)
    for e in evs:
        ie = h.event(e)
        for j in range(1, h.n + 1):
            if j == e.node:
                continue
            before = [f for f in evs if f.node == j and reach[h.event(f), ie]]
            after = [f for f in evs if f.node == j and reach[ie, h.event(f)]]
            assert pred(h, j, e) == (max(before) if before else None)
            assert succ(h, j, e) == (min(after) if after else None)
            for f in before:
                assert happened_before(h, f, e)


@given(st.data())
def test_transit_count_against_definition(data):
    h = EventHistory(drawn_trace(data, 4, 30))
    reach = reachability(h)
    for (i, t), ie in h.index.items():
        got = transit_count(h, i, t)
        want = {}
        for m in h.messages.values():
            if m.dst != i:
                continue
            want.setdefault(m.src, 0)
            s = h.send_event(m.msg)
            known = s == ie or reach[s, ie]
            if known and (m.recv_t < 0 or m.recv_t > t):
                want[m.src] += 1
        assert got == want


def _sync_pulse_trace(topo, ranks):
    t = Trace(topo.n, edges=sorted(topo.edges))
    for r in range(1, ranks + 1):
        for i in topo.nodes:
            t.add("pulse", i, rank=r)
    return t


def test_pulse_clocks_are_distance_staircase():
    for topo in (ring_graph(6), grid_graph(3, 3)):
        h = PulseHistory(_sync_pulse_trace(topo, 6))
        clocks = pulse_clocks(h, topo)
        dist = topo.all_distances()
        for (i, r), c in clocks.items():
            for j in topo.nodes:
                assert c[j] == max(0, r - dist[i][j])


def test_pulse_ranks_must_be_consecutive():
    t = Trace(1)
    t.add("pulse", 1, rank=2)
    with pytest.raises(MalformedTrace):
        PulseHistory(t)


def test_transit_matrix_rows_are_integers():
    h = EventHistory(fixtures()["fig3"].trace)
    rows = h.transit_matrix(np.arange(len(h.ev_node)), h.ev_node, h.ev_time)
    assert rows.dtype == np.int64 and rows.shape == (len(h.ev_node), h.n + 1)
    assert rows.sum() == 1
