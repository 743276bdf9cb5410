import math

import pytest
from hypothesis import given, strategies as st

from helpers import TOPOLOGIES, chatter_run, kz_run
from partord.apps.backtrack import KZTolerance
from partord.event_order import (ChannelLog, ConstantTolerance, DeliveryGate, MissingAttachment,
                                 UnorderedGate, decode_entries, encode_entries, gate_cdc,
                                 gate_fdc, gate_rcdc, gate_rfdc)
from partord.graph import complete_graph
from partord.verifier import check

K3 = complete_graph(3)


def offer_own(gate, st, src, idx, mu=0, extra=None):
    entries = {(src, st.node): idx}
    entries.update(extra or {})
    return gate.offer(st, src, mu, entries)


def test_fdc_postpones_until_predecessor():
    g = gate_fdc()
    st = g.init_node(1, K3)
    assert not offer_own(g, st, 2, 2)
    assert offer_own(g, st, 2, 1)
    assert offer_own(g, st, 2, 2)


def test_rfdc_allows_mu_overtakes():
    g = gate_rfdc(1)
    st = g.init_node(1, K3)
    assert offer_own(g, st, 2, 2, mu=1)
    assert not offer_own(g, st, 2, 4, mu=1)
    assert offer_own(g, st, 2, 1, mu=1)
    assert offer_own(g, st, 2, 4, mu=1)


def test_cdc_waits_for_relayed_dependency():
    # 3 has seen two messages 2 -> 1 before sending to 1
    g = gate_cdc()
    st = g.init_node(1, K3)
    assert not offer_own(g, st, 3, 1, extra={(2, 1): 2})
    assert offer_own(g, st, 2, 1)
    assert not offer_own(g, st, 3, 1, extra={(2, 1): 2})
    assert offer_own(g, st, 2, 2)
    assert offer_own(g, st, 3, 1, extra={(2, 1): 2})


def test_exact_indices_versus_literal_counts():
    # channel 2 -> 1: message 1 is still missing while 2 and 3 overtook it
    for literal, expect in ((False, False), (True, True)):
        g = gate_rcdc(ConstantTolerance(2), literal_counts=literal)
        st = g.init_node(1, K3)
        assert offer_own(g, st, 2, 2, mu=2)
        assert offer_own(g, st, 2, 3, mu=2)
        # a request from 3 that saw two messages 2 -> 1, with no tolerance
        assert offer_own(g, st, 3, 1, mu=0, extra={(2, 1): 2}) is expect


def test_missing_attachment():
    g = gate_cdc()
    st = g.init_node(1, K3)
    with pytest.raises(MissingAttachment):
        g.offer(st, 2, 0, {})
    with pytest.raises(MissingAttachment):
        g.offer(st, 2, None, {(2, 1): 1})


def test_stamp_event_counts_every_send_of_the_event():
    g = gate_cdc()
    st = g.init_node(1, K3)
    (_, e2), (_, e3) = g.stamp_event(st, [(2, "a"), (3, "b")])
    assert e2 == {(1, 2): 1, (1, 3): 1}
    assert e3 == {(1, 2): 1, (1, 3): 1}


def test_sparse_omits_known_entries():
    g = gate_cdc("sparse")
    st = g.init_node(1, K3)
    g.stamp(st, 2, "x")
    _, first = g.stamp(st, 3, "y")
    _, second = g.stamp(st, 3, "z")
    assert (1, 2) in first and (1, 2) not in second
    full = gate_cdc("full")
    st = full.init_node(1, K3)
    full.stamp(st, 2, "x")
    full.stamp(st, 3, "y")
    assert (1, 2) in full.stamp(st, 3, "z")[1]


def test_unordered_gate_attaches_nothing():
    g = UnorderedGate()
    st = g.init_node(1, K3)
    mu, entries = g.stamp(st, 2, "x")
    assert math.isinf(mu) and entries == {}
    assert g.offer(st, 2, mu, entries)


def test_kz_tolerance_resets_on_request():
    pol = KZTolerance()
    s = pol.init_node(1, K3)
    assert [pol.tolerance(s, {"tag": t}, 2) for t in ("noreq", "don", "req", "noreq")] == [1, 2, 0, 1]
    assert pol.tolerance(s, {"tag": "noreq"}, 3) == 1


def test_entries_roundtrip():
    e = {(1, 2): 3, (2, 1): 1}
    assert decode_entries(encode_entries(e)) == e


@given(st.permutations(list(range(1, 13))), st.integers(0, 12))
def test_channel_log_against_set_model(order, upto):
    log = ChannelLog()
    seen = set()
    for idx in order:
        log.add(idx)
        seen.add(idx)
        assert log.missing(upto) == sum(1 for x in range(1, upto + 1) if x not in seen)
        # a tentative add followed by a discard leaves no trace
        probe = 20
        log.add(probe)
        log.discard(probe)
        assert log.missing(upto) == sum(1 for x in range(1, upto + 1) if x not in seen)


@given(st.lists(st.integers(1, 10), unique=True, min_size=1))
def test_channel_log_discard_newest(indices):
    log = ChannelLog()
    for idx in indices[:-1]:
        log.add(idx)
    before = (log.low, set(log.above))
    log.add(indices[-1])
    log.discard(indices[-1])
    assert (log.low, log.above) == before


@pytest.mark.parametrize("topo", sorted(TOPOLOGIES))
@pytest.mark.parametrize("mode", ["full", "sparse"])
def test_gates_pass_their_condition(topo, mode):
    for seed in range(15):
        tr, _ = chatter_run(TOPOLOGIES[topo](), gate_rcdc(1, mode), seed)
        assert check(tr, "rcdc")
        tr, _ = chatter_run(TOPOLOGIES[topo](), gate_cdc(mode), seed)
        assert check(tr, "cdc")
        tr, _ = kz_run(TOPOLOGIES[topo](), gate_rcdc(KZTolerance(), mode), seed)
        assert check(tr, "rcdc")


def test_fdc_traces_pass_rfdc_zero():
    for seed in range(20):
        tr, _ = chatter_run(complete_graph(4), gate_fdc(), seed)
        assert check(tr, "fdc") and check(tr, "rfdc", {"mu": 0})


def test_gate_repr_names_policy():
    assert "rcdc" in repr(gate_rcdc(KZTolerance(), "sparse"))
    assert isinstance(gate_rfdc(2).policy, ConstantTolerance)
    assert isinstance(gate_fdc(), DeliveryGate)
