import pytest

from helpers import chatter_run, kz_run, pulse_run
from partord.apps.base import EventApp, PulseApp
from partord.apps.chatter import PulseChatter
from partord.causality import EventHistory
from partord.event_order import gate_cdc, gate_fdc, gate_rcdc
from partord.graph import complete_graph, grid_graph, path_graph, ring_graph
from partord.pulse_order import ConstantDelays
from partord.simnet import (ConfigError, Fixed, Geometric, IncompatibleDelays, SimConfig,
                            SimulationError, Uniform, run)
import random


def test_same_config_same_bytes():
    a = chatter_run(ring_graph(6), gate_cdc(), 5)
    b = chatter_run(ring_graph(6), gate_cdc(), 5)
    assert a[0].dumps() == b[0].dumps()
    assert a[1].to_text() == b[1].to_text()
    c = chatter_run(ring_graph(6), gate_cdc(), 6)
    assert a[0].dumps() != c[0].dumps()


def test_online_clocks_match_offline_reconstruction():
    from partord.simnet import Simulation
    from partord.apps.chatter import Chatter
    sim = Simulation(SimConfig(grid_graph(2, 3), Chatter(2, 5), gate_cdc(), seed=2,
                               latency=Uniform(1, 15), track_clocks=True))
    trace, _ = sim.run()
    h = EventHistory(trace)
    for e, entries in sim.clock_log.items():
        assert tuple(h.clocks[h.event(e)]) == entries


def test_report_fields():
    tr, rep = kz_run(complete_graph(4), gate_rcdc(0), 3)
    d = rep.as_dict()
    assert d["delivered"] == rep.delivered == sum(1 for r in tr.records if r.kind == "deliver")
    assert d["app.leaves"] == 30
    text = rep.to_text()
    assert "postponed_total=" in text and text.endswith("\n")
    assert rep.pulses_max == 0


def test_pulse_report_counts_ranks():
    _, rep = pulse_run(ring_graph(5), 1, rounds=7)
    assert rep.pulses[1:] == (7,) * 5 and rep.pulses_max == 7
    assert rep.control > 0


def test_framework_mismatch_rejected():
    with pytest.raises(ConfigError):
        SimConfig(ring_graph(3), PulseChatter(), gate_cdc())
    from partord.apps.chatter import Chatter
    with pytest.raises(ConfigError):
        SimConfig(ring_graph(3), Chatter(), None)
    with pytest.raises(ConfigError):
        SimConfig(ring_graph(3), object(), gate_cdc())


def test_incompatible_delays_rejected_up_front():
    with pytest.raises(IncompatibleDelays) as exc:
        pulse_run(ring_graph(4), 0, rho=3, delta=0)
    assert exc.value.where[0] == 1


def test_latency_models():
    rng = random.Random(1)
    assert all(1 <= Uniform(1, 3).sample(rng) <= 3 for _ in range(50))
    assert Fixed(4).sample(rng) == 4
    assert all(Geometric(2.0).sample(rng) >= 1 for _ in range(50))
    with pytest.raises(ValueError):
        Uniform(3, 1)


class _Twice(EventApp):
    def on_event(self, ctx, src, payload):
        if payload is None and ctx.node == 1:
            ctx.send(2, "a")
            ctx.send(2, "b")

    def done(self, states):
        return False


class _Stranger(EventApp):
    def on_event(self, ctx, src, payload):
        if payload is None and ctx.node == 1:
            ctx.send(3, "a")


def test_one_message_per_neighbor_per_event():
    with pytest.raises(SimulationError, match="more than one message"):
        run(SimConfig(path_graph(2), _Twice(), gate_fdc()))


def test_send_to_non_neighbor():
    with pytest.raises(SimulationError, match="non-neighbor"):
        run(SimConfig(path_graph(3), _Stranger(), gate_fdc()))


class _Forever(EventApp):
    def on_event(self, ctx, src, payload):
        ctx.send(ctx.neighbors[0], "ping")


def test_event_limit():
    with pytest.raises(SimulationError, match="max events"):
        run(SimConfig(path_graph(2), _Forever(), gate_fdc(), max_events=200))


class _Quiet(EventApp):
    def on_event(self, ctx, src, payload):
        pass


def test_quiet_but_unfinished_event_app():
    with pytest.raises(SimulationError, match="went quiet"):
        run(SimConfig(path_graph(2), _Quiet(), gate_fdc()))


class _Never(PulseApp):
    def on_pulse(self, ctx, rank):
        pass

    def ready(self, states, i, rank):
        return rank <= 3


def test_pulse_stall_reported():
    with pytest.raises(SimulationError, match="stalled"):
        run(SimConfig(path_graph(2), _Never()))


def test_fault_injection_forces_one_delivery():
    for seed in range(40):
        tr, rep = chatter_run(complete_graph(4), gate_fdc(), seed, hi=40)
        if rep.postponed_total:
            tr2, rep2 = chatter_run(complete_graph(4), gate_fdc(), seed, hi=40, fault_at=1)
            assert rep2.forced == 1
            return
    pytest.fail("no run postponed anything")


def test_pulse_mode_with_partial_synchrony_finishes():
    for rho, delta in ((1, 0), (2, 1), (3, 2), (1, 3)):
        _, rep = pulse_run(grid_graph(3, 3), 4, rho=rho, delta=delta, rounds=8)
        assert rep.pulses_max == 8
