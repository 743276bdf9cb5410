"""Small builders shared by the test modules."""

from partord.apps.backtrack import KarpZhang, SyntheticTree
from partord.apps.chatter import Chatter, PulseChatter
from partord.graph import complete_graph, grid_graph, ring_graph
from partord.pulse_order import ConstantDelays
from partord.simnet import SimConfig, Uniform, run

TOPOLOGIES = {
    "k4": lambda: complete_graph(4),
    "ring8": lambda: ring_graph(8),
    "grid3x3": lambda: grid_graph(3, 3),
}


def chatter_run(topo, gate, seed, hi=30, tokens=2, ttl=5, **kw):
    return run(SimConfig(topo, Chatter(tokens, ttl), gate, latency=Uniform(1, hi), seed=seed, **kw))


def kz_run(topo, gate, seed, leaves=30, hi=30, **kw):
    return run(SimConfig(topo, KarpZhang(SyntheticTree(seed, leaves)), gate,
                         latency=Uniform(1, hi), seed=seed, **kw))


def pulse_run(topo, seed, rho=1, delta=0, rounds=6, hi=30, **kw):
    app = PulseChatter(rounds, 2, quiet=rho - 1)
    return run(SimConfig(topo, app, delays=ConstantDelays(rho, delta), latency=Uniform(1, hi),
                         seed=seed, **kw))


def random_event_trace(draw_int, n=3, steps=25, complete=True):
    """Arbitrary (ungated) event-driven trace driven by ``draw_int(lo, hi)``.

    Each step either delivers some in-flight message or runs an input-free
    event; the event then sends to a subset of distinct other nodes."""
    from partord.trace import Trace

    nodes = list(range(1, n + 1))
    edges = [(a, b) for a in nodes for b in nodes if a < b] if complete else \
        [(i, i + 1) for i in range(1, n)]
    nbrs = {i: sorted({b for a, b in edges if a == i} | {a for a, b in edges if b == i}) for i in nodes}
    t = Trace(n, edges=edges)
    clock = {i: 0 for i in nodes}
    flight = []
    msg = 0
    for _ in range(steps):
        if flight and draw_int(0, 2) > 0:
            k = draw_int(0, len(flight) - 1)
            mid, src, dst = flight.pop(k)
            i = dst
            clock[i] += 1
            t.add("deliver", i, peer=src, msg=mid, t=clock[i])
        else:
            i = nodes[draw_int(0, n - 1)]
            clock[i] += 1
            t.add("local", i, t=clock[i])
        for j in nbrs[i]:
            if draw_int(0, 2) == 0:
                t.add("send", i, peer=j, msg=msg, t=clock[i], mu=0)
                flight.append((msg, i, j))
                msg += 1
    return t
