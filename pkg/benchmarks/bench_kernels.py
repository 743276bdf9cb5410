"""Time the offline kernels: numba build against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--tokens 40] [--repeat 5]

Both paths run on the same arrays and must agree exactly. With
PARTORD_NO_NUMBA=1 only the numpy column is filled.
"""

import argparse
import time

import numpy as np

from partord import _kernels
from partord.apps.chatter import Chatter
from partord.causality import EventHistory, reachability
from partord.event_order import UnorderedGate
from partord.graph import grid_graph
from partord.simnet import SimConfig, Uniform, run


def best_of(fn, args, repeat):
    out = fn(*args)  # warm-up, and compilation for the numba build
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tokens", type=int, default=40)
    ap.add_argument("--ttl", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    trace, rep = run(SimConfig(grid_graph(4, 4), Chatter(args.tokens, args.ttl, 0.2),
                               UnorderedGate(), latency=Uniform(1, 30), seed=3))
    h = EventHistory(trace)
    m = len(h.ev_node)
    print(f"trace: {m} events, {len(h.messages)} messages, backend={_kernels.BACKEND}")

    E = h.clocks
    ev = np.arange(m, dtype=np.int64)
    cases = {
        "event_clocks": ((h.n, h.ev_node, h.ev_time, h.ev_prev, h.ev_src),
                         "_clocks_py", "_clocks_nb"),
        "transit_counts": ((E, ev, h.ev_node, h.ev_time, h.in_ptr, h.in_src,
                            h.in_send_t, h.in_recv_t, h.n), "_transit_py", "_transit_nb"),
    }
    small = min(m, 1500)
    reach = reachability(h)[:small, :small]
    cases["hb_mismatches"] = ((E[:small], h.ev_node[:small], h.ev_time[:small], reach),
                              "_hb_mismatch_py", "_hb_mismatch_nb")

    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, (a, py, nb) in cases.items():
        t_py, r_py = best_of(getattr(_kernels, py), a, args.repeat)
        if hasattr(_kernels, nb):
            t_nb, r_nb = best_of(getattr(_kernels, nb), a, args.repeat)
            assert np.array_equal(np.asarray(r_py), np.asarray(r_nb)), name
            print(f"{name:<16}{t_py * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_py / t_nb:>9.1f}x")
        else:
            print(f"{name:<16}{t_py * 1e3:>12.2f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
