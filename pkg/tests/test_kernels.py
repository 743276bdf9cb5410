import os
import subprocess
import sys

import numpy as np
from hypothesis import given, strategies as st

from helpers import random_event_trace
from partord import _kernels
from partord.causality import EventHistory, reachability


def test_flag_selects_numpy_backend():
    env = dict(os.environ, PARTORD_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from partord import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_numpy_fallback_runs_a_check():
    env = dict(os.environ, PARTORD_NO_NUMBA="1")
    code = ("from partord.verifier import fixtures, check;"
            "print(check(fixtures()['fig3'].trace, 'cdc').ok)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "False"


@given(st.data())
def test_backends_agree(data):
    if not hasattr(_kernels, "_clocks_nb"):
        return
    tr = random_event_trace(lambda lo, hi: data.draw(st.integers(lo, hi)), 4, 30)
    h = EventHistory(tr)
    a = (h.n, h.ev_node, h.ev_time, h.ev_prev, h.ev_src)
    E = _kernels._clocks_py(*a)
    assert np.array_equal(E, _kernels._clocks_nb(*a))
    ev = np.arange(len(h.ev_node), dtype=np.int64)
    b = (E, ev, h.ev_node, h.ev_time, h.in_ptr, h.in_src, h.in_send_t, h.in_recv_t, h.n)
    assert np.array_equal(_kernels._transit_py(*b), _kernels._transit_nb(*b))
    reach = reachability(h)
    c = (E, h.ev_node, h.ev_time, reach)
    assert _kernels._hb_mismatch_py(*c) == _kernels._hb_mismatch_nb(*c) == 0
