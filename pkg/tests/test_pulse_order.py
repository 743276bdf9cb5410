import pytest
from hypothesis import given, strategies as st

from partord.apps.linsolve import ColoredSolver, grid_laplacian_system, LinearSystem
from partord.graph import complete_graph, ring_graph
from partord.pulse_order import (ConstantDelays, PulseContractError, PulseState, force_deliver,
                                 gate_psdc, pulse_clock_tick, synchronous,
                                 validate_compatibility)


def state(delta=0, neighbors=(2,)):
    return PulseState(1, neighbors, lambda L, j: min(delta, L))


def test_first_pulse_needs_nothing():
    ps = state()
    assert ps.has_advanced()
    assert pulse_clock_tick(ps) == 1


def test_get_current_contract():
    ps = state()
    with pytest.raises(PulseContractError):
        ps.get_current()
    assert ps.has_advanced()
    assert not ps.has_advanced()  # unread pulse blocks the next advance
    assert ps.get_current() == 1
    with pytest.raises(PulseContractError):
        ps.get_current()


def test_synchronous_round_structure():
    ps = state()
    ps.has_advanced(), ps.get_current()
    # pulse 2 needs pulse 1 of neighbor 2 complete
    assert not ps.has_advanced()
    ps.on_control(2, 1, 1)
    assert not ps.has_advanced()
    assert not gate_psdc(ps, 2, 2, 1)          # from the future: window 2 < 3
    assert gate_psdc(ps, 2, 1, 1)
    assert ps.has_advanced() and ps.get_current() == 2


def test_delta_lets_a_node_run_ahead():
    ps = state(delta=1)
    for r in (1, 2):
        assert ps.has_advanced() and ps.get_current() == r
    assert not ps.has_advanced()      # pulse 3 needs pulse 1 of the neighbor
    ps.on_control(2, 1, 0)
    assert ps.has_advanced() and ps.last_delta == {2: 1}


def test_duplicate_control_rejected():
    ps = state()
    ps.on_control(2, 1, 0)
    with pytest.raises(PulseContractError):
        ps.on_control(2, 1, 0)


def test_psdc_minimum_delay():
    ps = state()
    ps.rank = 2                     # window 3
    assert not gate_psdc(ps, 2, 1, 3)
    assert gate_psdc(ps, 2, 1, 2)
    assert ps.pending(2, 1) == -1   # delivered before its announcement
    ps.on_control(2, 1, 1)
    assert ps.pending(2, 1) == 0
    force_deliver(ps, 2, 2)
    assert ps.delivered[(2, 2)] == 1
    with pytest.raises(ValueError):
        gate_psdc(ps, 2, None, 1)


def test_bad_delta_reported():
    ps = PulseState(1, (2,), lambda L, j: L + 1)
    with pytest.raises(PulseContractError):
        ps.has_advanced()


def test_compatibility_examples():
    k3 = complete_graph(3)
    assert validate_compatibility(synchronous(), k3, 20) is None
    assert validate_compatibility(ConstantDelays(2, 0), k3, 20) == (1, 1, 2)
    assert validate_compatibility(ConstantDelays(3, 2), k3, 20) is None
    assert validate_compatibility(ConstantDelays(3, 1), k3, 20) is not None


@given(st.integers(1, 5), st.integers(0, 5))
def test_constant_compatibility_rule(rho, delta):
    # every pulse strictly between send and earliest acceptance must tolerate it
    got = validate_compatibility(ConstantDelays(rho, delta), ring_graph(4), 3 * (rho + delta) + 3)
    assert (got is None) == (delta >= rho - 1)


def test_linsolve_schedules_are_compatible():
    for method in ("jacobi", "gauss-seidel"):
        app = ColoredSolver(grid_laplacian_system(3, 3), method)
        assert validate_compatibility(app.delays(), app.topo, 10 * app.schedule.period) is None
    sys2 = LinearSystem.from_coo(2, [(1, 1, 2), (1, 2, 1), (2, 1, 1), (2, 2, 2)], [3, 3])
    app = ColoredSolver(sys2, "gauss-seidel")
    assert validate_compatibility(app.delays(), app.topo, 10 * app.schedule.period) is None


def test_constant_delays_validation():
    with pytest.raises(ValueError):
        ConstantDelays(0, 0)
    assert ConstantDelays(1, 3).delta(1, 2, 2) == 2
