import numpy as np
import pytest

from partord.apps.linsolve import (ColoredSolver, IterationSchedule, LinearSystem,
                                   LinsolveDelays, converged, grid_laplacian_system,
                                   sequential_iterates)
from partord.graph import greedy_coloring, make_coloring, uniform_coloring
from partord.pulse_order import validate_compatibility
from partord.simnet import SimConfig, Uniform, run

TWO = LinearSystem.from_coo(2, [(1, 1, 2), (1, 2, 1), (2, 1, 1), (2, 2, 2)], [3, 3])


def solve(system, method, seed=0, residual="tree", hi=12, **kw):
    app = ColoredSolver(system, method, residual=residual, **kw)
    tr, rep = run(SimConfig(app.topo, app, delays=app.delays(), latency=Uniform(1, hi), seed=seed,
                            horizon=10 * app.schedule.period))
    return app, tr, rep


def sweep_oracle(A, b, x0, classes, iterations):
    """Textbook block sweep, written independently of sequential_iterates."""
    x = np.array(x0, dtype=float)
    out = [x.copy()]
    for _ in range(iterations):
        for cls in classes:
            old = x.copy()
            for i in cls:
                x[i] = (b[i] - sum(A[i, j] * old[j] for j in range(len(b)) if j != i)) / A[i, i]
        out.append(x.copy())
    return np.array(out)


def test_two_by_two_by_hand():
    app, tr, rep = solve(TWO, "jacobi")
    seq = sequential_iterates(TWO, uniform_coloring(TWO.topology()), 2)
    assert np.allclose(seq[1], [1.5, 1.5]) and np.allclose(seq[2], [0.75, 0.75])
    seq = sequential_iterates(TWO, make_coloring([0, 1]), 1)
    assert np.allclose(seq[1], [1.5, 0.75])
    assert rep.app["converged"] and rep.app["residual"] <= 1e-8


def test_sequential_matches_textbook_sweep():
    s = grid_laplacian_system(3, 3)
    for col in (uniform_coloring(s.topology()), greedy_coloring(s.topology())):
        classes = [[i - 1 for i in s.topology().nodes if col[i] == c] for c in range(col.ncolors)]
        ours = sequential_iterates(s, col, 15)
        ref = sweep_oracle(s.A, s.b, s.x0, classes, 15)
        assert np.max(np.abs(ours - ref)) <= 1e-12


@pytest.mark.parametrize("method", ["jacobi", "gauss-seidel"])
def test_distributed_matches_sequential(method):
    s = grid_laplacian_system(3, 3)
    app, tr, rep = solve(s, method, seed=3)
    got = np.array(rep.app["x"])
    seq = sequential_iterates(s, app.coloring, rep.app["iterations"])
    assert np.max(np.abs(seq[-1] - got)) <= 1e-12
    assert rep.app["converged"] and s.residual(got) <= 1e-8


def test_tree_and_oracle_residual_agree():
    s = grid_laplacian_system(2, 3)
    _, _, a = solve(s, "gauss-seidel", residual="tree")
    _, _, b = solve(s, "gauss-seidel", residual="oracle")
    assert a.app["iterations"] == b.app["iterations"]
    assert a.app["x"] == b.app["x"]


def test_iteration_cap():
    s = grid_laplacian_system(3, 3, eps=1e-15)
    _, _, rep = solve(s, "jacobi", max_iterations=5)
    assert rep.app["iterations"] == 5 and not rep.app["converged"]


def test_schedule_phases():
    s = IterationSchedule(ncolors=2, nresidual=3)
    assert s.period == 5
    assert [s.phase(r) for r in range(1, 8)] == [0, 1, 2, 3, 4, 0, 1]
    assert s.iteration(5) == 0 and s.iteration(6) == 1
    assert s.update_rank(1, 1) == 10 and s.is_residual(6)


def test_delay_values_three_colors():
    # path 1 - 2 - 3 colored 0, 1, 2; one residual phase, period 4
    s = IterationSchedule(3, 1)
    d = LinsolveDelays(make_coloring([0, 1, 2]), s)
    # node 2 updates at rank 3; x_2 reaches node 1 for the next iteration,
    # node 3 still in this one
    assert d.rho(2, 3, 1) == 2
    assert d.rho(2, 3, 3) == 1
    assert d.rho(2, 1, 1) == 1          # residual traffic
    assert d.delta(2, 3, 1) == 0        # needs node 1's update of rank 2
    assert d.delta(1, 2, 2) == 2        # uses last iteration's x_2
    assert d.delta(1, 1, 2) == 0        # residual phase
    assert d.delta(3, 3, 2) == 2        # phase 2 precedes its own update
    topo = LinearSystem.from_coo(3, [(1, 1, 4), (1, 2, 1), (2, 1, 1), (2, 2, 4), (2, 3, 1),
                                     (3, 2, 1), (3, 3, 4)], [1, 1, 1]).topology()
    assert validate_compatibility(d, topo, 60) is None


def test_system_validation():
    with pytest.raises(ValueError):
        LinearSystem.from_coo(2, [(1, 3, 1)], [1, 1])
    with pytest.raises(ValueError):
        LinearSystem.from_coo(2, [(1, 1, 1)], [1, 1])
    with pytest.raises(ValueError):
        ColoredSolver(TWO, "sor")
    with pytest.raises(ValueError):
        ColoredSolver(TWO, "gauss-seidel", coloring=make_coloring([0, 0]))
    assert converged([1.0, 1.0], TWO)
