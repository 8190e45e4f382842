from __future__ import annotations

import tracemalloc
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from feedbalance.graph import Graph, from_dense
from feedbalance.linsolve import (
    SolverConfig,
    SolverError,
    apply_shifted,
    solve_shifted,
)

from conftest import random_row_stochastic_dense


def _edgeless(n: int) -> Graph:
    return Graph(n, np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))


def test_apply_shifted_zero_vector(two_node):
    assert apply_shifted(two_node, False, np.zeros(2)).tolist() == [0.0, 0.0]


def test_apply_shifted_edgeless_doubles():
    g = _edgeless(4)
    v = np.array([1.0, -2.0, 3.0, 0.5])
    assert np.array_equal(apply_shifted(g, False, v), 2 * v)


def test_apply_shifted_two_node(two_node):
    got = apply_shifted(two_node, False, np.array([1.0, 0.0]))
    assert got.tolist() == [2.0, -1.0]


def test_apply_shifted_dimension_mismatch(two_node):
    with pytest.raises(ValueError):
        apply_shifted(two_node, False, np.zeros(3))


def test_solve_edgeless_halves():
    g = _edgeless(3)
    s = np.array([1.0, -4.0, 2.0])
    res = solve_shifted(g, False, s)
    assert np.abs(res.solution - s / 2).max() <= 1e-12


def test_solve_two_node(two_node):
    res = solve_shifted(two_node, False, np.array([1.0, -1.0]))
    assert np.abs(res.solution - np.array([1 / 3, -1 / 3])).max() <= 1e-10


def test_zero_rhs_returns_zero_in_zero_iterations(two_node):
    res = solve_shifted(two_node, False, np.zeros(2))
    assert res.iterations == 0
    assert res.final_residual == 0.0
    assert res.solution.tolist() == [0.0, 0.0]


def test_matches_dense_lu_on_random_instances():
    rng = np.random.default_rng(123)
    for k in range(20):
        n = int(rng.integers(20, 200))
        dense = random_row_stochastic_dense(rng, n, 0.15)
        g = from_dense(dense)
        b = rng.normal(size=n)
        res = solve_shifted(g, False, b)
        expected = np.linalg.solve(2 * np.eye(n) - dense, b)
        rel = np.linalg.norm(res.solution - expected) / np.linalg.norm(expected)
        assert rel <= 1e-8, f"instance {k}: rel error {rel:.2e}"
        assert res.final_residual <= 1e-10
        assert 0 < res.iterations < n


def test_transpose_flag_equals_explicit_transpose():
    rng = np.random.default_rng(7)
    dense = random_row_stochastic_dense(rng, 60, 0.2)
    g = from_dense(dense)
    b = rng.normal(size=60)
    via_flag = solve_shifted(g, True, b).solution
    via_graph = solve_shifted(g.transpose(), False, b).solution
    assert np.linalg.norm(via_flag - via_graph) <= 1e-10 * np.linalg.norm(via_flag)


def test_jacobi_preconditioner_agrees():
    rng = np.random.default_rng(9)
    dense = random_row_stochastic_dense(rng, 50, 0.2)
    g = from_dense(dense)
    b = rng.normal(size=50)
    plain = solve_shifted(g, False, b).solution
    jacobi = solve_shifted(g, False, b, SolverConfig(preconditioner="jacobi")).solution
    assert np.abs(plain - jacobi).max() <= 1e-9


def test_nonconvergence_raises_with_best_iterate():
    rng = np.random.default_rng(14)
    dense = random_row_stochastic_dense(rng, 60, 0.2)
    g = from_dense(dense)
    cfg = SolverConfig(rel_tolerance=1e-15, max_iterations=1)
    with pytest.raises(SolverError) as info:
        solve_shifted(g, False, rng.normal(size=60), cfg)
    assert info.value.best_solution.shape == (60,)
    assert info.value.iterations == 1
    assert info.value.residual > 0


def test_rejects_nonfinite_rhs(two_node):
    with pytest.raises(ValueError):
        solve_shifted(two_node, False, np.array([np.nan, 0.0]))


def test_solver_is_deterministic():
    rng = np.random.default_rng(21)
    dense = random_row_stochastic_dense(rng, 80, 0.15)
    g = from_dense(dense)
    b = rng.normal(size=80)
    a = solve_shifted(g, False, b)
    c = solve_shifted(g, False, b)
    assert np.array_equal(a.solution, c.solution)
    assert a.iterations == c.iterations


def test_concurrent_solves_bit_identical_to_sequential():
    rng = np.random.default_rng(22)
    dense = random_row_stochastic_dense(rng, 70, 0.2)
    g = from_dense(dense)
    rhs = [rng.normal(size=70) for _ in range(4)]
    sequential = [solve_shifted(g, False, b).solution for b in rhs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        concurrent = list(pool.map(lambda b: solve_shifted(g, False, b).solution, rhs))
    for a, b in zip(sequential, concurrent):
        assert np.array_equal(a, b)


def test_solve_memory_stays_linear_in_n():
    # m >> n instance: the solver workspace must not scale with m
    rng = np.random.default_rng(30)
    n = 400
    dense = random_row_stochastic_dense(rng, n, 0.4)
    g = from_dense(dense)
    b = rng.normal(size=n)
    solve_shifted(g, False, b)  # warm the cached CSR view
    tracemalloc.start()
    tracemalloc.reset_peak()
    solve_shifted(g, False, b)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    graph_bytes = g.m * (8 + 8)
    assert peak < 0.25 * graph_bytes + 64 * n
