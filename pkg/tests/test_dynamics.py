from __future__ import annotations

import numpy as np
import pytest

from feedbalance.dynamics import (
    disagreement,
    fj_equilibrium,
    fj_step,
    objective,
    polarization,
)
from feedbalance.graph import from_dense
from feedbalance.opinions import infer_innate

from conftest import (
    dense_eq6,
    dense_equilibrium,
    dense_objective_total,
    random_instance,
    random_row_stochastic_dense,
)


# ---- fj_step ----------------------------------------------------------------


def test_fj_step_zero(two_node):
    assert fj_step(two_node, np.zeros(2), np.zeros(2)).values.tolist() == [0.0, 0.0]


def test_fj_step_two_node(two_node):
    out = fj_step(two_node, np.zeros(2), np.array([1.0, -1.0]))
    assert out.values.tolist() == [0.5, -0.5]


def test_fj_step_iteration_converges_to_equilibrium():
    g, dense, s = random_instance(1, n=30)
    z = s.copy()
    for _ in range(200):
        z = fj_step(g, z, s).values
    target = fj_equilibrium(g, s).z_star.values
    assert np.abs(z - target).max() <= 1e-6


def test_fj_step_empty_rows_hold_innate():
    dense = np.array([[0.0, 1.0], [0.0, 0.0]])
    g = from_dense(dense)
    out = fj_step(g, np.array([0.5, 0.5]), np.array([0.2, -0.4]))
    assert out.values[1] == -0.4


# ---- fj_equilibrium -----------------------------------------------------------


def test_equilibrium_zero(two_node):
    assert fj_equilibrium(two_node, np.zeros(2)).z_star.values.tolist() == [0.0, 0.0]


def test_equilibrium_two_node(two_node):
    z = fj_equilibrium(two_node, np.array([1.0, -1.0])).z_star.values
    assert np.abs(z - np.array([1 / 3, -1 / 3])).max() <= 1e-10


def test_equilibrium_edgeless_halves():
    g = from_dense(np.zeros((3, 3)))
    s = np.array([1.0, -2.0, 1.0])
    z = fj_equilibrium(g, s).z_star.values
    # every row is empty: each user keeps the innate opinion
    assert np.abs(z - s).max() <= 1e-12


def test_equilibrium_is_fixed_point_of_step():
    g, dense, s = random_instance(2, n=50)
    z = fj_equilibrium(g, s).z_star.values
    stepped = fj_step(g, z, s).values
    assert np.abs(stepped - z).max() <= 1e-9


# ---- indices -------------------------------------------------------------------


def test_polarization_examples():
    assert polarization(np.array([1.0, -1.0])) == 2.0
    assert polarization(np.full(5, 3.7)) <= 1e-25
    assert abs(polarization(np.array([1 / 3, -1 / 3])) - 2 / 9) <= 1e-15


def test_polarization_translation_invariant():
    rng = np.random.default_rng(3)
    z = rng.normal(size=100)
    assert abs(polarization(z + 17.3) - polarization(z)) <= 1e-10 * max(1.0, polarization(z))


def test_disagreement_examples(two_node):
    assert disagreement(two_node, np.full(2, 0.4)) == 0.0
    assert disagreement(two_node, np.array([1.0, -1.0])) == 4.0
    assert abs(disagreement(two_node, np.array([1 / 3, -1 / 3])) - 4 / 9) <= 1e-15


def test_disagreement_matches_quadratic_form():
    rng = np.random.default_rng(4)
    for k in range(50):
        n = int(rng.integers(5, 60))
        dense = random_row_stochastic_dense(rng, n, 0.25)
        g = from_dense(dense)
        z = rng.normal(size=n)
        z -= z.mean()
        edge_sum = disagreement(g, z)
        d_in = np.diag(dense.sum(axis=0))
        quad = 0.5 * z @ (np.eye(n) + d_in - 2 * dense) @ z
        assert abs(edge_sum - quad) <= 1e-10, f"instance {k}"


# ---- objective ------------------------------------------------------------------


def test_objective_two_node(two_node):
    val = objective(two_node, np.array([1.0, -1.0]))
    assert abs(val.total - 2 / 3) <= 1e-10
    assert abs(val.polarization - 2 / 9) <= 1e-10
    assert abs(val.disagreement - 4 / 9) <= 1e-10
    # doubly stochastic instance: the closed form coincides with P + D
    assert abs(val.uncentered_total - val.total) <= 1e-12
    assert abs(val.uncentered_total - 2 / 3) <= 1e-10  # = s^T z*


def test_objective_decomposition_identity():
    for k in range(50):
        g, dense, s = random_instance(100 + k, n=int(20 + (k % 5) * 15))
        val = objective(g, s)
        assert abs(val.total - (val.polarization + val.disagreement)) <= 1e-8, f"instance {k}"
        assert val.polarization >= 0.0
        assert val.disagreement >= 0.0


def test_objective_matches_dense_oracle():
    for k in range(20):
        g, dense, s = random_instance(200 + k, n=35)
        val = objective(g, s)
        assert abs(val.total - dense_objective_total(dense, s)) <= 1e-9
        assert abs(val.uncentered_total - dense_eq6(dense, s)) <= 1e-8


def test_objective_shift_invariance():
    g, dense, s = random_instance(7, n=40)
    base = objective(g, s)
    shifted = objective(g, s + 3.25)
    assert abs(base.total - shifted.total) <= 1e-8 * max(1.0, base.total)


def test_uncentered_exceeds_total_by_mean_shift():
    g, dense, s = random_instance(8, n=45)
    val = objective(g, s)
    z = dense_equilibrium(dense, s)
    assert abs(val.uncentered_total - val.total - g.n * z.mean() ** 2) <= 1e-9


def test_objective_nonnegative_parts():
    for k in range(10):
        g, _, s = random_instance(300 + k, n=25)
        val = objective(g, s)
        assert val.polarization >= 0 and val.disagreement >= 0 and val.total >= 0


# ---- the printed non-convexity instance -------------------------------------------


A1 = np.array([[0.0, 1.0, 0.0], [2 / 3, 0.0, 1 / 3], [1.0, 0.0, 0.0]])
A2 = np.array([[0.0, 1.0, 0.0], [1 / 3, 0.0, 2 / 3], [0.0, 1.0, 0.0]])
S3 = np.array([1.0, 0.0, -1.0])


def test_counterexample_instance_values_match_dense_oracle():
    mid = objective(from_dense((A1 + A2) / 2), S3).total
    avg = 0.5 * (objective(from_dense(A1), S3).total + objective(from_dense(A2), S3).total)
    assert abs(mid - dense_objective_total((A1 + A2) / 2, S3)) <= 1e-10
    expected_avg = 0.5 * (dense_objective_total(A1, S3) + dense_objective_total(A2, S3))
    assert abs(avg - expected_avg) <= 1e-10
    # the convexity inequality is violated at the midpoint
    assert mid > avg


def test_counterexample_closed_form_is_convex_here():
    # the uncentered closed form does NOT witness non-convexity on this
    # instance; only the index sum P + D does (see the module docstring)
    mid = dense_eq6((A1 + A2) / 2, S3)
    avg = 0.5 * (dense_eq6(A1, S3) + dense_eq6(A2, S3))
    assert mid < avg
