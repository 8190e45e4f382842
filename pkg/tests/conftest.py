"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately use dense linear algebra (explicit inverses and
elementwise sums) so they share no code path with the package's sparse
implementations.
"""

from __future__ import annotations

import numpy as np
import pytest

from feedbalance.graph import Graph, from_dense


def random_row_stochastic_dense(rng: np.random.Generator, n: int, density: float) -> np.ndarray:
    """Random row-stochastic matrix with no self-loops and no empty rows."""
    dense = np.where(rng.random((n, n)) < density, rng.random((n, n)), 0.0)
    np.fill_diagonal(dense, 0.0)
    for i in range(n):
        if dense[i].sum() == 0.0:
            j = int(rng.integers(n - 1))
            dense[i, j if j < i else j + 1] = 1.0
    return dense / dense.sum(axis=1, keepdims=True)


def random_instance(seed: int, n: int = 40, density: float = 0.2):
    """(Graph, dense adjacency, centered opinions) triple."""
    rng = np.random.default_rng(seed)
    dense = random_row_stochastic_dense(rng, n, density)
    s = rng.normal(size=n)
    s -= s.mean()
    return from_dense(dense), dense, s


def dense_eq6(dense: np.ndarray, s: np.ndarray) -> float:
    """Closed-form objective via explicit inverses (the fast-eval oracle)."""
    n = dense.shape[0]
    m_inv = np.linalg.inv(2.0 * np.eye(n) - dense)
    d_in = np.diag(dense.sum(axis=0))
    return float(s @ m_inv.T @ s + s @ m_inv.T @ ((d_in - np.eye(n)) / 2.0) @ m_inv @ s)


def dense_objective_total(dense: np.ndarray, s: np.ndarray) -> float:
    """Honest P + D at the dense-solved equilibrium."""
    n = dense.shape[0]
    z = np.linalg.solve(2.0 * np.eye(n) - dense, s)
    centered = z - z.mean()
    gaps = np.subtract.outer(z, z)
    return float(centered @ centered + 0.5 * np.sum(dense * gaps * gaps))


def dense_equilibrium(dense: np.ndarray, s: np.ndarray) -> np.ndarray:
    n = dense.shape[0]
    return np.linalg.solve(2.0 * np.eye(n) - dense, s)


@pytest.fixture
def two_node() -> Graph:
    """The reciprocal pair: 0 <-> 1 with unit weights (row-stochastic)."""
    return from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
