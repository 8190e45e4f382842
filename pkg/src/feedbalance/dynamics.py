"""Friedkin-Johnsen dynamics, polarization/disagreement indices, and the
combined objective with near-linear evaluation.

The objective reported everywhere in this package is the honest index sum
P(z*) + D(z*, A) at the equilibrium z* = (2I - A)^{-1} s: P subtracts the
mean of z*, which for directed graphs is generally nonzero. The closed-form
value s^T z1 + (1/2) s^T z3 (two extra transposed solves) equals
z*^T z* + D instead; it is exposed as ObjectiveValue.uncentered_total and
exceeds the total by n * mean(z*)^2. Both quantities are invariant under
shifting s by a constant, so opinions inferred from equilibria need no
re-centering.

Nodes without out-edges follow the convention z_i = s_i (they only hold
their innate opinion); the equilibrium solve realizes it by doubling b on
those rows, which keeps the plain shifted system usable unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .linsolve import SolveResult, SolverConfig, solve_shifted
from .opinions import OpinionVector, as_values

__all__ = [
    "Equilibrium",
    "ObjectiveValue",
    "fj_step",
    "fj_equilibrium",
    "polarization",
    "disagreement",
    "objective",
]

logger = logging.getLogger(__name__)


@dataclass
class Equilibrium:
    z_star: OpinionVector
    solver: SolveResult


@dataclass
class ObjectiveValue:
    """total = polarization + disagreement (within float error by
    construction); uncentered_total adds n * mean(z*)^2 and equals the
    closed-form s^T z1 + (1/2) s^T z3."""

    total: float
    polarization: float
    disagreement: float
    uncentered_total: float


def _check_lengths(g: Graph, *vectors) -> None:
    for v in vectors:
        if len(v) != g.n:
            raise ValueError(f"opinion vector has length {len(v)}, expected {g.n}")


def fj_step(g: Graph, z, s) -> OpinionVector:
    """One synchronous FJ update: z' = (A z + s) / 2 on row-stochastic rows;
    rows without out-edges return z'_i = s_i."""
    z, s = as_values(z), as_values(s)
    _check_lengths(g, z, s)
    out = 0.5 * (g.matvec(z) + s)
    empty = np.asarray(g.empty_rows)
    if len(empty):
        out[empty] = s[empty]
    return OpinionVector(out)


def fj_equilibrium(g: Graph, s, cfg: SolverConfig | None = None) -> Equilibrium:
    """Equilibrium z* with (2I - A) z* = s, via the matrix-free solver.

    The result is the fixed point of fj_step, including the z_i = s_i
    convention on empty rows.
    """
    s = as_values(s)
    _check_lengths(g, s)
    mean = abs(float(s.mean())) if len(s) else 0.0
    if mean > 1e-8 + 1e-3 * float(np.std(s)):
        logger.debug("innate opinions are not mean-centered (mean=%.3g)", mean)
    b = s.copy()
    empty = np.asarray(g.empty_rows)
    if len(empty):
        b[empty] *= 2.0  # row i of (2I - A) reads 2 z_i = b_i, so z_i = s_i
    result = solve_shifted(g, False, b, cfg)
    return Equilibrium(OpinionVector(result.solution), result)


def polarization(z) -> float:
    """Sum of squared deviations from the mean opinion."""
    values = as_values(z)
    if len(values) == 0:
        return 0.0
    centered = values - values.mean()
    return float(centered @ centered)


def disagreement(g: Graph, z) -> float:
    """(1/2) sum over stored edges of a_ij (z_i - z_j)^2."""
    values = as_values(z)
    _check_lengths(g, values)
    gaps = values[np.asarray(g.edge_rows)] - values[g.col_indices]
    return 0.5 * float(g.weights @ (gaps * gaps))


def objective(g: Graph, s, cfg: SolverConfig | None = None) -> ObjectiveValue:
    """Polarization plus disagreement at the FJ equilibrium.

    One shifted solve, then O(n + m) index evaluation; the adjacency is
    never inverted or densified.
    """
    eq = fj_equilibrium(g, s, cfg)
    z = eq.z_star.values
    pol = polarization(z)
    dis = disagreement(g, z)
    mean_shift = g.n * float(z.mean()) ** 2 if g.n else 0.0
    uncentered = pol + dis + mean_shift
    return ObjectiveValue(
        total=pol + dis,
        polarization=pol,
        disagreement=dis,
        uncentered_total=uncentered,
    )
