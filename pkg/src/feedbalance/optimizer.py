"""Projected gradient descent over the feasible re-weightings of a graph.

Directed mode minimizes polarization + disagreement at the FJ equilibrium
over the row-stochastic matrices preserving the input zero pattern; the
gradient is assembled from three shifted solves and rank-one products, so
one iteration costs O(T(n + m)). Undirected mode works on the doubly
stochastic matrices over a symmetric pattern, with the single-solve
gradient z z^T and Sinkhorn projection.

Per iteration: gradient, ADAM or plain step, projection, then budget
mixing A <- beta * A_proj + (1 - beta) * A_init. The logged objective uses
the solves made before the update, so the trace lags one iteration; the
final matrix is re-evaluated once at exit and the best iterate is
returned.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ObjectiveValue, disagreement, objective, polarization
from .graph import Graph, from_dense
from .linsolve import SolverConfig, solve_shifted
from .opinions import as_values

__all__ = [
    "OptimizerConfig",
    "GradientResult",
    "RunTrace",
    "SinkhornError",
    "gradient",
    "project_row_stochastic",
    "project_doubly_stochastic_sinkhorn",
    "prepare_undirected_reference",
    "lipschitz_upper_bound",
    "lcgd",
    "convexity_counterexample_check",
    "ConvexityCounterexampleReport",
]

logger = logging.getLogger(__name__)

# undirected mode: bound on the step halvings that hunt for a projectable step
_MAX_STEP_HALVINGS = 30


@dataclass
class OptimizerConfig:
    """Step size eta, stopping tolerance delta (defaults to 1e-6 * m at run
    time), budget in [0, 1], directed/undirected mode, and the stepper.

    plain_step_rule applies to stepper="plain" in undirected mode only:
    "lipschitz" uses eta = 1 / ||s||^2 from the gradient's Lipschitz bound.
    """

    eta: float = 0.2
    delta: float | None = None
    budget: float = 1.0
    max_iterations: int = 500
    mode: str = "directed"
    stepper: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    plain_step_rule: str = "fixed"
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    sinkhorn_tol: float = 1e-8
    sinkhorn_max_sweeps: int = 1000
    validate_iterates: bool = False

    def validate(self) -> None:
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not (0.0 <= self.budget <= 1.0):
            raise ValueError("budget must lie in [0, 1]")
        if self.mode not in ("directed", "undirected"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.stepper not in ("adam", "plain"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.plain_step_rule not in ("fixed", "lipschitz"):
            raise ValueError(f"unknown plain_step_rule {self.plain_step_rule!r}")


@dataclass
class GradientResult:
    """Stored-edge gradient values plus the auxiliary solve vectors and the
    objective evaluated from the same solves."""

    values: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    objective: ObjectiveValue
    solver_iterations: tuple[int, int, int]


@dataclass
class RunTrace:
    """Objective per iteration (the final entry is the exit re-evaluation),
    solver iteration counts, wall times, and why the loop stopped."""

    objective_values: list[float]
    solver_iterations: list[tuple[int, int, int]]
    iteration_seconds: list[float]
    termination: str
    best_index: int

    @property
    def iterations(self) -> int:
        return len(self.solver_iterations)


class SinkhornError(RuntimeError):
    pass


def gradient(g: Graph, s, cfg: SolverConfig | None = None) -> GradientResult:
    """Objective gradient on the stored edges, from three shifted solves.

    With z1 = (2I - A^T)^{-1} s, z2 = (2I - A)^{-1} s and
    z3 = (2I - A^T)^{-1} (D_in - I) z2, the entry for edge (i, j) is

        z1[i] z2[j] + z3[i] z2[j] + z2[j]^2 / 2.

    Verified against central finite differences of the densely evaluated
    closed-form objective. Non-edges have zero differential and are never
    materialized. The returned objective carries both the index sum
    (total) and the closed-form value s@z1 + s@z3/2 (uncentered_total).
    """
    s = as_values(s)
    if len(np.asarray(g.empty_rows)):
        raise ValueError("gradient requires a row-stochastic graph (no empty rows)")
    r1 = solve_shifted(g, True, s, cfg)
    r2 = solve_shifted(g, False, s, cfg)
    z1, z2 = r1.solution, r2.solution
    din = np.asarray(g.in_degrees)
    r3 = solve_shifted(g, True, (din - 1.0) * z2, cfg)
    z3 = r3.solution
    rows = np.asarray(g.edge_rows)
    cols = g.col_indices
    values = z1[rows] * z2[cols] + z3[rows] * z2[cols] + 0.5 * z2[cols] ** 2
    pol = polarization(z2)
    dis = disagreement(g, z2)
    uncentered = float(s @ z1) + 0.5 * float(s @ z3)
    obj = ObjectiveValue(pol + dis, pol, dis, uncentered)
    return GradientResult(values, z1, z2, z3, obj, (r1.iterations, r2.iterations, r3.iterations))


def project_row_stochastic(values: np.ndarray, pattern: Graph) -> Graph:
    """Project edge values onto the feasible set: clip negatives, keep only
    the stored pattern, and l1-normalize each row.

    Rows that clip to all zeros are repaired to uniform weights over their
    edges (the l1 normalization is undefined there and uniform is the
    maximum-entropy feasible choice). Idempotent on feasible inputs.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (pattern.m,):
        raise ValueError("values must align with the pattern's stored edges")
    rows = np.asarray(pattern.edge_rows)
    w = np.maximum(values, 0.0)
    sums = np.bincount(rows, weights=w, minlength=pattern.n)
    counts = np.diff(pattern.row_offsets)
    dead = (sums == 0.0) & (counts > 0)
    if dead.any():
        w = np.where(dead[rows], 1.0, w)
        sums = np.bincount(rows, weights=w, minlength=pattern.n)
    scale = np.ones(pattern.n)
    nonzero = sums > 0
    scale[nonzero] = 1.0 / sums[nonzero]
    return pattern.with_weights(w * scale[rows])


def project_doubly_stochastic_sinkhorn(
    values: np.ndarray,
    pattern: Graph,
    tol: float = 1e-8,
    max_sweeps: int = 1000,
) -> Graph:
    """Alternate row and column normalization until every row and column sum
    is within tol of 1. Negative inputs are clipped first.

    Convergence requires the (clipped) pattern to have total support;
    failure to converge within max_sweeps raises SinkhornError naming that
    as the likely cause.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (pattern.m,):
        raise ValueError("values must align with the pattern's stored edges")
    rows = np.asarray(pattern.edge_rows)
    cols = pattern.col_indices
    w = np.maximum(values, 0.0)
    for _ in range(max_sweeps):
        row_sums = np.bincount(rows, weights=w, minlength=pattern.n)
        if np.any(row_sums <= 0.0):
            raise SinkhornError(
                "a row clipped to zero: the pattern lost support; "
                "doubly stochastic scaling needs total support"
            )
        w = w / row_sums[rows]
        col_sums = np.bincount(cols, weights=w, minlength=pattern.n)
        if np.any(col_sums <= 0.0):
            raise SinkhornError(
                "a column clipped to zero: the pattern lost support; "
                "doubly stochastic scaling needs total support"
            )
        w = w / col_sums[cols]
        row_dev = np.abs(np.bincount(rows, weights=w, minlength=pattern.n) - 1.0).max()
        if row_dev <= tol:
            return pattern.with_weights(w)
    raise SinkhornError(
        f"no convergence in {max_sweeps} sweeps; the pattern likely lacks "
        "total support (every edge must lie on a positive-diagonal "
        "permutation of the pattern)"
    )


def lipschitz_upper_bound(s) -> float:
    """||s||_2^2: upper bound on the gradient's Lipschitz constant for the
    undirected objective; 1/bound is a safe plain-GD step size there."""
    values = as_values(s)
    return float(values @ values)


def _objective_from_equilibrium(g_weights: np.ndarray, pattern: Graph, z: np.ndarray) -> float:
    rows = np.asarray(pattern.edge_rows)
    gaps = z[rows] - z[pattern.col_indices]
    centered = z - z.mean()
    return float(centered @ centered) + 0.5 * float(g_weights @ (gaps * gaps))


def _validate_row_stochastic(g: Graph, what: str) -> None:
    if len(np.asarray(g.empty_rows)):
        raise ValueError(f"{what} has empty rows; row-normalize and repair first")
    if np.abs(np.asarray(g.out_degrees) - 1.0).max() > 1e-8:
        raise ValueError(f"{what} is not row-stochastic; call row_normalize first")


class _AdamState:
    def __init__(self, m: int, cfg: OptimizerConfig):
        self.first = np.zeros(m)
        self.second = np.zeros(m)
        self.t = 0
        self.cfg = cfg

    def step(self, grad: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        self.t += 1
        self.first = cfg.adam_beta1 * self.first + (1.0 - cfg.adam_beta1) * grad
        self.second = cfg.adam_beta2 * self.second + (1.0 - cfg.adam_beta2) * grad * grad
        mhat = self.first / (1.0 - cfg.adam_beta1 ** self.t)
        vhat = self.second / (1.0 - cfg.adam_beta2 ** self.t)
        return mhat / (np.sqrt(vhat) + cfg.adam_eps)


def lcgd(g_init: Graph, s, cfg: OptimizerConfig | None = None) -> tuple[Graph, RunTrace]:
    """Laplacian-constrained gradient descent.

    Loops gradient / step / projection / budget mixing until the decrease
    between consecutive logged objectives falls to delta or max_iterations
    is hit. Returns the best iterate seen (including the initial and final
    matrices), guaranteeing no objective regression, plus the full trace.
    """
    cfg = cfg or OptimizerConfig()
    cfg.validate()
    s = as_values(s)
    if len(s) != g_init.n:
        raise ValueError(f"opinions have length {len(s)}, expected {g_init.n}")
    if cfg.mode == "undirected":
        return _lcgd_undirected(g_init, s, cfg)
    return _lcgd_directed(g_init, s, cfg)


def _lcgd_directed(g_init: Graph, s: np.ndarray, cfg: OptimizerConfig) -> tuple[Graph, RunTrace]:
    _validate_row_stochastic(g_init, "g_init")
    delta = cfg.delta if cfg.delta is not None else 1e-6 * g_init.m
    w_init = g_init.weights.copy()
    w = w_init.copy()
    adam = _AdamState(g_init.m, cfg)
    gamma: list[float] = []
    solver_iters: list[tuple[int, int, int]] = []
    seconds: list[float] = []
    best_value = np.inf
    best_weights = w_init
    termination = "max_iterations"
    current = g_init
    for t in range(1, cfg.max_iterations + 1):
        tic = time.perf_counter()
        grad = gradient(current, s, cfg.solver)
        solver_iters.append(grad.solver_iterations)
        f_here = grad.objective.total  # objective of the pre-update matrix
        gamma.append(f_here)
        if f_here < best_value:
            best_value = f_here
            best_weights = current.weights
        if t >= 2 and gamma[-2] - gamma[-1] <= delta:
            termination = "converged"
            seconds.append(time.perf_counter() - tic)
            break
        step = adam.step(grad.values) if cfg.stepper == "adam" else grad.values
        projected = project_row_stochastic(w - cfg.eta * step, g_init)
        w = cfg.budget * projected.weights + (1.0 - cfg.budget) * w_init
        current = g_init.with_weights(w)
        if cfg.validate_iterates:
            _validate_row_stochastic(current, f"iterate {t}")
        seconds.append(time.perf_counter() - tic)

    final_value = _final_objective(current, s, cfg)
    gamma.append(final_value)
    if final_value < best_value:
        best_value = final_value
        best_weights = current.weights
    best_index = int(np.argmin(gamma))
    result = g_init.with_weights(np.asarray(best_weights).copy()).compacted()
    return result, RunTrace(gamma, solver_iters, seconds, termination, best_index)


def _final_objective(g: Graph, s: np.ndarray, cfg: OptimizerConfig) -> float:
    res = solve_shifted(g, False, s, cfg.solver)
    return _objective_from_equilibrium(g.weights, g, res.solution)


def prepare_undirected_reference(g: Graph, cfg: OptimizerConfig | None = None) -> Graph:
    """Doubly stochastic, exactly symmetric projection of a symmetric input:
    the reference matrix undirected runs start from and are measured
    against. Idempotent within the Sinkhorn tolerance."""
    cfg = cfg or OptimizerConfig(mode="undirected")
    tperm = np.asarray(g.transpose_permutation)
    if not np.array_equal(g.col_indices[tperm], np.asarray(g.edge_rows)) or not np.array_equal(
        np.asarray(g.edge_rows)[tperm], g.col_indices
    ):
        raise ValueError("undirected mode needs a symmetric zero pattern")
    if np.abs(g.weights - g.weights[tperm]).max() > 1e-8 * max(
        1.0, float(np.abs(g.weights).max())
    ):
        raise ValueError("undirected mode needs symmetric weights")
    start = project_doubly_stochastic_sinkhorn(
        g.weights, g, cfg.sinkhorn_tol, cfg.sinkhorn_max_sweeps
    )
    return g.with_weights(0.5 * (start.weights + start.weights[tperm]))


def _lcgd_undirected(g_init: Graph, s: np.ndarray, cfg: OptimizerConfig) -> tuple[Graph, RunTrace]:
    tperm = np.asarray(g_init.transpose_permutation)
    # the doubly stochastic projection of the input is the reference matrix
    w_init = prepare_undirected_reference(g_init, cfg).weights.copy()
    w = w_init.copy()
    rows = np.asarray(g_init.edge_rows)
    cols = g_init.col_indices
    counts = np.diff(g_init.row_offsets)

    if cfg.stepper == "plain" and cfg.plain_step_rule == "lipschitz":
        bound = lipschitz_upper_bound(s)
        if bound == 0.0:
            raise ValueError("cannot use the Lipschitz step rule with s = 0")
        eta = 1.0 / bound
    else:
        eta = cfg.eta

    delta = cfg.delta if cfg.delta is not None else 1e-6 * g_init.m
    adam = _AdamState(g_init.m, cfg)
    gamma: list[float] = []
    solver_iters: list[tuple[int, int, int]] = []
    seconds: list[float] = []
    best_value = np.inf
    best_weights = w_init
    termination = "max_iterations"
    current = g_init.with_weights(w)
    for t in range(1, cfg.max_iterations + 1):
        tic = time.perf_counter()
        res = solve_shifted(current, False, s, cfg.solver)
        z = res.solution
        solver_iters.append((res.iterations, 0, 0))
        f_here = _objective_from_equilibrium(w, g_init, z)
        gamma.append(f_here)
        if f_here < best_value:
            best_value = f_here
            best_weights = w.copy()
        if t >= 2 and gamma[-2] - gamma[-1] <= delta:
            termination = "converged"
            seconds.append(time.perf_counter() - tic)
            break
        grad_vals = z[rows] * z[cols]
        step = adam.step(grad_vals) if cfg.stepper == "adam" else grad_vals
        # a full step can clip so many entries that the surviving pattern
        # admits no doubly stochastic matrix; halve the step until the
        # projection exists (as the step shrinks the target approaches the
        # current feasible iterate, so this terminates)
        projected = None
        scale = 1.0
        for _ in range(_MAX_STEP_HALVINGS):
            raw = w - eta * scale * step
            raw = 0.5 * (raw + raw[tperm])  # keep the iterate on the symmetric manifold
            raw = np.maximum(raw, 0.0)
            sums = np.bincount(rows, weights=raw, minlength=g_init.n)
            if np.any((sums == 0.0) & (counts > 0)):
                scale *= 0.5
                continue
            try:
                projected = project_doubly_stochastic_sinkhorn(
                    raw, g_init, cfg.sinkhorn_tol, cfg.sinkhorn_max_sweeps
                )
                break
            except SinkhornError:
                scale *= 0.5
        if projected is None:
            raise SinkhornError(
                f"iterate {t}: no feasible step found after "
                f"{_MAX_STEP_HALVINGS} halvings; the pattern may not admit "
                "a doubly stochastic matrix"
            )
        # transpose-averaging preserves the row/col sums and kills the
        # residual asymmetry of finitely many sweeps
        w_proj = 0.5 * (projected.weights + projected.weights[tperm])
        w = cfg.budget * w_proj + (1.0 - cfg.budget) * w_init
        current = g_init.with_weights(w)
        if cfg.validate_iterates:
            row_dev = np.abs(np.bincount(rows, weights=w, minlength=g_init.n) - 1.0).max()
            col_dev = np.abs(np.bincount(cols, weights=w, minlength=g_init.n) - 1.0).max()
            if max(row_dev, col_dev) > 10.0 * cfg.sinkhorn_tol:
                raise AssertionError(f"iterate {t} is not doubly stochastic")
        seconds.append(time.perf_counter() - tic)

    final_value = _final_objective(current, s, cfg)
    gamma.append(final_value)
    if final_value < best_value:
        best_value = final_value
        best_weights = w
    best_index = int(np.argmin(gamma))
    result = g_init.with_weights(np.asarray(best_weights).copy()).compacted()
    return result, RunTrace(gamma, solver_iters, seconds, termination, best_index)


# ---- non-convexity witness ------------------------------------------------

_COUNTEREXAMPLE_S = np.array([1.0, 0.0, -1.0])
_COUNTEREXAMPLE_A1 = np.array(
    [
        [0.0, 1.0, 0.0],
        [2.0 / 3.0, 0.0, 1.0 / 3.0],
        [1.0, 0.0, 0.0],
    ]
)
_COUNTEREXAMPLE_A2 = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0 / 3.0, 0.0, 2.0 / 3.0],
        [0.0, 1.0, 0.0],
    ]
)


@dataclass
class ConvexityCounterexampleReport:
    midpoint_value: float
    average_value: float
    non_convex: bool

    def __str__(self) -> str:
        status = "non-convex: confirmed" if self.non_convex else "counterexample FAILED"
        return (
            f"f((A1+A2)/2) = {self.midpoint_value:.4f}, "
            f"(f(A1)+f(A2))/2 = {self.average_value:.4f} -> {status}"
        )


def convexity_counterexample_check() -> ConvexityCounterexampleReport:
    """Evaluate the built-in 3-node instance witnessing that the objective
    is not matrix-convex: the objective at the midpoint of two feasible
    matrices exceeds the average of their objectives.

    Raises RuntimeError if the inequality is not violated, since that
    signals a broken objective implementation.
    """
    g1 = from_dense(_COUNTEREXAMPLE_A1)
    g2 = from_dense(_COUNTEREXAMPLE_A2)
    gmid = from_dense(0.5 * (_COUNTEREXAMPLE_A1 + _COUNTEREXAMPLE_A2))
    s = _COUNTEREXAMPLE_S
    midpoint = objective(gmid, s).total
    average = 0.5 * (objective(g1, s).total + objective(g2, s).total)
    report = ConvexityCounterexampleReport(midpoint, average, midpoint > average)
    if not report.non_convex:
        raise RuntimeError(
            "midpoint objective did not exceed the average: "
            f"{midpoint:.6f} <= {average:.6f}; the objective implementation is suspect"
        )
    return report
