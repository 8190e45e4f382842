"""Matrix-free BiCGStab for the shifted systems (2I - A) z = b and
(2I - A^T) z = b.

Row-stochastic A makes 2I - A strictly diagonally dominant (diagonal 2,
off-diagonal row sums <= 1), so these systems are always solvable and the
unpreconditioned solver converges in a handful of iterations. The solver
never materializes 2I - A; its workspace is a fixed number of length-n
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph

__all__ = ["SolverConfig", "SolveResult", "SolverError", "apply_shifted", "solve_shifted"]

# deterministic source for the re-randomized shadow residual on breakdown
_RESTART_SEED = 0x51AB1E


@dataclass
class SolverConfig:
    """rel_tolerance is on ||(2I - A)z - b|| / ||b||; max_iterations defaults
    to 10n; preconditioner is "none" or "jacobi"."""

    rel_tolerance: float = 1e-10
    max_iterations: int | None = None
    preconditioner: str = "none"

    def validate(self) -> None:
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveResult:
    solution: np.ndarray
    iterations: int
    final_residual: float


class SolverError(RuntimeError):
    """Non-convergence; carries the best iterate so the caller can decide."""

    def __init__(self, message: str, best_solution: np.ndarray, iterations: int, residual: float):
        super().__init__(message)
        self.best_solution = best_solution
        self.iterations = iterations
        self.residual = residual


def apply_shifted(g: Graph, transpose: bool, v: np.ndarray) -> np.ndarray:
    """(2I - A) v, or (2I - A^T) v. O(n + m), matrix-free."""
    v = np.asarray(v, dtype=np.float64)
    return 2.0 * v - g.matvec(v, transpose=transpose)


def solve_shifted(g: Graph, transpose: bool, b, cfg: SolverConfig | None = None) -> SolveResult:
    """Solve (2I - A) z = b (or the transposed system) with BiCGStab.

    Returns the solution with the iteration count T and the final relative
    residual. b = 0 returns z = 0 in zero iterations. On numerical
    breakdown (rho or omega vanishing) the iteration restarts once from the
    current iterate with a re-randomized shadow residual; a second
    breakdown, or exceeding max_iterations, raises SolverError carrying the
    best iterate found.
    """
    cfg = cfg or SolverConfig()
    cfg.validate()
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (g.n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({g.n},)")
    if not np.isfinite(b).all():
        raise ValueError("rhs must be finite")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return SolveResult(np.zeros(g.n), 0, 0.0)

    max_iters = cfg.max_iterations if cfg.max_iterations is not None else 10 * g.n
    tol_abs = cfg.rel_tolerance * b_norm

    if cfg.preconditioner == "jacobi":
        diag = 2.0 - g.diagonal()

        def precondition(v: np.ndarray) -> np.ndarray:
            return v / diag
    else:
        def precondition(v: np.ndarray) -> np.ndarray:
            return v

    def op(v: np.ndarray) -> np.ndarray:
        return 2.0 * v - g.matvec(v, transpose=transpose)

    x = np.zeros(g.n)
    r = b - op(x)
    r_hat = r.copy()
    rho_prev = alpha = omega = 1.0
    v = np.zeros(g.n)
    p = np.zeros(g.n)
    restarted = False
    iterations = 0
    best_x = x.copy()
    best_res = float(np.linalg.norm(r))

    # breakdown thresholds relative to the problem scale
    tiny = np.finfo(np.float64).eps ** 2 * b_norm * b_norm

    while iterations < max_iters:
        rho = float(r_hat @ r)
        if abs(rho) < tiny:
            if restarted:
                raise SolverError(
                    "BiCGStab broke down twice (rho ~ 0)", best_x, iterations, best_res / b_norm
                )
            # restart from the current iterate with a fresh shadow residual
            restarted = True
            r = b - op(x)
            rng = np.random.default_rng(_RESTART_SEED)
            r_hat = rng.standard_normal(g.n)
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p = None
            continue
        if iterations == 0 or p is None:
            p = r.copy()
        else:
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
        phat = precondition(p)
        v = op(phat)
        denom = float(r_hat @ v)
        if abs(denom) < tiny:
            if restarted:
                raise SolverError(
                    "BiCGStab broke down twice (alpha ~ 0)", best_x, iterations, best_res / b_norm
                )
            restarted = True
            r = b - op(x)
            rng = np.random.default_rng(_RESTART_SEED)
            r_hat = rng.standard_normal(g.n)
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p = None  # force p = r on resume
            continue
        alpha = rho / denom
        s = r - alpha * v
        iterations += 1
        s_norm = float(np.linalg.norm(s))
        if s_norm <= tol_abs:
            x = x + alpha * phat
            true_res = float(np.linalg.norm(b - op(x)))
            if true_res <= tol_abs:
                return SolveResult(x, iterations, true_res / b_norm)
            r = b - op(x)
            r_hat = r.copy()
            rho_prev = alpha = omega = 1.0
            p = None
            if true_res < best_res:
                best_res, best_x = true_res, x.copy()
            continue
        shat = precondition(s)
        t = op(shat)
        tt = float(t @ t)
        if tt == 0.0 or abs(tt) < tiny:
            if restarted:
                raise SolverError(
                    "BiCGStab broke down twice (omega ~ 0)", best_x, iterations, best_res / b_norm
                )
            restarted = True
            x = x + alpha * phat
            r = b - op(x)
            rng = np.random.default_rng(_RESTART_SEED)
            r_hat = rng.standard_normal(g.n)
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p = None
            continue
        omega = float(t @ s) / tt
        if omega == 0.0:
            if restarted:
                raise SolverError(
                    "BiCGStab broke down twice (omega = 0)", best_x, iterations, best_res / b_norm
                )
            restarted = True
            x = x + alpha * phat
            r = b - op(x)
            rng = np.random.default_rng(_RESTART_SEED)
            r_hat = rng.standard_normal(g.n)
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p = None
            continue
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        r_norm = float(np.linalg.norm(r))
        if r_norm < best_res:
            best_res, best_x = r_norm, x.copy()
        if r_norm <= tol_abs:
            true_res = float(np.linalg.norm(b - op(x)))
            if true_res <= tol_abs:
                return SolveResult(x, iterations, true_res / b_norm)
            r = b - op(x)
            r_hat = r.copy()
            rho_prev = alpha = omega = 1.0
            p = None
            continue
        if not np.isfinite(r_norm):
            raise SolverError("BiCGStab diverged", best_x, iterations, best_res / b_norm)
        rho_prev = rho

    raise SolverError(
        f"BiCGStab did not reach rel_tolerance={cfg.rel_tolerance:g} in {max_iters} iterations",
        best_x,
        iterations,
        best_res / b_norm,
    )
