"""feedbalance: re-weight the edges of a social graph to minimize
polarization + disagreement at the Friedkin-Johnsen equilibrium."""

__version__ = "0.1.0"

from .baselines import BaselineKind, apply_baseline
from .dynamics import (
    Equilibrium,
    ObjectiveValue,
    disagreement,
    fj_equilibrium,
    fj_step,
    objective,
    polarization,
)
from .graph import (
    GeneratorConfig,
    Graph,
    degrees,
    generate,
    kernighan_lin_bisect,
    load_edge_list,
    row_normalize,
    save_edge_list,
)
from .harness import (
    EvalReport,
    SweepSpec,
    brute_force_undirected_optimum,
    rho_0,
    rho_eq,
    run_experiment,
    run_sweep,
)
from .linsolve import SolveResult, SolverConfig, SolverError, apply_shifted, solve_shifted
from .opinions import (
    OpinionGenConfig,
    OpinionVector,
    generate_gaussian_two_community,
    generate_uniform,
    infer_innate,
    mean_center,
)
from .optimizer import (
    GradientResult,
    OptimizerConfig,
    RunTrace,
    convexity_counterexample_check,
    gradient,
    lcgd,
    lipschitz_upper_bound,
    project_doubly_stochastic_sinkhorn,
    project_row_stochastic,
)

__all__ = [
    "__version__",
    "Graph",
    "GeneratorConfig",
    "load_edge_list",
    "save_edge_list",
    "row_normalize",
    "degrees",
    "generate",
    "kernighan_lin_bisect",
    "OpinionVector",
    "OpinionGenConfig",
    "mean_center",
    "generate_uniform",
    "generate_gaussian_two_community",
    "infer_innate",
    "SolverConfig",
    "SolveResult",
    "SolverError",
    "apply_shifted",
    "solve_shifted",
    "Equilibrium",
    "ObjectiveValue",
    "fj_step",
    "fj_equilibrium",
    "polarization",
    "disagreement",
    "objective",
    "OptimizerConfig",
    "GradientResult",
    "RunTrace",
    "gradient",
    "project_row_stochastic",
    "project_doubly_stochastic_sinkhorn",
    "lipschitz_upper_bound",
    "lcgd",
    "convexity_counterexample_check",
    "BaselineKind",
    "apply_baseline",
    "EvalReport",
    "SweepSpec",
    "rho_eq",
    "rho_0",
    "run_experiment",
    "run_sweep",
    "brute_force_undirected_optimum",
]
