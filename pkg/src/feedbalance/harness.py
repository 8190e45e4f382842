"""Evaluation measures, the four-step experiment scheme, parameter sweeps,
and result serialization.

The scheme mirrors the real-data pipeline: (1) sample or load equilibrium
opinions z, (2) row-normalize the adjacency, (3) invert the FJ map to get
innate opinions, (4) run each method and score it with the relative
reductions rho_eq (against the untouched equilibrium) and rho_0 (against
the innate starting point).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .baselines import BASELINE_NAMES, BaselineKind, apply_baseline
from .dynamics import ObjectiveValue, disagreement, objective, polarization
from .graph import (
    GeneratorConfig,
    Graph,
    from_coo,
    generate,
    kernighan_lin_bisect,
    row_normalize,
    sbm_labels,
)
from .opinions import OpinionGenConfig, OpinionVector, as_values, generate_opinions, infer_innate
from .optimizer import OptimizerConfig, lcgd

__all__ = [
    "MeasureError",
    "EvalReport",
    "SweepSpec",
    "rho_eq",
    "rho_0",
    "run_experiment",
    "run_sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
    "BruteForceResult",
    "brute_force_undirected_optimum",
    "four_cycle_graph",
    "METHOD_NAMES",
]

METHOD_NAMES = ("lcgd",) + BASELINE_NAMES

SWEEP_COLUMNS = [
    "network",
    "n",
    "m",
    "p",
    "beta_sbm",
    "budget",
    "method",
    "rho_eq",
    "rho_0",
    "f_before",
    "f_after",
    "iters",
    "time_s",
    "seed",
    "error",
]


class MeasureError(ValueError):
    """The reduction measure is undefined (zero denominator)."""


def _graphs_identical(a: Graph, b: Graph) -> bool:
    if a is b:
        return True
    return (
        a.n == b.n
        and a.m == b.m
        and np.array_equal(a.row_offsets, b.row_offsets)
        and np.array_equal(a.col_indices, b.col_indices)
        and np.array_equal(a.weights, b.weights)
    )


def rho_eq(g: Graph, g_star: Graph, s, cfg=None) -> float:
    """1 - [P(z*) + D(z*, A*)] / [P(z) + D(z, A)] with z, z* the FJ
    equilibria of the input and re-weighted matrices. Exactly 0 when the
    graphs are identical (the denominator solve is reused)."""
    before = objective(g, s, cfg).total
    if before == 0.0:
        raise MeasureError("rho_eq is undefined: the input objective is zero (s = 0?)")
    if _graphs_identical(g, g_star):
        return 0.0
    after = objective(g_star, s, cfg).total
    return 1.0 - after / before


def rho_0(g: Graph, g_star: Graph, s, cfg=None) -> float:
    """1 - [P(z*) + D(z*, A*)] / [P(s) + D(s, A)]: reduction against the
    innate opinions on the original matrix."""
    s = as_values(s)
    denominator = polarization(s) + disagreement(g, s)
    if denominator == 0.0:
        raise MeasureError("rho_0 is undefined: P(s) + D(s, A) is zero")
    after = objective(g_star, s, cfg).total
    return 1.0 - after / denominator


@dataclass
class EvalReport:
    """One method's outcome on one instance. rho_eq always equals
    1 - f_after.total / f_before.total of the stored components."""

    network: str
    n: int
    m: int
    method: str
    rho_eq: float
    rho_0: float
    f_before: ObjectiveValue
    f_after: ObjectiveValue
    innate_total: float
    wall_time_s: float
    iterations: int
    seed: int
    config_fingerprint: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["f_before"] = self.f_before.total
        d["f_after"] = self.f_after.total
        return d


def _fingerprint(*objs) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        return str(o)

    payload = json.dumps([asdict(o) if hasattr(o, "__dataclass_fields__") else o for o in objs],
                         sort_keys=True, default=default)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _verify_feasible(g_star: Graph, g_ref: Graph) -> None:
    """Defense in depth: g_star must re-weight a subset of g_ref's edges and
    keep unit row sums on nonempty rows."""
    if g_star.n != g_ref.n:
        raise ValueError("method output has a different node count")
    star_keys = np.asarray(g_star.edge_rows) * g_ref.n + g_star.col_indices
    ref_keys = np.asarray(g_ref.edge_rows) * g_ref.n + g_ref.col_indices
    if not np.isin(star_keys, ref_keys).all():
        raise ValueError("method output created edges outside the input pattern")
    sums = np.asarray(g_star.out_degrees)
    nonempty = np.diff(g_star.row_offsets) > 0
    if nonempty.any() and np.abs(sums[nonempty] - 1.0).max() > 1e-8:
        raise ValueError("method output is not row-stochastic")


def _derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _resolve_labels(
    graph_cfg: GeneratorConfig | None, g: Graph, opinion_cfg: OpinionGenConfig, seed: int
) -> OpinionGenConfig:
    if opinion_cfg.distribution != "gaussian_two_community" or opinion_cfg.labels is not None:
        return opinion_cfg
    if graph_cfg is not None and graph_cfg.model == "sbm" and len(graph_cfg.block_sizes) == 2:
        labels = sbm_labels(graph_cfg)
    else:
        labels = kernighan_lin_bisect(g, seed=_derive_seed(seed, 2))
    return replace(opinion_cfg, labels=labels)


def run_method(
    name: str, g: Graph, s, opt_cfg: OptimizerConfig, seed: int
) -> tuple[Graph, int]:
    """Dispatch one method; returns its output graph and iteration count."""
    if name == "lcgd":
        cfg = replace(opt_cfg, seed=seed)
        g_star, trace = lcgd(g, s, cfg)
        return g_star, trace.iterations
    if name in BASELINE_NAMES:
        return apply_baseline(g, s, BaselineKind(name)), 0
    raise ValueError(f"unknown method {name!r}; choose from {METHOD_NAMES}")


def run_experiment(
    network: GeneratorConfig | Graph,
    opinion_cfg: OpinionGenConfig,
    methods: Sequence[str],
    opt_cfg: OptimizerConfig | None = None,
    seed: int = 0,
    network_name: str | None = None,
    equilibrium_opinions: OpinionVector | None = None,
) -> list[EvalReport]:
    """Run the four-step scheme and score every requested method.

    ``network`` is either a generator config (sampled with a seed derived
    from ``seed``) or an already-loaded graph. Sampled opinions are treated
    as *equilibrium* opinions; pass ``equilibrium_opinions`` to use given
    ones instead (real-data path). Deterministic for fixed inputs.
    """
    opt_cfg = opt_cfg or OptimizerConfig()
    if isinstance(network, Graph):
        g_raw = network
        graph_cfg = None
        name = network_name or "loaded"
    else:
        graph_cfg = replace(network, seed=_derive_seed(seed, 0))
        g_raw = generate(graph_cfg)
        name = network_name or network.model
    g = row_normalize(g_raw).graph

    if equilibrium_opinions is None:
        cfg = _resolve_labels(graph_cfg, g, opinion_cfg, seed)
        cfg = replace(cfg, seed=_derive_seed(seed, 1))
        z = generate_opinions(cfg, g.n)
    else:
        z = equilibrium_opinions
    s = infer_innate(g, z)

    f_before = objective(g, s, opt_cfg.solver)
    if f_before.total == 0.0:
        raise MeasureError("the input objective is zero; measures are undefined")
    innate_total = polarization(s) + disagreement(g, s)
    fingerprint = _fingerprint(graph_cfg, opinion_cfg, opt_cfg, seed)

    reports = []
    for method in methods:
        tic = time.perf_counter()
        g_star, iterations = run_method(method, g, s, opt_cfg, seed)
        elapsed = time.perf_counter() - tic
        _verify_feasible(g_star, g)
        if _graphs_identical(g, g_star):
            f_after = f_before
        else:
            f_after = objective(g_star, s, opt_cfg.solver)
        reports.append(
            EvalReport(
                network=name,
                n=g.n,
                m=g.m,
                method=method,
                rho_eq=1.0 - f_after.total / f_before.total,
                rho_0=1.0 - f_after.total / innate_total,
                f_before=f_before,
                f_after=f_after,
                innate_total=innate_total,
                wall_time_s=elapsed,
                iterations=iterations,
                seed=seed,
                config_fingerprint=fingerprint,
            )
        )
    return reports


@dataclass
class SweepSpec:
    """Cross product of SBM inter-block probability, opinion polarization,
    and budget grids, repeated over seeds and methods."""

    n: int = 1000
    block_sizes: tuple[int, ...] = (500, 500)
    intra_p: float = 0.02
    beta_sbm_grid: tuple[float, ...] = (0.002,)
    p_grid: tuple[float, ...] = (5.0,)
    budget_grid: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0, 1, 2)
    methods: tuple[str, ...] = METHOD_NAMES
    distribution: str = "gaussian_two_community"

    def validate(self) -> None:
        for grid, label in (
            (self.beta_sbm_grid, "beta_sbm_grid"),
            (self.p_grid, "p_grid"),
            (self.budget_grid, "budget_grid"),
            (self.seeds, "seeds"),
        ):
            if not grid:
                raise ValueError(f"{label} must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ValueError(f"unknown method {m!r}")


def _sweep_cells(spec: SweepSpec) -> list[dict]:
    cells = []
    for beta_sbm in spec.beta_sbm_grid:
        for p in spec.p_grid:
            for budget in spec.budget_grid:
                for seed in spec.seeds:
                    cells.append(dict(beta_sbm=beta_sbm, p=p, budget=budget, seed=seed))
    return cells


def run_sweep(
    spec: SweepSpec, opt_cfg: OptimizerConfig | None = None, threads: int = 1
) -> list[dict]:
    """One long-format row per (cell, method); per-cell failures land in the
    error column and the sweep continues. Row order is the deterministic
    cell order regardless of thread completion order."""
    spec.validate()
    opt_cfg = opt_cfg or OptimizerConfig()
    cells = _sweep_cells(spec)

    def run_cell(cell: dict) -> list[dict]:
        base = {
            "network": "sbm",
            "n": spec.n,
            "m": "",
            "p": cell["p"],
            "beta_sbm": cell["beta_sbm"],
            "budget": cell["budget"],
            "seed": cell["seed"],
            "error": "",
        }
        try:
            network = GeneratorConfig(
                model="sbm",
                n=spec.n,
                block_sizes=spec.block_sizes,
                intra_p=spec.intra_p,
                inter_p=cell["beta_sbm"],
            )
            opinion_cfg = OpinionGenConfig(distribution=spec.distribution, polarization=cell["p"])
            cfg = replace(opt_cfg, budget=cell["budget"])
            reports = run_experiment(network, opinion_cfg, spec.methods, cfg, seed=cell["seed"])
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            rows = []
            for method in spec.methods:
                row = dict(base, method=method, rho_eq="", rho_0="", f_before="", f_after="",
                           iters="", time_s="", error=f"{type(exc).__name__}: {exc}")
                rows.append(row)
            return rows
        rows = []
        for rep in reports:
            rows.append(
                dict(
                    base,
                    m=rep.m,
                    method=rep.method,
                    rho_eq=rep.rho_eq,
                    rho_0=rep.rho_0,
                    f_before=rep.f_before.total,
                    f_after=rep.f_after.total,
                    iters=rep.iterations,
                    time_s=rep.wall_time_s,
                )
            )
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_cell = list(pool.map(run_cell, cells))
    else:
        per_cell = [run_cell(c) for c in cells]
    return [row for rows in per_cell for row in rows]


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in SWEEP_COLUMNS})


# ---- undirected optimality oracle -----------------------------------------


class BruteForceResult(NamedTuple):
    best_param: float
    best_value: float
    degenerate: bool


def four_cycle_graph(a: float) -> Graph:
    """Symmetric doubly stochastic matrix on the 4-cycle 0-1-2-3-0: weight a
    on the (0,1) and (2,3) pairs, 1 - a on (1,2) and (3,0)."""
    if not (0.0 <= a <= 1.0):
        raise ValueError("a must lie in [0, 1]")
    dense = np.array(
        [
            [0.0, a, 0.0, 1.0 - a],
            [a, 0.0, 1.0 - a, 0.0],
            [0.0, 1.0 - a, 0.0, a],
            [1.0 - a, 0.0, a, 0.0],
        ]
    )
    rows, cols = np.nonzero(np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]]))
    return from_coo(4, rows, cols, dense[rows, cols])


def brute_force_undirected_optimum(
    family: Callable[[float], Graph], s, num_points: int = 10_000
) -> BruteForceResult:
    """Grid-search oracle over a 1-parameter doubly stochastic family,
    minimizing s^T (2I - A(a))^{-1} s by dense solves (tiny instances only).

    Substitutes the out-of-scope SDP route for validating undirected runs.
    A flat profile (s = 0 or symmetric-degenerate instances) is flagged.
    """
    s = as_values(s)
    grid = np.linspace(0.0, 1.0, num_points)
    values = np.empty(num_points)
    for k, a in enumerate(grid):
        dense = family(float(a)).to_dense()
        z = np.linalg.solve(2.0 * np.eye(len(s)) - dense, s)
        values[k] = float(s @ z)
    best = int(np.argmin(values))
    degenerate = bool(np.ptp(values) < 1e-14)
    return BruteForceResult(float(grid[best]), float(values[best]), degenerate)
