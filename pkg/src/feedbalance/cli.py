"""Command-line front end.

Subcommands: generate (synthetic graph + opinions), rebalance (the
projected-gradient optimizer), baseline (heuristic re-weighting), sweep
(parameter grids to a long CSV), and check (built-in verification
battery). Exit codes: 0 success, 1 runtime failure, 2 usage error. All
randomness flows from --seed; stdout carries progress while machine
output goes to files. FEEDBALANCE_LOG overrides --log-level.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import subprocess
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .baselines import BASELINE_NAMES, BaselineKind, apply_baseline
from .dynamics import disagreement, fj_equilibrium, objective, polarization
from .graph import (
    GeneratorConfig,
    Graph,
    generate,
    kernighan_lin_bisect,
    load_edge_list,
    row_normalize,
    save_edge_list,
    sbm_labels,
)
from .harness import METHOD_NAMES, SweepSpec, run_sweep, write_sweep_csv
from .linsolve import SolverConfig, SolverError, solve_shifted
from .opinions import (
    OpinionGenConfig,
    generate_opinions,
    infer_innate,
    load_opinions,
    save_opinions,
)
from .optimizer import (
    OptimizerConfig,
    convexity_counterexample_check,
    gradient,
    lcgd,
    prepare_undirected_reference,
    project_doubly_stochastic_sinkhorn,
    project_row_stochastic,
)

logger = logging.getLogger("feedbalance")


def _setup_logging(level: str) -> None:
    level = os.environ.get("FEEDBALANCE_LOG", level)
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stdout,
        force=True,
    )


def _git_hash() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5
        )
    except (OSError, subprocess.TimeoutExpired):
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _write_meta(out_dir: Path, config: dict) -> None:
    meta = {"library_version": __version__, "git_hash": _git_hash(), "config": config}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _parse_list(text: str, cast) -> tuple:
    try:
        return tuple(cast(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise click.BadParameter(f"cannot parse {text!r} as comma-separated {cast.__name__}s")


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              help="DEBUG/INFO/WARNING/ERROR; the FEEDBALANCE_LOG env var wins.")
@click.version_option(__version__)
def main(log_level: str) -> None:
    """Re-weight social-graph edges to reduce polarization and disagreement."""
    _setup_logging(log_level)


# ---- generate -------------------------------------------------------------


@main.command("generate")
@click.option("--model", type=click.Choice(["sbm", "erdos_renyi", "barabasi_albert"]), required=True)
@click.option("--n", type=int, required=True, help="Node count.")
@click.option("--blocks", default=None, help="SBM block sizes, e.g. 500,500.")
@click.option("--intra", type=float, default=None, help="SBM intra-block edge probability.")
@click.option("--inter", type=float, default=None, help="SBM inter-block edge probability.")
@click.option("--edge-prob", type=float, default=None, help="Erdos-Renyi edge probability.")
@click.option("--attach", type=int, default=None, help="Barabasi-Albert attachments per node.")
@click.option("--opinions", "opinions_kind", type=click.Choice(["uniform", "gaussian"]),
              default="gaussian", show_default=True)
@click.option("--p", type=float, default=5.0, show_default=True, help="Polarization level.")
@click.option("--mean-scale", type=float, default=0.05, show_default=True)
@click.option("--std", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def cmd_generate(model, n, blocks, intra, inter, edge_prob, attach, opinions_kind, p,
                 mean_scale, std, seed, out):
    """Write graph.tsv, opinions.txt and meta.json for a synthetic instance."""
    block_sizes = _parse_list(blocks, int) if blocks else None
    cfg = GeneratorConfig(model=model, n=n, seed=seed, p=edge_prob, attach=attach,
                          block_sizes=block_sizes, intra_p=intra, inter_p=inter)
    try:
        cfg.validate()
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        g = generate(cfg)
        if opinions_kind == "uniform":
            ocfg = OpinionGenConfig("uniform", p, seed=seed + 1)
        else:
            if model == "sbm" and len(block_sizes) == 2:
                labels = sbm_labels(cfg)
            else:
                logger.info("bisecting the graph with Kernighan-Lin for community labels")
                labels = kernighan_lin_bisect(g, seed=seed)
            ocfg = OpinionGenConfig("gaussian_two_community", p, seed=seed + 1, labels=labels,
                                    mean_scale=mean_scale, std=std)
        z = generate_opinions(ocfg, n)
        out.mkdir(parents=True, exist_ok=True)
        save_edge_list(g, out / "graph.tsv")
        save_opinions(z, out / "opinions.txt")
        _write_meta(out, {
            "command": "generate", "model": model, "n": n, "blocks": block_sizes,
            "intra": intra, "inter": inter, "edge_prob": edge_prob, "attach": attach,
            "opinions": opinions_kind, "p": p, "mean_scale": mean_scale, "std": std,
            "seed": seed,
        })
    except OSError as exc:
        raise click.ClickException(str(exc))
    logger.info("wrote %s (%d nodes, %d edges)", out, g.n, g.m)


# ---- rebalance -------------------------------------------------------------


def _load_instance(graph_path, opinions_path, opinions_are, undirected_input, mode, solver_tol):
    g_raw = load_edge_list(graph_path, directed=not undirected_input)
    solver = SolverConfig(rel_tolerance=solver_tol)
    if mode == "undirected":
        g = prepare_undirected_reference(g_raw, OptimizerConfig(mode="undirected", solver=solver))
    else:
        g = row_normalize(g_raw).graph
    z = load_opinions(opinions_path)
    if len(z) != g.n:
        raise click.ClickException(
            f"opinion file has {len(z)} values but the graph has {g.n} nodes"
        )
    if opinions_are == "equilibrium":
        s = infer_innate(g, z)
    else:
        s = z
    return g, s, solver


def _write_report(out_dir: Path, payload: dict) -> None:
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, default=float) + "\n")


def _objective_dict(value) -> dict:
    return {"total": value.total, "polarization": value.polarization,
            "disagreement": value.disagreement}


@main.command("rebalance")
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--opinions", "opinions_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--opinions-are", type=click.Choice(["equilibrium", "innate"]),
              default="equilibrium", show_default=True,
              help="equilibrium triggers innate-opinion inference first.")
@click.option("--undirected-input", is_flag=True,
              help="The TSV lists each undirected edge once; mirror it on load.")
@click.option("--eta", type=float, default=0.2, show_default=True)
@click.option("--delta-per-edge", type=float, default=1e-6, show_default=True,
              help="Stopping tolerance is this times the edge count.")
@click.option("--budget", type=float, default=1.0, show_default=True)
@click.option("--mode", type=click.Choice(["directed", "undirected"]), default="directed",
              show_default=True)
@click.option("--stepper", type=click.Choice(["adam", "plain"]), default="adam", show_default=True)
@click.option("--max-iters", type=int, default=500, show_default=True)
@click.option("--solver-tol", type=float, default=1e-10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def cmd_rebalance(graph_path, opinions_path, opinions_are, undirected_input, eta, delta_per_edge,
                  budget, mode, stepper, max_iters, solver_tol, seed, out):
    """Optimize the edge weights; write graph_star.tsv, trace.csv, report.json."""
    out.mkdir(parents=True, exist_ok=True)
    g, s, solver = _load_instance(graph_path, opinions_path, opinions_are, undirected_input,
                                  mode, solver_tol)
    cfg = OptimizerConfig(eta=eta, delta=delta_per_edge * g.m, budget=budget, mode=mode,
                          stepper=stepper, max_iterations=max_iters, solver=solver, seed=seed)
    tic = time.perf_counter()
    try:
        g_star, trace = lcgd(g, s, cfg)
    except SolverError as exc:
        _write_trace(out / "trace.csv", [], [])
        raise click.ClickException(f"solver failed: {exc}")
    elapsed = time.perf_counter() - tic
    _write_trace(out / "trace.csv", trace.objective_values, trace.solver_iterations,
                 trace.iteration_seconds)
    save_edge_list(g_star, out / "graph_star.tsv")
    f_before = objective(g, s, solver)
    f_after = f_before if budget == 0.0 else objective(g_star, s, solver)
    innate_total = polarization(s) + disagreement(g, s)
    _write_report(out, {
        "rho_eq": 1.0 - f_after.total / f_before.total,
        "rho_0": 1.0 - f_after.total / innate_total,
        "f_before": _objective_dict(f_before),
        "f_after": _objective_dict(f_after),
        "iterations": trace.iterations,
        "termination": trace.termination,
        "wall_time_s": elapsed,
        "config": {"eta": eta, "delta": cfg.delta, "budget": budget, "mode": mode,
                   "stepper": stepper, "max_iters": max_iters, "solver_tol": solver_tol,
                   "seed": seed},
    })
    logger.info("rebalanced in %d iterations (%s); wrote %s", trace.iterations,
                trace.termination, out)


def _write_trace(path, values, solver_iters, seconds=None):
    seconds = seconds or []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "f", "T1", "T2", "T3", "ms"])
        for i, f in enumerate(values):
            if i < len(solver_iters):
                t1, t2, t3 = solver_iters[i]
                ms = 1000.0 * seconds[i] if i < len(seconds) else ""
                writer.writerow([i + 1, f"{f:.17g}", t1, t2, t3, ms])
            else:  # the exit re-evaluation
                writer.writerow([i + 1, f"{f:.17g}", "", "", "", ""])


# ---- baseline ---------------------------------------------------------------


@main.command("baseline")
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--opinions", "opinions_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--opinions-are", type=click.Choice(["equilibrium", "innate"]),
              default="equilibrium", show_default=True)
@click.option("--undirected-input", is_flag=True)
@click.option("--kind", type=click.Choice(list(BASELINE_NAMES)), required=True)
@click.option("--baseline-subscript", type=click.Choice(["followee", "follower"]),
              default="followee", show_default=True)
@click.option("--epsilon", type=float, default=1e-6, show_default=True)
@click.option("--solver-tol", type=float, default=1e-10, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def cmd_baseline(graph_path, opinions_path, opinions_are, undirected_input, kind,
                 baseline_subscript, epsilon, solver_tol, out):
    """Apply one heuristic re-weighting; write graph_star.tsv and report.json."""
    out.mkdir(parents=True, exist_ok=True)
    g, s, solver = _load_instance(graph_path, opinions_path, opinions_are, undirected_input,
                                  "directed", solver_tol)
    tic = time.perf_counter()
    g_star = apply_baseline(g, s, BaselineKind(kind, epsilon, baseline_subscript))
    elapsed = time.perf_counter() - tic
    save_edge_list(g_star, out / "graph_star.tsv")
    f_before = objective(g, s, solver)
    f_after = objective(g_star, s, solver)
    innate_total = polarization(s) + disagreement(g, s)
    _write_report(out, {
        "rho_eq": 1.0 - f_after.total / f_before.total,
        "rho_0": 1.0 - f_after.total / innate_total,
        "f_before": _objective_dict(f_before),
        "f_after": _objective_dict(f_after),
        "iterations": 0,
        "wall_time_s": elapsed,
        "config": {"kind": kind, "epsilon": epsilon, "subscript": baseline_subscript},
    })
    logger.info("baseline %s written to %s", kind, out)


# ---- sweep -------------------------------------------------------------------


@main.command("sweep")
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--blocks", default="500,500", show_default=True)
@click.option("--intra", type=float, default=0.02, show_default=True)
@click.option("--beta-sbm-grid", default="0.002", show_default=True)
@click.option("--p-grid", default="5", show_default=True)
@click.option("--budget-grid", default="1.0", show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--methods", default=",".join(METHOD_NAMES), show_default=True)
@click.option("--opinions", "opinions_kind", type=click.Choice(["gaussian", "uniform"]),
              default="gaussian", show_default=True)
@click.option("--eta", type=float, default=0.2, show_default=True)
@click.option("--stepper", type=click.Choice(["adam", "plain"]), default="adam", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Sweep-cell parallelism; output order stays deterministic.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def cmd_sweep(n, blocks, intra, beta_sbm_grid, p_grid, budget_grid, seeds, methods,
              opinions_kind, eta, stepper, threads, out):
    """Cross the grids on SBM networks and write one long-format CSV."""
    spec = SweepSpec(
        n=n,
        block_sizes=_parse_list(blocks, int),
        intra_p=intra,
        beta_sbm_grid=_parse_list(beta_sbm_grid, float),
        p_grid=_parse_list(p_grid, float),
        budget_grid=_parse_list(budget_grid, float),
        seeds=_parse_list(seeds, int),
        methods=_parse_list(methods, str),
        distribution="gaussian_two_community" if opinions_kind == "gaussian" else "uniform",
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise click.UsageError(str(exc))
    rows = run_sweep(spec, OptimizerConfig(eta=eta, stepper=stepper), threads=max(1, threads))
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out)
    failed = sum(1 for r in rows if r.get("error"))
    logger.info("wrote %d rows to %s (%d failed cells)", len(rows), out, failed)
    if failed:
        raise click.ClickException(f"{failed} sweep rows carry errors; see the error column")


# ---- check -------------------------------------------------------------------


def _check_items():
    """The built-in verification battery; yields (name, callable)."""
    from .graph import from_dense

    def random_instance(seed, n=60, density=0.15):
        rng = np.random.default_rng(seed)
        dense = np.where(rng.random((n, n)) < density, rng.random((n, n)), 0.0)
        np.fill_diagonal(dense, 0.0)
        for i in range(n):
            if dense[i].sum() == 0:
                dense[i, (i + 1) % n] = 1.0
        dense /= dense.sum(axis=1, keepdims=True)
        s = rng.normal(size=n)
        s -= s.mean()
        return from_dense(dense), s, dense

    def check_counterexample():
        report = convexity_counterexample_check()
        return str(report)

    def check_solver_oracle():
        g, s, dense = random_instance(1)
        res = solve_shifted(g, False, s)
        expected = np.linalg.solve(2 * np.eye(g.n) - dense, s)
        err = np.linalg.norm(res.solution - expected) / np.linalg.norm(expected)
        assert err <= 1e-8, f"relative error {err:.2e}"
        return f"rel err {err:.2e} in T={res.iterations}"

    def check_projection():
        g, _, _ = random_instance(2)
        rng = np.random.default_rng(3)
        raw = rng.normal(size=g.m)
        proj = project_row_stochastic(raw, g)
        again = project_row_stochastic(proj.weights, g)
        dev = np.abs(np.asarray(proj.out_degrees) - 1.0).max()
        drift = np.abs(proj.weights - again.weights).max()
        assert dev <= 1e-12 and drift <= 1e-15, f"dev={dev:.2e} drift={drift:.2e}"
        return f"row-sum dev {dev:.2e}, idempotence drift {drift:.2e}"

    def check_sinkhorn():
        g = from_dense(np.array([[0.5, 0.5], [0.25, 0.75]]))
        ds = project_doubly_stochastic_sinkhorn(g.weights, g, tol=1e-12)
        a = np.sqrt(3.0) / (1.0 + np.sqrt(3.0))
        err = abs(ds.to_dense()[0, 0] - a)
        assert err <= 1e-6, f"limit error {err:.2e}"
        return f"2x2 limit error {err:.2e}"

    def check_decomposition():
        g, s, _ = random_instance(4)
        val = objective(g, s)
        gap = abs(val.total - (val.polarization + val.disagreement))
        assert gap <= 1e-10, f"gap {gap:.2e}"
        return f"f - (P + D) = {gap:.2e}"

    def check_quadratic_form():
        g, s, dense = random_instance(5)
        z = fj_equilibrium(g, s).z_star.values
        edge_sum = disagreement(g, z)
        din = np.diag(dense.sum(axis=0))
        quad = 0.5 * z @ (np.eye(g.n) + din - 2 * dense) @ z
        assert abs(edge_sum - quad) <= 1e-10, f"gap {abs(edge_sum - quad):.2e}"
        return f"edge sum vs quadratic form gap {abs(edge_sum - quad):.2e}"

    def check_round_trip():
        g, s, _ = random_instance(6)
        rng = np.random.default_rng(7)
        z = rng.normal(size=g.n)
        z -= z.mean()
        s_hat = infer_innate(g, z)
        z_back = fj_equilibrium(g, s_hat).z_star.values
        err = np.linalg.norm(z_back - z) / np.linalg.norm(z)
        assert err <= 1e-8, f"round-trip error {err:.2e}"
        return f"round-trip rel err {err:.2e}"

    def check_gradient_fd():
        g, s, dense = random_instance(8, n=12, density=0.3)
        grad = gradient(g, s)
        rows = np.asarray(g.edge_rows)

        def dense_f(A):
            n = A.shape[0]
            M = 2 * np.eye(n) - A
            minv = np.linalg.inv(M)
            din = np.diag(A.sum(axis=0))
            return float(s @ minv.T @ s + s @ minv.T @ ((din - np.eye(n)) / 2.0) @ minv @ s)

        h = 1e-6
        worst = 0.0
        for k in range(g.m):
            i, j = int(rows[k]), int(g.col_indices[k])
            up, down = dense.copy(), dense.copy()
            up[i, j] += h
            down[i, j] -= h
            fd = (dense_f(up) - dense_f(down)) / (2 * h)
            worst = max(worst, abs(grad.values[k] - fd) / max(abs(fd), 1e-12))
        assert worst <= 1e-5, f"max rel err {worst:.2e}"
        return f"finite-difference max rel err {worst:.2e}"

    return [
        ("non-convexity counterexample", check_counterexample),
        ("solver vs dense LU", check_solver_oracle),
        ("row-stochastic projection", check_projection),
        ("sinkhorn 2x2 analytic limit", check_sinkhorn),
        ("objective decomposition f = P + D", check_decomposition),
        ("disagreement quadratic form", check_quadratic_form),
        ("innate/equilibrium round trip", check_round_trip),
        ("gradient vs finite differences", check_gradient_fd),
    ]


@main.command("check")
def cmd_check():
    """Run the built-in verification battery; print pass/fail per item."""
    failures = []
    for name, fn in _check_items():
        try:
            detail = fn()
        except Exception as exc:  # noqa: BLE001 - report and continue
            click.echo(f"FAIL {name}: {exc}")
            failures.append(name)
            continue
        click.echo(f"PASS {name}: {detail}")
    if failures:
        raise click.ClickException("failed checks: " + ", ".join(failures))
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
