"""Sparse directed weighted graphs: CSR container, TSV I/O, normalization,
degree queries, synthetic generators, and Kernighan-Lin bisection.

The single canonical layout is CSR with strictly increasing column indices
inside each row; all numerical code in this package assumes it. Graphs are
immutable after construction (the backing arrays are marked read-only) and
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "GraphFormatError",
    "GeneratorConfig",
    "load_edge_list",
    "save_edge_list",
    "row_normalize",
    "RowNormalizeResult",
    "degrees",
    "generate",
    "sbm_labels",
    "kernighan_lin_bisect",
]


class GraphFormatError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Graph:
    """Immutable weighted directed graph in canonical CSR form.

    Attributes
    ----------
    n : int
        Node count; node ids are 0..n-1.
    row_offsets : ndarray, shape (n+1,), int64
        CSR row pointer.
    col_indices : ndarray, shape (m,), int64
        Column ids, strictly increasing within each row.
    weights : ndarray, shape (m,), float64
        Nonnegative edge weights. Exact zeros are only expected
        transiently (optimizer iterates before compaction).
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if row_offsets.shape != (self.n + 1,):
            raise ValueError("row_offsets must have length n+1")
        if row_offsets[0] != 0 or row_offsets[-1] != len(col_indices):
            raise ValueError("row_offsets must start at 0 and end at m")
        if np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(weights) != len(col_indices):
            raise ValueError("weights and col_indices must have equal length")
        if len(col_indices) and (col_indices.min() < 0 or col_indices.max() >= self.n):
            raise ValueError("column index out of range")
        if np.any(weights < 0):
            raise ValueError("negative edge weight")
        # strictly increasing columns inside each row
        if len(col_indices):
            inner = np.diff(col_indices)
            row_starts = row_offsets[1:-1]
            boundary = np.zeros(len(col_indices) - 1, dtype=bool)
            boundary[row_starts[(row_starts > 0) & (row_starts < len(col_indices))] - 1] = True
            if np.any((inner <= 0) & ~boundary):
                raise ValueError("column indices must be strictly increasing within rows")
        for arr, name in ((row_offsets, "row_offsets"), (col_indices, "col_indices"), (weights, "weights")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # ---- basic queries -------------------------------------------------

    @property
    def m(self) -> int:
        """Stored-edge count."""
        return len(self.col_indices)

    @cached_property
    def edge_rows(self) -> np.ndarray:
        """Row id of each stored edge (length m), aligned with col_indices."""
        counts = np.diff(self.row_offsets)
        out = np.repeat(np.arange(self.n, dtype=np.int64), counts)
        out.setflags(write=False)
        return out

    @cached_property
    def out_degrees(self) -> np.ndarray:
        out = np.bincount(self.edge_rows, weights=self.weights, minlength=self.n)
        out.setflags(write=False)
        return out

    @cached_property
    def in_degrees(self) -> np.ndarray:
        out = np.bincount(self.col_indices, weights=self.weights, minlength=self.n)
        out.setflags(write=False)
        return out

    @cached_property
    def empty_rows(self) -> np.ndarray:
        """Indices of nodes with no stored out-edges."""
        out = np.flatnonzero(np.diff(self.row_offsets) == 0)
        out.setflags(write=False)
        return out

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights, self.col_indices, self.row_offsets), shape=(self.n, self.n)
        )

    @cached_property
    def transpose_permutation(self) -> np.ndarray:
        """Permutation p such that edge k of the transpose CSR is edge p[k] here.

        For a symmetric zero pattern, ``weights[p]`` is the weight vector of
        A^T aligned to this graph's own edge layout.
        """
        # sort edges by (col, row): the CSR enumeration order of A^T
        out = np.lexsort((np.asarray(self.edge_rows), self.col_indices))
        out.setflags(write=False)
        return out

    def matvec(self, v: np.ndarray, transpose: bool = False) -> np.ndarray:
        """A @ v, or A.T @ v when transpose is set. O(n+m)."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.n},)")
        if transpose:
            return self._csr.T @ v
        return self._csr @ v

    def diagonal(self) -> np.ndarray:
        """Stored self-loop weights (zeros where absent)."""
        return self._csr.diagonal()

    # ---- derived graphs ------------------------------------------------

    def with_weights(self, weights: np.ndarray) -> "Graph":
        """Same zero pattern with new weights (length m)."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.m,):
            raise ValueError("weights must align with the stored-edge layout")
        return Graph(self.n, self.row_offsets, self.col_indices, weights)

    def transpose(self) -> "Graph":
        t = self._csr.T.tocsr()
        t.sort_indices()
        return Graph(self.n, t.indptr.astype(np.int64), t.indices.astype(np.int64), t.data)

    def compacted(self) -> "Graph":
        """Drop stored edges whose weight is exactly zero."""
        keep = self.weights != 0.0
        if keep.all():
            return self
        rows = np.asarray(self.edge_rows)[keep]
        counts = np.bincount(rows, minlength=self.n)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        return Graph(self.n, offsets, self.col_indices[keep], self.weights[keep])

    def to_dense(self) -> np.ndarray:
        """Dense adjacency matrix; intended for tiny instances and tests."""
        return self._csr.toarray()


def from_coo(n: int, rows: Sequence[int], cols: Sequence[int], weights: Sequence[float]) -> Graph:
    """Build a canonical Graph from unsorted edge triples.

    Duplicate (row, col) pairs are rejected: this package has no multigraph
    semantics.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if len(rows) and (rows.min() < 0 or rows.max() >= n):
        raise ValueError("row index out of range")
    order = np.lexsort((cols, rows))
    rows, cols, weights = rows[order], cols[order], weights[order]
    if len(rows) > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
        dup = np.flatnonzero((np.diff(rows) == 0) & (np.diff(cols) == 0))[0]
        raise ValueError(f"duplicate edge ({rows[dup]}, {cols[dup]})")
    counts = np.bincount(rows, minlength=n)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return Graph(n, offsets, cols, weights)


def from_dense(matrix: np.ndarray) -> Graph:
    """Graph from a dense adjacency matrix (zeros are non-edges)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("adjacency matrix must be square")
    rows, cols = np.nonzero(matrix)
    return from_coo(matrix.shape[0], rows, cols, matrix[rows, cols])


# ---- I/O ----------------------------------------------------------------


def load_edge_list(path, directed: bool = True) -> Graph:
    """Load a TSV edge list ``src<TAB>dst[<TAB>weight]``.

    Lines starting with ``#`` are skipped and the weight defaults to 1.0.
    With ``directed=False`` every line is stored as both (i, j) and (j, i)
    with equal weight (each undirected edge must be listed once).

    Raises
    ------
    GraphFormatError
        On malformed lines or negative weights, with the line number.
    """
    rows: list[int] = []
    cols: list[int] = []
    weights: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) == 1:  # tolerate space-separated dumps
                parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(lineno, f"expected 2 or 3 fields, got {len(parts)}")
            try:
                src, dst = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(lineno, f"node ids must be integers: {parts[:2]}") from None
            if src < 0 or dst < 0:
                raise GraphFormatError(lineno, "node ids must be nonnegative")
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(lineno, f"bad weight {parts[2]!r}") from None
            else:
                w = 1.0
            if not math.isfinite(w):
                raise GraphFormatError(lineno, f"non-finite weight {w}")
            if w < 0:
                raise GraphFormatError(lineno, f"negative weight {w}")
            rows.append(src)
            cols.append(dst)
            weights.append(w)
            if not directed and src != dst:
                rows.append(dst)
                cols.append(src)
                weights.append(w)
    n = max(max(rows, default=-1), max(cols, default=-1)) + 1
    return from_coo(n, rows, cols, weights)


def save_edge_list(g: Graph, path) -> None:
    """Write ``src<TAB>dst<TAB>weight`` with 17 significant digits."""
    rows = np.asarray(g.edge_rows)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in zip(rows, g.col_indices, g.weights):
            fh.write(f"{i}\t{j}\t{w:.17g}\n")


# ---- normalization and degrees ------------------------------------------


class RowNormalizeResult(NamedTuple):
    graph: Graph
    empty_rows: np.ndarray


def row_normalize(g: Graph) -> RowNormalizeResult:
    """Scale each nonempty row to sum 1; empty rows are left empty and reported.

    Idempotent and zero-pattern preserving.
    """
    sums = np.asarray(g.out_degrees)
    scale = np.ones(g.n)
    nonempty = sums > 0
    scale[nonempty] = 1.0 / sums[nonempty]
    new_weights = g.weights * scale[np.asarray(g.edge_rows)]
    return RowNormalizeResult(g.with_weights(new_weights), np.asarray(g.empty_rows))


def degrees(g: Graph, direction: str) -> np.ndarray:
    """Weighted degree vector: exact row sums ("out") or column sums ("in")."""
    if direction == "out":
        return np.asarray(g.out_degrees).copy()
    if direction == "in":
        return np.asarray(g.in_degrees).copy()
    raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")


# ---- generators ----------------------------------------------------------


@dataclass
class GeneratorConfig:
    """Parameters for the synthetic generators.

    model: "erdos_renyi" (directed G(n, p), needs ``p``),
    "barabasi_albert" (undirected preferential attachment materialized
    symmetrically, needs ``attach``), or "sbm" (directed planted blocks,
    needs ``block_sizes``, ``intra_p``, ``inter_p``).
    """

    model: str
    n: int
    seed: int = 0
    p: float | None = None
    attach: int | None = None
    block_sizes: tuple[int, ...] | None = None
    intra_p: float | None = None
    inter_p: float | None = None

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.model == "erdos_renyi":
            if self.p is None or not (0.0 <= self.p <= 1.0):
                raise ValueError("erdos_renyi requires edge probability p in [0, 1]")
        elif self.model == "barabasi_albert":
            if self.attach is None or self.attach < 1 or self.attach >= self.n:
                raise ValueError("barabasi_albert requires 1 <= attach < n")
        elif self.model == "sbm":
            if not self.block_sizes or sum(self.block_sizes) != self.n:
                raise ValueError("sbm block sizes must sum to n")
            if any(b <= 0 for b in self.block_sizes):
                raise ValueError("sbm block sizes must be positive")
            for prob, name in ((self.intra_p, "intra_p"), (self.inter_p, "inter_p")):
                if prob is None or not (0.0 <= prob <= 1.0):
                    raise ValueError(f"sbm requires {name} in [0, 1]")
        else:
            raise ValueError(f"unknown model {self.model!r}")


def sbm_labels(cfg: GeneratorConfig) -> np.ndarray:
    """Planted block label per node (nodes are ordered block by block)."""
    if cfg.model != "sbm":
        raise ValueError("labels are only defined for the sbm model")
    return np.repeat(np.arange(len(cfg.block_sizes)), cfg.block_sizes)


def _sample_row(rng: np.random.Generator, candidates: np.ndarray, p: float) -> np.ndarray:
    k = rng.binomial(len(candidates), p)
    if k == 0:
        return candidates[:0]
    return rng.choice(candidates, size=k, replace=False)


def generate(cfg: GeneratorConfig) -> Graph:
    """Sample a graph; deterministic for a fixed seed.

    Isolated rows receive one uniformly random out-edge, then the graph is
    row-normalized, so every returned graph is row-stochastic.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    if cfg.model == "erdos_renyi":
        rows_per_node: list[np.ndarray] = []
        ids = np.arange(n)
        for i in range(n):
            candidates = np.concatenate((ids[:i], ids[i + 1:]))
            rows_per_node.append(np.sort(_sample_row(rng, candidates, cfg.p)))
    elif cfg.model == "sbm":
        labels = sbm_labels(cfg)
        by_block = [np.flatnonzero(labels == b) for b in range(len(cfg.block_sizes))]
        rows_per_node = []
        for i in range(n):
            chosen = []
            for b, members in enumerate(by_block):
                candidates = members[members != i]
                prob = cfg.intra_p if labels[i] == b else cfg.inter_p
                chosen.append(_sample_row(rng, candidates, prob))
            rows_per_node.append(np.sort(np.concatenate(chosen)))
    else:  # barabasi_albert
        attach = cfg.attach
        targets = list(range(attach))
        repeated: list[int] = list(range(attach))  # seed nodes, degree-1 smoothing
        neighbors: list[set[int]] = [set() for _ in range(n)]
        for source in range(attach, n):
            chosen: set[int] = set()
            while len(chosen) < min(attach, source):
                pick = int(repeated[rng.integers(len(repeated))])
                chosen.add(pick)
            for t in chosen:
                neighbors[source].add(t)
                neighbors[t].add(source)
                repeated.extend((source, t))
        rows_per_node = [np.sort(np.fromiter(s, dtype=np.int64, count=len(s))) for s in neighbors]

    # repair isolated rows with one uniformly random out-edge
    for i in range(n):
        if len(rows_per_node[i]) == 0 and n > 1:
            j = int(rng.integers(n - 1))
            rows_per_node[i] = np.array([j if j < i else j + 1], dtype=np.int64)

    counts = np.array([len(r) for r in rows_per_node])
    offsets = np.concatenate(([0], np.cumsum(counts)))
    cols = np.concatenate(rows_per_node) if counts.sum() else np.empty(0, dtype=np.int64)
    g = Graph(n, offsets, cols.astype(np.int64), np.ones(len(cols)))
    return row_normalize(g).graph


# ---- Kernighan-Lin bisection ---------------------------------------------


def kernighan_lin_bisect(g: Graph, seed: int = 0, max_passes: int = 10) -> np.ndarray:
    """Balanced two-way partition minimizing cut weight, by Kernighan-Lin.

    The graph is symmetrized by elementwise max. Passes repeat until one
    yields no improvement (so no single pair swap can improve the returned
    cut) or max_passes is reached. Returns 0/1 labels; part sizes differ by
    at most one.
    """
    if g.n < 2:
        raise ValueError("bisection needs at least two nodes")
    n = g.n
    rows = np.asarray(g.edge_rows)
    # symmetrize by max: stack both orientations, take max over duplicates
    both_r = np.concatenate((rows, g.col_indices))
    both_c = np.concatenate((g.col_indices, rows))
    both_w = np.concatenate((g.weights, g.weights))
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for i, j, w in zip(both_r, both_c, both_w):
        if i == j:
            continue
        prev = adj[i].get(j)
        if prev is None or w > prev:
            adj[int(i)][int(j)] = float(w)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    side = np.zeros(n, dtype=np.int8)
    side[perm[n // 2:]] = 1

    def dvalues() -> np.ndarray:
        d = np.zeros(n)
        for i in range(n):
            for j, w in adj[i].items():
                d[i] += w if side[j] != side[i] else -w
        return d

    for _ in range(max_passes):
        d = dvalues()
        locked = np.zeros(n, dtype=bool)
        work = side.copy()
        gains: list[float] = []
        swaps: list[tuple[int, int]] = []
        n_pairs = min(int((work == 0).sum()), int((work == 1).sum()))
        for _ in range(n_pairs):
            # best unlocked pair, scanning in sorted-D order with cutoff
            zero_side = [i for i in np.argsort(-d, kind="stable") if not locked[i] and work[i] == 0]
            one_side = [i for i in np.argsort(-d, kind="stable") if not locked[i] and work[i] == 1]
            best = None
            best_gain = -np.inf
            for a in zero_side:
                if d[a] + d[one_side[0]] <= best_gain:
                    break
                for b in one_side:
                    bound = d[a] + d[b]
                    if bound <= best_gain:
                        break
                    gain = bound - 2.0 * adj[a].get(b, 0.0)
                    if gain > best_gain:
                        best_gain = gain
                        best = (a, b)
            a, b = best
            gains.append(best_gain)
            swaps.append((a, b))
            locked[a] = locked[b] = True
            work[a], work[b] = 1, 0
            for i, w in adj[a].items():
                if not locked[i]:
                    d[i] += 2.0 * w if work[i] == 0 else -2.0 * w
            for i, w in adj[b].items():
                if not locked[i]:
                    d[i] += 2.0 * w if work[i] == 1 else -2.0 * w
        if not gains:
            break
        cumulative = np.cumsum(gains)
        k = int(np.argmax(cumulative))
        if cumulative[k] <= 1e-12:
            break
        for a, b in swaps[: k + 1]:
            side[a], side[b] = 1, 0
    return side.astype(np.int64)
