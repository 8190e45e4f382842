from __future__ import annotations

import itertools

import numpy as np
import pytest

from feedbalance.graph import (
    GeneratorConfig,
    Graph,
    GraphFormatError,
    degrees,
    from_coo,
    from_dense,
    generate,
    kernighan_lin_bisect,
    load_edge_list,
    row_normalize,
    save_edge_list,
    sbm_labels,
)

from conftest import random_row_stochastic_dense


# ---- construction and invariants ------------------------------------------


def test_rejects_negative_weights():
    with pytest.raises(ValueError, match="negative"):
        from_coo(2, [0], [1], [-1.0])


def test_rejects_duplicate_edges():
    with pytest.raises(ValueError, match="duplicate"):
        from_coo(3, [0, 0], [1, 1], [1.0, 2.0])


def test_columns_sorted_within_rows():
    g = from_coo(3, [0, 0, 1], [2, 1, 0], [1.0, 2.0, 3.0])
    assert g.col_indices.tolist() == [1, 2, 0]
    assert g.weights.tolist() == [2.0, 1.0, 3.0]


def test_arrays_are_immutable():
    g = from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        g.weights[0] = 5.0


def test_transpose_permutation_roundtrip():
    rng = np.random.default_rng(0)
    dense = random_row_stochastic_dense(rng, 12, 0.3)
    sym = np.maximum(dense, dense.T)  # symmetric pattern, asymmetric values
    g = from_dense(sym + dense)
    gt = g.transpose()
    p = np.asarray(g.transpose_permutation)
    # weight of A^T on this pattern's edge k is weights[p[k]]
    assert np.array_equal(gt.weights, g.weights[p])


# ---- I/O -------------------------------------------------------------------


def test_load_two_node_pair(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("0\t1\t1.0\n1\t0\t1.0\n")
    g = load_edge_list(f)
    assert (g.n, g.m) == (2, 2)


def test_load_default_weight(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("0\t1\n")
    g = load_edge_list(f)
    assert g.weights.tolist() == [1.0]


def test_load_negative_weight_rejected(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("0\t1\t-2\n")
    with pytest.raises(GraphFormatError, match="line 1"):
        load_edge_list(f)


def test_load_malformed_line_number(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("0\t1\t1.0\n# comment\nbroken line here extra\n")
    with pytest.raises(GraphFormatError, match="line 3"):
        load_edge_list(f)


def test_load_undirected_mirrors_edges(tmp_path):
    f = tmp_path / "g.tsv"
    f.write_text("0\t1\t0.5\n1\t2\t2.0\n")
    g = load_edge_list(f, directed=False)
    dense = g.to_dense()
    assert np.array_equal(dense, dense.T)
    assert g.m == 4


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    dense = random_row_stochastic_dense(rng, 17, 0.25)
    g = from_dense(dense)
    path = tmp_path / "g.tsv"
    save_edge_list(g, path)
    g2 = load_edge_list(path)
    assert g2.n == g.n and g2.m == g.m
    assert np.array_equal(g2.col_indices, g.col_indices)
    assert np.array_equal(g2.weights, g.weights)  # 17 significant digits round-trip


# ---- normalization and degrees ---------------------------------------------


def test_row_normalize_examples():
    g = from_coo(3, [0, 0, 1, 1], [1, 2, 0, 2], [2.0, 2.0, 1.0, 3.0])
    result = row_normalize(g)
    assert result.graph.weights.tolist() == [0.5, 0.5, 0.25, 0.75]
    assert result.empty_rows.tolist() == [2]


def test_row_normalize_bit_identical_when_stochastic():
    g = from_coo(2, [0, 1], [1, 0], [1.0, 1.0])
    normalized = row_normalize(g).graph
    assert np.array_equal(normalized.weights, g.weights)


def test_row_normalize_idempotent_and_pattern_preserving():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        dense = np.where(rng.random((n, n)) < 0.3, rng.random((n, n)) + 0.01, 0.0)
        g = from_dense(dense)
        if g.m == 0:
            continue
        once = row_normalize(g).graph
        twice = row_normalize(once).graph
        assert np.array_equal(once.col_indices, g.col_indices)
        assert np.abs(once.weights - twice.weights).max() <= 1e-15
        sums = np.asarray(once.out_degrees)
        nonempty = np.diff(once.row_offsets) > 0
        if nonempty.any():
            assert np.abs(sums[nonempty] - 1.0).max() <= 1e-12


def test_degrees_reciprocal_pair(two_node):
    assert degrees(two_node, "out").tolist() == [1.0, 1.0]
    assert degrees(two_node, "in").tolist() == [1.0, 1.0]


def test_degrees_star():
    g = from_coo(4, [0, 0, 0], [1, 2, 3], [1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(degrees(g, "out"), [1.0, 0, 0, 0])
    assert np.allclose(degrees(g, "in"), [0, 1 / 3, 1 / 3, 1 / 3])


def test_degrees_empty_graph():
    g = Graph(3, np.zeros(4, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))
    assert degrees(g, "out").tolist() == [0, 0, 0]
    assert degrees(g, "in").tolist() == [0, 0, 0]


# ---- generators --------------------------------------------------------------


def test_generate_seed_determinism_and_divergence():
    cfg = GeneratorConfig("erdos_renyi", 1000, seed=7, p=0.01)
    g1, g2 = generate(cfg), generate(cfg)
    assert np.array_equal(g1.col_indices, g2.col_indices)
    assert np.array_equal(g1.weights, g2.weights)
    g3 = generate(GeneratorConfig("erdos_renyi", 1000, seed=8, p=0.01))
    assert not (
        g1.m == g3.m and np.array_equal(g1.col_indices, g3.col_indices)
    )


def test_generate_rows_are_stochastic():
    for cfg in (
        GeneratorConfig("erdos_renyi", 200, seed=1, p=0.02),
        GeneratorConfig("barabasi_albert", 200, seed=1, attach=2),
        GeneratorConfig("sbm", 200, seed=1, block_sizes=(100, 100), intra_p=0.05, inter_p=0.01),
    ):
        g = generate(cfg)
        assert np.abs(np.asarray(g.out_degrees) - 1.0).max() <= 1e-12
        assert len(np.asarray(g.empty_rows)) == 0


def test_sbm_zero_inter_probability_has_no_cross_edges():
    cfg = GeneratorConfig("sbm", 100, seed=5, block_sizes=(50, 50), intra_p=0.3, inter_p=0.0)
    g = generate(cfg)
    labels = sbm_labels(cfg)
    rows = np.asarray(g.edge_rows)
    assert np.all(labels[rows] == labels[g.col_indices])


def test_sbm_edge_count_matches_binomial_expectation():
    cfg = GeneratorConfig("sbm", 1000, seed=9, block_sizes=(500, 500), intra_p=0.02, inter_p=0.002)
    g = generate(cfg)
    # ordered-pair binomial oracle
    intra_pairs = 2 * 500 * 499
    inter_pairs = 2 * 500 * 500
    expected = intra_pairs * 0.02 + inter_pairs * 0.002
    std = np.sqrt(intra_pairs * 0.02 * 0.98 + inter_pairs * 0.002 * 0.998)
    assert abs(g.m - expected) <= 5 * std + 10  # +10 covers isolated-row repairs


def test_generate_invalid_params():
    with pytest.raises(ValueError):
        generate(GeneratorConfig("erdos_renyi", 10, p=1.5))
    with pytest.raises(ValueError):
        generate(GeneratorConfig("sbm", 10, block_sizes=(4, 4), intra_p=0.1, inter_p=0.1))
    with pytest.raises(ValueError):
        generate(GeneratorConfig("no_such_model", 10))


def test_generate_no_self_loops():
    for model, extra in (
        ("erdos_renyi", dict(p=0.3)),
        ("sbm", dict(block_sizes=(25, 25), intra_p=0.3, inter_p=0.1)),
        ("barabasi_albert", dict(attach=3)),
    ):
        g = generate(GeneratorConfig(model, 50, seed=2, **extra))
        assert np.all(np.asarray(g.edge_rows) != g.col_indices)


# ---- Kernighan-Lin ------------------------------------------------------------


def _cut_weight(dense: np.ndarray, labels: np.ndarray) -> float:
    sym = np.maximum(dense, dense.T)
    cross = np.not_equal.outer(labels, labels)
    return float(np.sum(sym * cross) / 2.0)


def _two_cliques_dense() -> np.ndarray:
    dense = np.zeros((8, 8))
    for block in (range(4), range(4, 8)):
        for i, j in itertools.combinations(block, 2):
            dense[i, j] = dense[j, i] = 1.0
    dense[3, 4] = dense[4, 3] = 1.0  # the bridge
    return dense


def test_kl_two_cliques_matches_brute_force():
    dense = _two_cliques_dense()
    labels = kernighan_lin_bisect(from_dense(dense), seed=0)
    best = min(
        _cut_weight(dense, np.isin(np.arange(8), combo).astype(int))
        for combo in itertools.combinations(range(8), 4)
    )
    assert _cut_weight(dense, labels) == best == 1.0
    assert set(labels[:4]) != set(labels[4:])  # the parts are the cliques


def test_kl_balanced_sizes():
    for n in (9, 10, 31):
        rng = np.random.default_rng(n)
        dense = np.where(rng.random((n, n)) < 0.3, 1.0, 0.0)
        np.fill_diagonal(dense, 0)
        labels = kernighan_lin_bisect(from_dense(dense), seed=1)
        counts = np.bincount(labels, minlength=2)
        assert counts.min() >= 1
        assert abs(int(counts[0]) - int(counts[1])) <= 1


def test_kl_complete_graph_any_bisection():
    dense = 1.0 - np.eye(4)
    labels = kernighan_lin_bisect(from_dense(dense), seed=3)
    assert _cut_weight(dense, labels) == 4.0


def test_kl_deterministic():
    dense = _two_cliques_dense()
    a = kernighan_lin_bisect(from_dense(dense), seed=42)
    b = kernighan_lin_bisect(from_dense(dense), seed=42)
    assert np.array_equal(a, b)


def test_kl_no_improving_single_swap():
    rng = np.random.default_rng(17)
    n = 14
    dense = np.where(rng.random((n, n)) < 0.4, rng.random((n, n)), 0.0)
    np.fill_diagonal(dense, 0)
    labels = kernighan_lin_bisect(from_dense(dense), seed=5, max_passes=50)
    base = _cut_weight(dense, labels)
    for a in np.flatnonzero(labels == 0):
        for b in np.flatnonzero(labels == 1):
            swapped = labels.copy()
            swapped[a], swapped[b] = 1, 0
            assert _cut_weight(dense, swapped) >= base - 1e-12


def test_kl_rejects_single_node():
    with pytest.raises(ValueError):
        kernighan_lin_bisect(from_dense(np.zeros((1, 1))), seed=0)
