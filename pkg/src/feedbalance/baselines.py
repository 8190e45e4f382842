"""Heuristic re-weighting baselines: promote neutral, opposite-view, or
popular followees, then row-normalize."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .opinions import as_values
from .optimizer import project_row_stochastic

__all__ = ["BaselineKind", "apply_baseline", "BASELINE_NAMES"]

BASELINE_NAMES = ("neutral_view", "oppo_view", "pop")


@dataclass
class BaselineKind:
    """kind is one of neutral_view / oppo_view / pop; epsilon guards zero
    denominators and all-zero rows; subscript picks whether the weight is a
    property of the followee (content source, the default) or the
    follower."""

    kind: str
    epsilon: float = 1e-6
    subscript: str = "followee"

    def validate(self) -> None:
        if self.kind not in BASELINE_NAMES:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.subscript not in ("followee", "follower"):
            raise ValueError(f"subscript must be 'followee' or 'follower', got {self.subscript!r}")


def apply_baseline(g: Graph, s, kind: BaselineKind) -> Graph:
    """Re-weight each stored edge (i, j), i follows j, then l1-normalize rows.

    neutral_view: 1 / (|s_u| + eps); oppo_view: |s_i - s_j| + eps;
    pop: weighted in-degree of u plus eps. u is the followee j by default
    (see BaselineKind.subscript). Output zero pattern equals the input's.
    """
    kind.validate()
    s = as_values(s)
    if len(s) != g.n:
        raise ValueError(f"opinions have length {len(s)}, expected {g.n}")
    rows = np.asarray(g.edge_rows)
    cols = g.col_indices
    anchor = cols if kind.subscript == "followee" else rows
    if kind.kind == "neutral_view":
        raw = 1.0 / (np.abs(s[anchor]) + kind.epsilon)
    elif kind.kind == "oppo_view":
        raw = np.abs(s[rows] - s[cols]) + kind.epsilon
    else:  # pop
        raw = np.asarray(g.in_degrees)[anchor] + kind.epsilon
    return project_row_stochastic(raw, g)
