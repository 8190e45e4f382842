"""Opinion vectors: mean-centering, synthetic generation with a controllable
polarization level, innate-opinion inference, and file I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph

__all__ = [
    "OpinionVector",
    "OpinionGenConfig",
    "mean_center",
    "generate_uniform",
    "generate_gaussian_two_community",
    "generate_opinions",
    "infer_innate",
    "load_opinions",
    "save_opinions",
]


@dataclass(frozen=True)
class OpinionVector:
    """Length-n real opinion vector with mean-centering metadata."""

    values: np.ndarray
    centered: bool = False
    removed_mean: float = 0.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("opinions must be a 1-d vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def as_values(v) -> np.ndarray:
    """Accept an OpinionVector or a plain array-like."""
    if isinstance(v, OpinionVector):
        return v.values
    return np.ascontiguousarray(v, dtype=np.float64)


def mean_center(v) -> OpinionVector:
    """Subtract the mean; the subtracted offset is kept in removed_mean."""
    values = as_values(v)
    mean = float(values.mean()) if len(values) else 0.0
    return OpinionVector(values - mean, centered=True, removed_mean=mean)


@dataclass
class OpinionGenConfig:
    """How to sample synthetic (equilibrium) opinions.

    distribution "uniform" rescales Uniform[-0.5, 0.5] samples by
    sign(u)|u|^(1/p); "gaussian_two_community" draws community c from
    Normal((2c-1) * p * mean_scale, std) and needs 0/1 labels.
    """

    distribution: str
    polarization: float
    seed: int = 0
    labels: np.ndarray | None = None
    mean_scale: float = 0.05
    std: float = 0.1

    def validate(self) -> None:
        if self.polarization <= 0:
            raise ValueError("polarization parameter must be positive")
        if self.distribution == "gaussian_two_community":
            if self.labels is None:
                raise ValueError("gaussian_two_community requires community labels")
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be a 0/1 vector")
        elif self.distribution != "uniform":
            raise ValueError(f"unknown distribution {self.distribution!r}")


def generate_uniform(n: int, p: float, seed: int = 0) -> OpinionVector:
    """Uniform[-0.5, 0.5] samples, bimodality-rescaled, then mean-centered.

    The rescale sign(u)|u|^(1/p) pushes mass toward +-0.5 for p > 1 and is
    the identity for p = 1.
    """
    if p <= 0:
        raise ValueError("polarization parameter must be positive")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-0.5, 0.5, size=n)
    rescaled = np.sign(raw) * np.abs(raw) ** (1.0 / p)
    return mean_center(rescaled)


def generate_gaussian_two_community(
    labels, p: float, seed: int = 0, mean_scale: float = 0.05, std: float = 0.1
) -> OpinionVector:
    """Two-community Gaussian opinions with mean separation 2 * p * mean_scale.

    Values are clamped to [-1, 1] before centering, mirroring the bounded
    scores of the real-data pipeline.
    """
    if labels is None:
        raise ValueError("community labels are required")
    labels = np.asarray(labels)
    if p <= 0:
        raise ValueError("polarization parameter must be positive")
    if labels.ndim != 1 or not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be a 0/1 vector")
    rng = np.random.default_rng(seed)
    means = np.where(labels == 1, p * mean_scale, -p * mean_scale)
    raw = rng.normal(means, std)
    return mean_center(np.clip(raw, -1.0, 1.0))


def generate_opinions(cfg: OpinionGenConfig, n: int) -> OpinionVector:
    cfg.validate()
    if cfg.distribution == "uniform":
        return generate_uniform(n, cfg.polarization, cfg.seed)
    labels = np.asarray(cfg.labels)
    if len(labels) != n:
        raise ValueError(f"labels have length {len(labels)}, expected {n}")
    return generate_gaussian_two_community(
        labels, cfg.polarization, cfg.seed, cfg.mean_scale, cfg.std
    )


def infer_innate(g: Graph, z) -> OpinionVector:
    """Invert the equilibrium map: s = (2I - A) z on nonempty rows.

    Rows without out-edges hold s_i = z_i (such users only ever express
    their innate opinion). One sparse product, exact, O(n + m); feeding the
    result back through fj_equilibrium recovers z to solver tolerance.
    """
    z = as_values(z)
    if z.shape != (g.n,):
        raise ValueError(f"opinions have length {len(z)}, expected {g.n}")
    s = 2.0 * z - g.matvec(z)
    empty = np.asarray(g.empty_rows)
    if len(empty):
        s[empty] = z[empty]
    return OpinionVector(s, centered=False, removed_mean=0.0)


def load_opinions(path) -> OpinionVector:
    """One value per line, or auto-detected ``node<TAB>value`` pairs."""
    plain: list[float] = []
    pairs: list[tuple[int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if len(parts) == 1:
                    plain.append(float(parts[0]))
                elif len(parts) == 2:
                    pairs.append((int(parts[0]), float(parts[1])))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {lineno}: bad opinion record {line!r}") from None
    if plain and pairs:
        raise ValueError("mixed plain and node<TAB>value opinion records")
    if pairs:
        n = max(i for i, _ in pairs) + 1
        values = np.zeros(n)
        seen = np.zeros(n, dtype=bool)
        for i, v in pairs:
            if i < 0 or seen[i]:
                raise ValueError(f"bad or duplicate node id {i}")
            values[i] = v
            seen[i] = True
        if not seen.all():
            raise ValueError("node<TAB>value records must cover 0..n-1")
        return OpinionVector(values)
    return OpinionVector(np.asarray(plain, dtype=np.float64))


def save_opinions(v, path) -> None:
    values = as_values(v)
    with open(path, "w", encoding="utf-8") as fh:
        for x in values:
            fh.write(f"{x:.17g}\n")
