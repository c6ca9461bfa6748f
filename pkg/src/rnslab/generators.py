"""Synthetic graphs with planted labels, Gaussian class features and splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, build_graph
from .seeding import rng_for

KINDS = ("barabasi_albert", "sbm", "erdos_renyi")


@dataclass(frozen=True)
class GenConfig:
    kind: str = "sbm"
    n: int = 100
    attach_degree: int = 2
    block_sizes: tuple = (50, 50)
    p_in: float = 0.1
    p_out: float = 0.01
    p: float = 0.05
    num_classes: int = 2
    feature_dim: int = 8
    feature_noise: float = 1.0
    split_fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"unknown generator kind {self.kind!r}")
        if self.n < 1:
            raise GraphError("n must be positive")
        validate_fractions(self.split_fractions)
        for name in ("p_in", "p_out", "p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GraphError(f"{name} must lie in [0, 1]")
        if self.attach_degree < 1:
            raise GraphError("attach_degree must be >= 1")
        if self.kind == "barabasi_albert" and self.n < self.attach_degree + 1:
            raise GraphError("n too small for attach_degree")
        if self.kind == "sbm" and sum(self.block_sizes) != self.n:
            raise GraphError("SBM block sizes must sum to n")
        if self.feature_dim < 1:
            raise GraphError("feature_dim must be >= 1")

    @property
    def classes(self) -> int:
        return len(self.block_sizes) if self.kind == "sbm" else self.num_classes


def validate_fractions(fractions) -> None:
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (3,) or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise GraphError(f"split fractions {tuple(fractions)} must be 3 nonnegative values summing to 1")


def split_sizes(n: int, fractions) -> np.ndarray:
    """Largest-remainder rounding of ``n * fractions``; ties go to the earlier tag."""
    validate_fractions(fractions)
    exact = n * np.asarray(fractions, dtype=float)
    sizes = np.floor(exact + 1e-9).astype(np.int64)
    rem = exact - sizes
    short = n - int(sizes.sum())
    order = sorted(range(3), key=lambda i: (-round(rem[i], 12), i))
    for i in order[:short]:
        sizes[i] += 1
    return sizes


def random_split(n: int, fractions, rng: np.random.Generator) -> np.ndarray:
    sizes = split_sizes(n, fractions)
    tags = np.repeat(np.arange(3, dtype=np.int8), sizes)
    split = np.empty(n, dtype=np.int8)
    split[rng.permutation(n)] = tags
    return split


def resplit(g: Graph, fractions, seed: int) -> Graph:
    return g.with_split(random_split(g.num_nodes, fractions, rng_for(seed, "split")))


def barabasi_albert_edges(n: int, attach: int, rng: np.random.Generator) -> np.ndarray:
    """Preferential attachment seeded with a clique on ``attach + 1`` nodes."""
    n0 = attach + 1
    edges = [(i, j) for i in range(n0) for j in range(i + 1, n0)]
    # every edge endpoint appears once per incident edge -> degree-proportional draws
    pool = np.empty(2 * (len(edges) + attach * (n - n0)), dtype=np.int64)
    size = 0
    for u, v in edges:
        pool[size], pool[size + 1] = u, v
        size += 2
    for new in range(n0, n):
        targets: list[int] = []
        while len(targets) < attach:
            for t in pool[rng.integers(0, size, 2 * attach)]:
                if t not in targets:
                    targets.append(int(t))
                    if len(targets) == attach:
                        break
        for t in targets:
            edges.append((t, new))
            pool[size], pool[size + 1] = t, new
            size += 2
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def _bernoulli_pairs(rows, cols, p, same_block, rng) -> np.ndarray:
    """Sample each pair (u in rows, v in cols) independently with prob ``p``."""
    if p <= 0:
        return np.empty((0, 2), dtype=np.int64)
    if same_block:
        k = rows.size
        total = k * (k - 1) // 2
    else:
        total = rows.size * cols.size
    count = rng.binomial(total, p)
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    idx = np.sort(rng.choice(total, size=count, replace=False))
    if same_block:
        # invert the row-major enumeration of the strict upper triangle
        k = rows.size
        i = (2 * k - 1 - np.sqrt((2 * k - 1) ** 2 - 8 * idx)) // 2
        i = i.astype(np.int64)
        i -= (i * (2 * k - i - 1) // 2 > idx).astype(np.int64)
        i += ((i + 1) * (2 * k - i - 2) // 2 <= idx).astype(np.int64)
        j = idx - i * (2 * k - i - 1) // 2 + i + 1
        return np.stack([rows[i], rows[j]], axis=1)
    return np.stack([rows[idx // cols.size], cols[idx % cols.size]], axis=1)


def sbm_edges(block_sizes, p_in, p_out, rng) -> np.ndarray:
    bounds = np.concatenate([[0], np.cumsum(block_sizes)]).astype(np.int64)
    blocks = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(block_sizes))]
    parts = []
    for a in range(len(blocks)):
        parts.append(_bernoulli_pairs(blocks[a], blocks[a], p_in, True, rng))
        for b in range(a + 1, len(blocks)):
            parts.append(_bernoulli_pairs(blocks[a], blocks[b], p_out, False, rng))
    return np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)


def class_features(labels, num_classes, dim, noise, rng) -> np.ndarray:
    means = rng.standard_normal((num_classes, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    return means[labels] + noise * rng.standard_normal((labels.size, dim))


def generate(cfg: GenConfig) -> Graph:
    """Generate a graph; identical ``cfg`` always gives an identical graph."""
    rng = rng_for(cfg.seed, "graph", cfg.kind)
    if cfg.kind == "barabasi_albert":
        edges = barabasi_albert_edges(cfg.n, cfg.attach_degree, rng)
        labels = rng.integers(0, cfg.num_classes, cfg.n)
    elif cfg.kind == "sbm":
        edges = sbm_edges(cfg.block_sizes, cfg.p_in, cfg.p_out, rng)
        labels = np.repeat(np.arange(len(cfg.block_sizes)), cfg.block_sizes)
    else:
        edges = sbm_edges([cfg.n], cfg.p, 0.0, rng)
        labels = rng.integers(0, cfg.num_classes, cfg.n)
    feats = class_features(labels, cfg.classes, cfg.feature_dim, cfg.feature_noise, rng)
    split = random_split(cfg.n, cfg.split_fractions, rng_for(cfg.seed, "split"))
    return build_graph(edges, feats, labels, split, num_nodes=cfg.n, num_classes=cfg.classes)
