"""Mini-batch samplers: RNS, ClusterGCN, GraphSAINT-RW, neighbor sampling, LADIES.

Every sampler yields :class:`~rnslab.graph.Batch` objects.  Randomness is
passed in explicitly as a ``numpy.random.Generator``; :class:`Sampler` wraps
the epoch functions with per-epoch streams derived from one seed so any epoch
can be regenerated on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .graph import Batch, Graph, induced_subgraph
from .seeding import rng_for

KINDS = ("rns", "cluster", "saint_rw", "neighbor", "ladies")


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "rns"
    num_parts: int = 4
    num_clusters: int = 16
    clusters_per_batch: int = 4
    walk_length: int = 4
    num_seeds: int = 32
    fanout: tuple = (10, 10)
    budgets: tuple = (64, 64)
    batch_size: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SamplerError(f"unknown sampler kind {self.kind!r}")
        if self.num_parts < 1:
            raise SamplerError("num_parts must be >= 1")
        if self.num_clusters < 1 or not 1 <= self.clusters_per_batch <= self.num_clusters:
            raise SamplerError("need 1 <= clusters_per_batch <= num_clusters")
        if self.walk_length < 1 or self.num_seeds < 1:
            raise SamplerError("walk_length and num_seeds must be >= 1")
        if min(self.fanout, default=0) < 1 or min(self.budgets, default=0) < 1:
            raise SamplerError("fanouts and budgets must be >= 1")
        if self.batch_size < 1:
            raise SamplerError("batch_size must be >= 1")

    @property
    def depth(self) -> int | None:
        if self.kind == "neighbor":
            return len(self.fanout)
        if self.kind == "ladies":
            return len(self.budgets)
        return None


# --------------------------------------------------------------------- RNS


def rns_blocks(num_nodes: int, m: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Node blocks pi[k*b:(k+1)*b] of a random permutation, b = N // m."""
    if m < 1:
        raise SamplerError("m must be >= 1")
    if m > num_nodes:
        raise SamplerError(f"m={m} exceeds number of nodes {num_nodes}")
    perm = rng.permutation(num_nodes)
    b = num_nodes // m
    return [perm[k * b : (k + 1) * b] for k in range(m)]


def rns_epoch(g: Graph, m: int, rng: np.random.Generator) -> Iterator[Batch]:
    for block in rns_blocks(g.num_nodes, m, rng):
        yield induced_subgraph(g, block, "rns")


# ----------------------------------------------------------------- cluster


def bfs_partition(g: Graph, num_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Balanced greedy BFS region growing; returns a cluster id per node.

    Cluster sizes follow an even split of N.  A region grows breadth-first
    over unassigned nodes from a random seed; when its frontier dies before
    the target size is met, growth restarts from another random unassigned
    node.
    """
    n = g.num_nodes
    if not 1 <= num_clusters <= n:
        raise SamplerError(f"need 1 <= num_clusters <= {n}")
    base, extra = divmod(n, num_clusters)
    targets = [base + (1 if c < extra else 0) for c in range(num_clusters)]
    assign = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    cursor = 0
    off, nbr = g.csr_offsets, g.csr_neighbors
    for c, target in enumerate(targets):
        size = 0
        queue: list[int] = []
        head = 0
        while size < target:
            if head == len(queue):
                while assign[order[cursor]] >= 0:
                    cursor += 1
                start = int(order[cursor])
                assign[start] = c
                size += 1
                queue.append(start)
                continue
            v = queue[head]
            head += 1
            for u in nbr[off[v] : off[v + 1]]:
                if size == target:
                    break
                if assign[u] < 0:
                    assign[u] = c
                    size += 1
                    queue.append(int(u))
    return assign


def cluster_epoch(
    g: Graph,
    assign: np.ndarray,
    clusters_per_batch: int,
    rng: np.random.Generator,
) -> Iterator[Batch]:
    """floor(C / Bc) batches, each the union of Bc clusters drawn without replacement."""
    num_clusters = int(assign.max()) + 1
    if clusters_per_batch > num_clusters:
        raise SamplerError("clusters_per_batch exceeds number of clusters")
    members = np.argsort(assign, kind="stable")
    bounds = np.searchsorted(assign[members], np.arange(num_clusters + 1))
    order = rng.permutation(num_clusters)
    for s in range(num_clusters // clusters_per_batch):
        chosen = order[s * clusters_per_batch : (s + 1) * clusters_per_batch]
        nodes = np.concatenate([members[bounds[c] : bounds[c + 1]] for c in chosen])
        yield induced_subgraph(g, nodes, "cluster")


# ------------------------------------------------------------------- SAINT


def saint_steps_per_epoch(num_nodes: int, walk_length: int, num_seeds: int) -> int:
    return max(1, num_nodes // (num_seeds * walk_length))


def random_walk_nodes(g: Graph, seeds: np.ndarray, walk_length: int, rng) -> np.ndarray:
    """Union of nodes visited by one simple random walk per seed.

    A walk that reaches a node without neighbors stays there.
    """
    deg = g.degrees
    cur = np.asarray(seeds, dtype=np.int64)
    visited = [cur]
    for _ in range(walk_length):
        d = deg[cur]
        move = d > 0
        pick = np.floor(rng.random(cur.size) * np.maximum(d, 1)).astype(np.int64)
        nxt = cur.copy()
        nxt[move] = g.csr_neighbors[g.csr_offsets[cur[move]] + pick[move]]
        cur = nxt
        visited.append(cur)
    return np.unique(np.concatenate(visited))


def saint_rw_epoch(g: Graph, walk_length: int, num_seeds: int, rng) -> Iterator[Batch]:
    if walk_length < 1:
        raise SamplerError("walk_length must be >= 1")
    s = min(num_seeds, g.num_nodes)
    for _ in range(saint_steps_per_epoch(g.num_nodes, walk_length, num_seeds)):
        seeds = rng.choice(g.num_nodes, size=s, replace=False)
        yield induced_subgraph(g, random_walk_nodes(g, seeds, walk_length, rng), "saint_rw")


# ---------------------------------------------------------------- neighbor


def _segment_sample(g: Graph, nodes: np.ndarray, fanout: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """For each node draw min(fanout, deg) distinct neighbors uniformly.

    Returns (receiver, sender) global id arrays.
    """
    starts = g.csr_offsets[nodes]
    lens = g.csr_offsets[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    seg = np.repeat(np.arange(nodes.size), lens)
    row_start = np.cumsum(lens) - lens
    gather = np.repeat(starts - row_start, lens) + np.arange(total)
    keys = rng.random(total)
    order = np.lexsort((keys, seg))
    rank = np.arange(total) - np.repeat(row_start, lens)
    chosen = order[rank < fanout]
    return nodes[seg[chosen]], g.csr_neighbors[gather[chosen]]


def _layered_batch(g, node_ids, targets_global, layer_edges, tag, weights=None) -> Batch:
    ids = np.unique(node_ids)
    n = ids.size
    layers, wts = [], []
    for k, (recv, send) in enumerate(layer_edges):
        r = np.searchsorted(ids, recv)
        c = np.searchsorted(ids, send)
        layers.append(sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n)))
        if weights is not None:
            wts.append(sp.csr_matrix((weights[k], (r, c)), shape=(n, n)))
    return Batch(
        global_ids=ids,
        features=g.features[ids],
        labels=g.labels[ids],
        train_targets=np.searchsorted(ids, np.sort(targets_global)),
        sampler_tag=tag,
        layers=tuple(layers),
        layer_weights=tuple(wts) if weights is not None else None,
    )


def neighbor_batch(g: Graph, seeds: np.ndarray, fanout, rng) -> Batch:
    """Layered batch; hop h uses ``fanout[h-1]`` and feeds GNN layer L-h."""
    seeds = np.asarray(seeds, dtype=np.int64)
    reached = np.unique(seeds)
    hops = []
    for f in fanout:
        recv, send = _segment_sample(g, reached, int(f), rng)
        hops.append((recv, send))
        reached = np.union1d(reached, send)
    return _layered_batch(g, reached, seeds, hops[::-1], "neighbor")


def neighbor_epoch(g: Graph, fanout, batch_size: int, rng) -> Iterator[Batch]:
    seeds = rng.permutation(g.train_nodes)
    for s in range(0, seeds.size, batch_size):
        yield neighbor_batch(g, seeds[s : s + batch_size], fanout, rng)


# ------------------------------------------------------------------ LADIES


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """D^-1/2 (A + I) D^-1/2 over the full graph (cached)."""
    if "norm_adj" not in g._cache:
        a = g.adjacency() + sp.identity(g.num_nodes, format="csr")
        d = np.asarray(a.sum(axis=1)).ravel() ** -0.5
        g._cache["norm_adj"] = sp.csr_matrix(sp.diags(d) @ a @ sp.diags(d))
    return g._cache["norm_adj"]


def ladies_importance(norm_adj: sp.csr_matrix, upper: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """q_i = ||A[upper, i]||^2 for each candidate i (A symmetric)."""
    sub = norm_adj[upper][:, candidates]
    return np.asarray(sub.multiply(sub).sum(axis=0)).ravel()


def ladies_batch(g: Graph, targets: np.ndarray, budgets, rng) -> Batch:
    """Layer-wise importance sampling from the top layer down.

    For each layer the candidate pool is the one-hop neighborhood of the
    current node set (excluding the set itself).  ``s_l`` candidates are drawn
    without replacement with p_i proportional to q_i and their edges are
    reweighted by 1 / (s_l p_i); if the pool fits in the budget every
    candidate is kept with its plain normalised weight.  Edges into the upper
    set itself (self-loops included) are always kept with plain weights.
    """
    a = normalized_adjacency(g)
    upper = np.unique(np.asarray(targets, dtype=np.int64))
    all_nodes = [upper]
    layer_edges, layer_wts = [], []
    for s in budgets:
        rows = a[upper]
        pool = np.setdiff1d(np.unique(rows.indices), upper)
        if pool.size == 0:
            chosen, scale = np.empty(0, np.int64), np.empty(0)
        elif pool.size <= s:
            chosen, scale = pool, np.ones(pool.size)
        else:
            q = ladies_importance(a, upper, pool)
            p = q / q.sum()
            pick = rng.choice(pool.size, size=int(s), replace=False, p=p)
            chosen, scale = pool[pick], 1.0 / (s * p[pick])
        lower = np.union1d(upper, chosen)
        # upper nodes are always present (inclusion probability 1): plain weights
        cols = np.concatenate([chosen, upper])
        col_scale = np.concatenate([scale, np.ones(upper.size)])
        sub = a[upper][:, cols].tocoo()
        layer_edges.append((upper[sub.row], cols[sub.col]))
        layer_wts.append(sub.data * col_scale[sub.col])
        all_nodes.append(lower)
        upper = lower
    return _layered_batch(
        g,
        np.concatenate(all_nodes),
        targets,
        layer_edges[::-1],
        "ladies",
        weights=layer_wts[::-1],
    )


def ladies_epoch(g: Graph, budgets, batch_size: int, rng) -> Iterator[Batch]:
    seeds = rng.permutation(g.train_nodes)
    for s in range(0, seeds.size, batch_size):
        yield ladies_batch(g, seeds[s : s + batch_size], budgets, rng)


# ----------------------------------------------------------------- wrapper


class Sampler:
    """Seeded batch stream over a fixed graph.

    ``epoch(e)`` depends only on (graph, config, seed, e).
    """

    def __init__(self, g: Graph, cfg: SamplerConfig, seed: int = 0):
        self.g = g
        self.cfg = cfg
        self.seed = seed
        self._assign = None
        if cfg.kind == "cluster":
            if cfg.num_clusters > g.num_nodes:
                raise SamplerError("num_clusters exceeds number of nodes")
            self._assign = bfs_partition(g, cfg.num_clusters, rng_for(seed, "sampler", "partition"))
        if cfg.kind == "rns" and cfg.num_parts > g.num_nodes:
            raise SamplerError("num_parts exceeds number of nodes")

    @property
    def clusters(self) -> np.ndarray | None:
        return self._assign

    @property
    def steps_per_epoch(self) -> int:
        c, n = self.cfg, self.g.num_nodes
        if c.kind == "rns":
            return c.num_parts
        if c.kind == "cluster":
            return c.num_clusters // c.clusters_per_batch
        if c.kind == "saint_rw":
            return saint_steps_per_epoch(n, c.walk_length, c.num_seeds)
        return math.ceil(self.g.train_nodes.size / c.batch_size)

    def epoch(self, e: int) -> list[Batch]:
        c = self.cfg
        rng = rng_for(self.seed, "sampler", c.kind, e)
        if c.kind == "rns":
            it = rns_epoch(self.g, c.num_parts, rng)
        elif c.kind == "cluster":
            it = cluster_epoch(self.g, self._assign, c.clusters_per_batch, rng)
        elif c.kind == "saint_rw":
            it = saint_rw_epoch(self.g, c.walk_length, c.num_seeds, rng)
        elif c.kind == "neighbor":
            it = neighbor_epoch(self.g, c.fanout, c.batch_size, rng)
        else:
            it = ladies_epoch(self.g, c.budgets, c.batch_size, rng)
        return list(it)

    def batches(self, count: int, start_epoch: int = 0) -> list[Batch]:
        """First ``count`` batches across consecutive epochs."""
        out: list[Batch] = []
        e = start_epoch
        while len(out) < count:
            plan = self.epoch(e)
            if not plan:
                raise SamplerError("sampler produced an empty epoch")
            out.extend(plan[: count - len(out)])
            e += 1
        return out


def check_depth(cfg: SamplerConfig, depth: int) -> None:
    if cfg.depth is not None and cfg.depth != depth:
        raise SamplerError(f"{cfg.kind} sampler has {cfg.depth} layers but model depth is {depth}")

