"""Immutable CSR graphs, induced subgraphs and structural statistics."""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

TRAIN, VAL, TEST = 0, 1, 2
SPLIT_NAMES = {"train": TRAIN, "val": VAL, "test": TEST}


class GraphError(ValueError):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, lineno: int, line: str):
        super().__init__(f"line {lineno}: cannot parse edge {line!r}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph in CSR form with node features, labels and split tags.

    Each undirected edge is stored twice (once per endpoint); neighbor lists
    are sorted ascending and never contain the node itself.
    """

    num_nodes: int
    csr_offsets: np.ndarray
    csr_neighbors: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    num_classes: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge counted once)."""
        return int(self.csr_neighbors.size // 2)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def neighbors(self, v: int) -> np.ndarray:
        return self.csr_neighbors[self.csr_offsets[v] : self.csr_offsets[v + 1]]

    def nodes_with_split(self, tag: int | str) -> np.ndarray:
        if isinstance(tag, str):
            tag = SPLIT_NAMES[tag]
        return np.flatnonzero(self.split == tag)

    @property
    def train_nodes(self) -> np.ndarray:
        return self.nodes_with_split(TRAIN)

    def edge_array(self) -> np.ndarray:
        """(E, 2) array of undirected edges with u < v, in CSR order."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = src < self.csr_neighbors
        return np.stack([src[keep], self.csr_neighbors[keep]], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        if "adj" not in self._cache:
            data = np.ones(self.csr_neighbors.size)
            self._cache["adj"] = sp.csr_matrix(
                (data, self.csr_neighbors, self.csr_offsets),
                shape=(self.num_nodes, self.num_nodes),
            )
        return self._cache["adj"]

    def with_split(self, split: np.ndarray) -> "Graph":
        return Graph(
            self.num_nodes,
            self.csr_offsets,
            self.csr_neighbors,
            self.features,
            self.labels,
            np.asarray(split, dtype=np.int8),
            self.num_classes,
        )


def _csr_from_pairs(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = u != v
    u, v = u[keep], v[keep]
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    if src.size:
        key = np.unique(src.astype(np.int64) * n + dst)
        src, dst = key // n, key % n
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    np.cumsum(offsets, out=offsets)
    return offsets, dst.astype(np.int64)


def build_graph(
    edge_list,
    features,
    labels,
    split,
    num_nodes: int | None = None,
    num_classes: int | None = None,
) -> Graph:
    """Build a symmetric, deduplicated CSR graph without self-loops.

    ``split`` accepts integer codes (0 train, 1 val, 2 test) or the strings
    ``"train"``/``"val"``/``"test"``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise GraphError("features must be a 2-d matrix")
    n = features.shape[0] if num_nodes is None else int(num_nodes)
    if features.shape[0] != n:
        raise GraphError(f"features has {features.shape[0]} rows, expected {n}")

    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise GraphError(f"edge endpoint out of range [0, {n})")

    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise GraphError(f"labels must have length {n}")
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if n else 0
    if n and (labels.min() < 0 or labels.max() >= num_classes):
        raise GraphError(f"label outside [0, {num_classes})")

    split_arr = np.asarray(split)
    if split_arr.dtype.kind in "US":
        try:
            split_arr = np.array([SPLIT_NAMES[s] for s in split_arr])
        except KeyError as exc:
            raise GraphError(f"unknown split tag {exc.args[0]!r}") from None
    split_arr = split_arr.astype(np.int8)
    if split_arr.shape != (n,) or (n and (split_arr.min() < 0 or split_arr.max() > 2)):
        raise GraphError("split must be one tag in {train, val, test} per node")

    offsets, neighbors = _csr_from_pairs(n, edges[:, 0], edges[:, 1])
    return Graph(n, offsets, neighbors, features, labels, split_arr, int(num_classes))


@dataclass(frozen=True, eq=False)
class Batch:
    """A sampled mini-batch.

    Induced mode carries ``graph``, the relabelled induced subgraph over
    ``global_ids`` (sorted ascending).  Layered mode carries ``layers``, one
    directed ``n x n`` sparse matrix per GNN layer (row = receiving node,
    column = sending node, all in local coordinates), applied in order
    ``layers[0]`` first; ``layer_weights`` optionally overrides the GCN
    normalisation with precomputed edge weights.
    """

    global_ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_targets: np.ndarray
    sampler_tag: str
    graph: Graph | None = None
    layers: tuple | None = None
    layer_weights: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return int(self.global_ids.size)

    @property
    def is_induced(self) -> bool:
        return self.graph is not None

    def to_local(self, global_nodes) -> np.ndarray:
        local = np.searchsorted(self.global_ids, global_nodes)
        if np.any(self.global_ids[np.minimum(local, self.num_nodes - 1)] != global_nodes):
            raise KeyError("node not in batch")
        return local

    def num_message_edges(self) -> int:
        """Directed message edges processed by one layer (summed over layers)."""
        if self.graph is not None:
            return int(self.graph.csr_neighbors.size)
        return int(sum(layer.nnz for layer in self.layers))

    def structure_graph(self) -> Graph:
        """Undirected view of the batch structure (union of sampled layers)."""
        if self.graph is not None:
            return self.graph
        if "structure" not in self._cache:
            union = sum(self.layers[1:], self.layers[0]).tocoo()
            self._cache["structure"] = build_graph(
                np.stack([union.row, union.col], axis=1),
                np.zeros((self.num_nodes, 0)),
                self.labels,
                np.zeros(self.num_nodes, dtype=np.int8),
                num_classes=int(self.labels.max()) + 1 if self.num_nodes else 0,
            )
        return self._cache["structure"]


def full_batch(g: Graph) -> Batch:
    """Whole graph wrapped as an induced batch, targets = training nodes."""
    if "full_batch" not in g._cache:
        g._cache["full_batch"] = Batch(
            global_ids=np.arange(g.num_nodes),
            features=g.features,
            labels=g.labels,
            train_targets=g.train_nodes,
            sampler_tag="full",
            graph=g,
        )
    return g._cache["full_batch"]


def induced_subgraph(g: Graph, nodes, sampler_tag: str = "induced") -> Batch:
    """Induced-mode batch over ``nodes``; local ids follow ascending global id."""
    nodes = np.asarray(nodes, dtype=np.int64).ravel()
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.num_nodes):
        raise GraphError("node index out of range")
    ids = np.sort(nodes)
    if ids.size > 1 and np.any(ids[1:] == ids[:-1]):
        raise GraphError("duplicate node in node set")

    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[ids] = np.arange(ids.size)
    starts = g.csr_offsets[ids]
    lens = g.csr_offsets[ids + 1] - starts
    total = int(lens.sum())
    row_start = np.cumsum(lens) - lens
    gather = np.repeat(starts - row_start, lens) + np.arange(total)
    rows = np.repeat(np.arange(ids.size), lens)
    cols = local[g.csr_neighbors[gather]]
    keep = cols >= 0
    rows, cols = rows[keep], cols[keep]
    offsets = np.zeros(ids.size + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=ids.size), out=offsets[1:])

    sub = Graph(
        int(ids.size),
        offsets,
        cols,
        g.features[ids],
        g.labels[ids],
        g.split[ids],
        g.num_classes,
    )
    return Batch(
        global_ids=ids,
        features=sub.features,
        labels=sub.labels,
        train_targets=np.flatnonzero(sub.split == TRAIN),
        sampler_tag=sampler_tag,
        graph=sub,
    )


def _as_graph(g_or_batch) -> Graph:
    if isinstance(g_or_batch, Batch):
        return g_or_batch.structure_graph()
    return g_or_batch


def degree_histogram(g_or_batch) -> dict[int, int]:
    g = _as_graph(g_or_batch)
    counts = Counter(g.degrees.tolist())
    return dict(sorted(counts.items()))


# ---------------------------------------------------------------- BFS / stats


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; -1 marks unreachable nodes."""
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source])
    level = 0
    off, nbr = g.csr_offsets, g.csr_neighbors
    while frontier.size:
        level += 1
        starts = off[frontier]
        lens = off[frontier + 1] - starts
        total = int(lens.sum())
        if total == 0:
            break
        row_start = np.cumsum(lens) - lens
        cand = nbr[np.repeat(starts - row_start, lens) + np.arange(total)]
        cand = np.unique(cand[dist[cand] < 0])
        dist[cand] = level
        frontier = cand
    return dist


def connected_components(g: Graph) -> tuple[int, np.ndarray]:
    return sp.csgraph.connected_components(g.adjacency(), directed=False)


def exact_distance_stats(g: Graph) -> tuple[int, float]:
    """Exact (diameter, mean same-component distance) by all-pairs BFS."""
    if g.num_nodes > 2000:
        raise GraphError("exact distances limited to graphs with at most 2000 nodes")
    diameter, total, pairs = 0, 0, 0
    for s in range(g.num_nodes):
        d = bfs_distances(g, s)
        reach = d[d > 0]
        if reach.size:
            diameter = max(diameter, int(reach.max()))
            total += int(reach.sum())
            pairs += reach.size
    return diameter, (total / pairs if pairs else 0.0)


@dataclass(frozen=True)
class StructuralStats:
    num_nodes: int
    num_edges: int
    avg_degree: float
    num_isolated: int
    num_components: int
    diameter_lower_bound: int
    avg_distance_estimate: float
    edge_homophily: float

    def as_row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


def edge_homophily(g: Graph) -> float:
    e = g.edge_array()
    if e.shape[0] == 0:
        return 0.0
    return float(np.mean(g.labels[e[:, 0]] == g.labels[e[:, 1]]))


def structural_stats(g_or_batch, bfs_samples: int = 4, rng_seed: int = 0) -> StructuralStats:
    """Degree, component, distance and homophily summary.

    Distances are estimated with multi-sweep BFS: each sweep starts at a
    random node of a non-trivial component, jumps to the farthest node found
    and repeats ``bfs_samples`` times; the largest eccentricity seen is the
    diameter lower bound and the mean over all BFS trees gives the average
    same-component distance.
    """
    if bfs_samples < 1:
        raise GraphError("bfs_samples must be >= 1")
    g = _as_graph(g_or_batch)
    if g.num_nodes == 0:
        raise GraphError("empty graph")
    rng = np.random.default_rng(rng_seed)
    deg = g.degrees
    ncomp, _ = connected_components(g)

    diameter, dist_sum, dist_count = 0, 0, 0
    candidates = np.flatnonzero(deg > 0)
    if candidates.size:
        source = int(rng.choice(candidates))
        for _ in range(bfs_samples):
            d = bfs_distances(g, source)
            reach = d[d > 0]
            ecc = int(reach.max())
            diameter = max(diameter, ecc)
            dist_sum += int(reach.sum())
            dist_count += reach.size
            farthest = np.flatnonzero(d == ecc)
            source = int(farthest[rng.integers(farthest.size)])

    return StructuralStats(
        num_nodes=g.num_nodes,
        num_edges=g.num_edges,
        avg_degree=2.0 * g.num_edges / g.num_nodes,
        num_isolated=int(np.sum(deg == 0)),
        num_components=int(ncomp),
        diameter_lower_bound=diameter,
        avg_distance_estimate=dist_sum / dist_count if dist_count else 0.0,
        edge_homophily=edge_homophily(g),
    )


# ---------------------------------------------------------------------- IO

_SPLIT_RE = re.compile(r"[,\s]+")
STATS_CSV_HEADER = [
    "name",
    "num_nodes",
    "num_edges",
    "avg_degree",
    "num_isolated",
    "num_components",
    "diameter_lb",
    "avg_dist",
    "homophily",
]


def parse_edge_list(text: str) -> list[tuple[int, int]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in _SPLIT_RE.split(line) if p]
        if len(parts) != 2:
            raise EdgeListParseError(lineno, raw)
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise EdgeListParseError(lineno, raw) from None
    return pairs


def load_edge_list(path) -> list[tuple[int, int]]:
    return parse_edge_list(Path(path).read_text())


def save_edge_list(pairs: Iterable[Sequence[int]], path) -> None:
    with open(path, "w") as fh:
        for u, v in pairs:
            fh.write(f"{int(u)} {int(v)}\n")


def save_stats_csv(rows: Iterable[tuple[str, StructuralStats]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_CSV_HEADER)
        for name, s in rows:
            writer.writerow([name, *(_fmt(x) for x in s.as_row())])


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


GRAPH_FILES = ("edges.txt", "features.csv", "labels.csv", "split.csv")
_SPLIT_TAGS = {v: k for k, v in SPLIT_NAMES.items()}


def save_graph(g: Graph, out_dir) -> list[Path]:
    """Write edge list, features, labels and split files; returns the paths."""
    out = Path(out_dir)
    if not out.is_dir():
        raise GraphError(f"output directory {out} does not exist")
    paths = [out / name for name in GRAPH_FILES]
    save_edge_list(g.edge_array(), paths[0])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"x{j}" for j in range(g.feature_dim)])
        for v, row in enumerate(g.features):
            w.writerow([v, *(repr(float(x)) for x in row)])
    with open(paths[2], "w", newline="") as fh:
        fh.write(f"# num_classes={g.num_classes}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "label"])
        w.writerows(enumerate(g.labels.tolist()))
    with open(paths[3], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "split"])
        w.writerows((v, _SPLIT_TAGS[int(s)]) for v, s in enumerate(g.split))
    return paths


def _read_node_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise GraphError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    nodes = [int(r[0]) for r in body]
    if nodes != list(range(len(body))):
        raise GraphError(f"{path}: node column must list 0..N-1 in order")
    return header, [r[1:] for r in body]


def load_graph(edges_path, features_path, labels_path, split_path) -> Graph:
    """Inverse of :func:`save_graph` (also reads hand-written files of the same shape)."""
    _, feats = _read_node_table(features_path)
    _, labels = _read_node_table(labels_path)
    _, split = _read_node_table(split_path)
    num_classes = None
    with open(labels_path) as fh:
        first = fh.readline()
    if first.startswith("# num_classes="):
        num_classes = int(first.split("=", 1)[1])
    if len({len(r) for r in feats}) > 1:
        raise GraphError(f"{features_path}: ragged feature rows")
    try:
        features = np.array([[float(x) for x in r] for r in feats], dtype=np.float64)
    except ValueError as exc:
        raise GraphError(f"{features_path}: {exc}") from None
    return build_graph(
        load_edge_list(edges_path),
        features,
        np.array([int(r[0]) for r in labels]),
        np.array([r[0] for r in split]),
        num_nodes=len(feats),
        num_classes=num_classes,
    )


def load_graph_dir(directory) -> Graph:
    d = Path(directory)
    return load_graph(*(d / name for name in GRAPH_FILES))
