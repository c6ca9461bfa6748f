import math

import numpy as np
import pytest
from scipy import stats

from conftest import make_graph, random_graph
from rnslab.generators import GenConfig, generate
from rnslab.samplers import (
    Sampler,
    SamplerConfig,
    SamplerError,
    bfs_partition,
    check_depth,
    cluster_epoch,
    ladies_batch,
    ladies_importance,
    neighbor_batch,
    normalized_adjacency,
    random_walk_nodes,
    rns_blocks,
    rns_epoch,
    saint_rw_epoch,
    saint_steps_per_epoch,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def two_triangles():
    return make_graph([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6)


def star(leaves):
    return make_graph([(0, i) for i in range(1, leaves + 1)], leaves + 1)


class TestRNS:
    def test_m1_identity(self, small_graph):
        (b,) = list(rns_epoch(small_graph, 1, rng()))
        assert np.array_equal(b.graph.csr_neighbors, small_graph.csr_neighbors)
        assert np.array_equal(b.global_ids, np.arange(small_graph.num_nodes))

    def test_m2_n6_partition(self):
        r = rng(3)
        perm = np.random.default_rng(3).permutation(6)
        blocks = rns_blocks(6, 2, r)
        assert [len(b) for b in blocks] == [3, 3]
        assert np.array_equal(np.concatenate(blocks), perm)

    def test_remainder_dropped(self):
        blocks = rns_blocks(10, 3, rng())
        allnodes = np.concatenate(blocks)
        assert allnodes.size == 9 and np.unique(allnodes).size == 9

    def test_pair_frequency_m4_n100(self):
        r = rng(11)
        trials = 20_000
        hits = sum(bool(np.isin([0, 1], rns_blocks(100, 4, r)[0]).all()) for _ in range(trials))
        p = 25 * 24 / (100 * 99)
        assert abs(hits / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)

    def test_marginal_uniformity_chi2(self):
        r = rng(5)
        counts = np.zeros(20)
        for _ in range(4000):
            counts[rns_blocks(20, 4, r)[0]] += 1
        assert stats.chisquare(counts).pvalue > 0.001
        assert counts.sum() == 4000 * 5

    def test_m_too_large(self, small_graph):
        with pytest.raises(SamplerError):
            list(rns_epoch(small_graph, small_graph.num_nodes + 1, rng()))


class TestCluster:
    def test_single_cluster(self, small_graph):
        assign = bfs_partition(small_graph, 1, rng())
        (b,) = list(cluster_epoch(small_graph, assign, 1, rng()))
        assert b.graph.num_edges == small_graph.num_edges

    def test_singletons(self, small_graph):
        n = small_graph.num_nodes
        batches = list(cluster_epoch(small_graph, bfs_partition(small_graph, n, rng()), 1, rng()))
        assert len(batches) == n
        assert all(b.num_nodes == 1 and b.graph.num_edges == 0 for b in batches)

    def test_triangles_are_clusters(self):
        g = two_triangles()
        for seed in range(5):
            assign = bfs_partition(g, 2, rng(seed))
            assert len(set(assign[:3])) == 1 and len(set(assign[3:])) == 1
            assert assign[0] != assign[3]

    @pytest.mark.parametrize("C", [3, 7, 20])
    def test_partition_exact_and_balanced(self, C):
        g = random_graph(50, 0.08, seed=2)
        assign = bfs_partition(g, C, rng(1))
        sizes = np.bincount(assign, minlength=C)
        assert sizes.sum() == 50 and sizes.max() - sizes.min() <= 1

    def test_batches_disjoint(self):
        g = random_graph(60, 0.1, seed=3)
        assign = bfs_partition(g, 12, rng())
        batches = list(cluster_epoch(g, assign, 5, rng()))
        assert len(batches) == 2
        ids = np.concatenate([b.global_ids for b in batches])
        assert ids.size == np.unique(ids).size

    def test_bc_larger_than_c(self, small_graph):
        with pytest.raises(SamplerError):
            SamplerConfig(kind="cluster", num_clusters=2, clusters_per_batch=3)
        with pytest.raises(SamplerError):
            list(cluster_epoch(small_graph, bfs_partition(small_graph, 2, rng()), 3, rng()))


class TestSaint:
    def test_steps(self):
        assert saint_steps_per_epoch(120, 4, 2) == 15
        assert saint_steps_per_epoch(10, 4, 8) == 1

    def test_walk_length_one_bound(self):
        g = random_graph(100, 0.05, seed=1)
        for b in saint_rw_epoch(g, 1, 10, rng()):
            assert b.num_nodes <= 20

    def test_isolated_seed(self):
        g = make_graph([(1, 2)], 3)
        assert random_walk_nodes(g, np.array([0]), 3, rng()).tolist() == [0]

    def test_walks_follow_edges(self):
        g = random_graph(40, 0.1, seed=4)
        b = next(saint_rw_epoch(g, 4, 1, rng(2)))
        # one walk visits a connected set
        from rnslab.graph import connected_components
        assert connected_components(b.graph)[0] == 1

    def test_epoch_length(self):
        g = random_graph(120, 0.05, seed=0)
        assert len(Sampler(g, SamplerConfig(kind="saint_rw", walk_length=4, num_seeds=2), 0).epoch(0)) == 15


class TestNeighbor:
    def test_exhaustive_fanout(self, small_graph):
        seeds = small_graph.train_nodes[:3]
        b = neighbor_batch(small_graph, seeds, [100, 100], rng())
        top = b.layers[-1]
        for s in seeds:
            i = b.to_local([s])[0]
            nbrs = b.global_ids[top[i].indices]
            assert sorted(nbrs.tolist()) == small_graph.neighbors(s).tolist()

    def test_isolated_seed(self):
        g = make_graph([(1, 2)], 3)
        b = neighbor_batch(g, np.array([0]), [3, 3], rng())
        assert b.global_ids.tolist() == [0] and all(x.nnz == 0 for x in b.layers)

    def test_star_cap(self):
        g = star(5)
        for seed in range(10):
            b = neighbor_batch(g, np.array([0]), [2], rng(seed))
            assert b.layers[0].nnz == 2
            assert b.num_nodes == 3
            assert np.unique(b.layers[0].indices).size == 2

    def test_targets_are_seeds(self, small_graph):
        seeds = small_graph.train_nodes[:4]
        b = neighbor_batch(small_graph, seeds, [2, 2], rng())
        assert np.array_equal(b.global_ids[b.train_targets], np.sort(seeds))

    def test_epoch_covers_train_once(self):
        g = random_graph(50, 0.1, seed=6)
        batches = Sampler(g, SamplerConfig(kind="neighbor", fanout=(3,), batch_size=7), 2).epoch(0)
        assert len(batches) == math.ceil(g.train_nodes.size / 7)
        seen = np.concatenate([b.global_ids[b.train_targets] for b in batches])
        assert np.array_equal(np.sort(seen), g.train_nodes)

    def test_depth_mismatch(self):
        with pytest.raises(SamplerError):
            check_depth(SamplerConfig(kind="neighbor", fanout=(2, 2)), 3)
        check_depth(SamplerConfig(kind="rns"), 3)


class TestLadies:
    def test_budget_covers_pool(self):
        g = random_graph(30, 0.15, seed=2)
        a = normalized_adjacency(g).toarray()
        targets = g.train_nodes[:3]
        b = ladies_batch(g, targets, [1000], rng())
        w = b.layer_weights[0].toarray()
        ids = b.global_ids
        for t in targets:
            i = b.to_local([t])[0]
            expected = {int(u): a[t, u] for u in np.flatnonzero(a[t])}
            got = {int(ids[j]): w[i, j] for j in np.flatnonzero(w[i])}
            assert got.keys() == expected.keys()
            for u in got:
                assert got[u] == pytest.approx(expected[u])

    def test_single_node_passthrough(self):
        g = make_graph([], 1)
        b = ladies_batch(g, np.array([0]), [4, 4], rng())
        assert b.global_ids.tolist() == [0]
        assert all(x.nnz == 1 for x in b.layers)

    def test_path_symmetric_importance(self):
        g = make_graph([(0, 1), (1, 2)], 3)
        q = ladies_importance(normalized_adjacency(g), np.array([1]), np.array([0, 2]))
        assert q[0] == pytest.approx(q[1])
        p = q / q.sum()
        assert p.tolist() == pytest.approx([0.5, 0.5])
        # hand value: A_hat[1, 0] = 1 / sqrt(3 * 2)
        assert q[0] == pytest.approx(1 / 6)

    def test_budget_respected_and_unbiased_weights(self):
        g = random_graph(60, 0.2, seed=9)
        a = normalized_adjacency(g)
        targets = g.train_nodes[:2]
        pool = np.setdiff1d(np.unique(a[targets].indices), targets)
        assert pool.size > 3
        x = rng(1).normal(size=g.num_nodes)
        order = np.argsort(targets)
        exact = (a[targets][:, pool] @ x[pool])[order]
        r, samples = rng(4), []
        for _ in range(4000):
            b = ladies_batch(g, targets, [1], r)
            assert b.num_nodes <= targets.size + 1
            w = b.layer_weights[0].toarray()
            loc = b.to_local(targets[order])
            xb = x[b.global_ids].copy()
            xb[loc] = 0.0  # keep only the sampled pool node
            samples.append(w[loc] @ xb)
        samples = np.array(samples)
        se = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
        # one importance-weighted draw is an unbiased estimate of the pool sum
        assert np.all(np.abs(samples.mean(axis=0) - exact) <= 4 * se)


class TestSamplerWrapper:
    @pytest.mark.parametrize(
        "cfg",
        [
            SamplerConfig(kind="rns", num_parts=3),
            SamplerConfig(kind="cluster", num_clusters=6, clusters_per_batch=2),
            SamplerConfig(kind="saint_rw", walk_length=2, num_seeds=4),
            SamplerConfig(kind="neighbor", fanout=(2, 2), batch_size=4),
            SamplerConfig(kind="ladies", budgets=(5, 5), batch_size=4),
        ],
        ids=lambda c: c.kind,
    )
    def test_reproducible(self, cfg):
        g = random_graph(40, 0.12, seed=1)
        a = Sampler(g, cfg, 7).epoch(2)
        b = Sampler(g, cfg, 7).epoch(2)
        assert len(a) == len(b) == Sampler(g, cfg, 7).steps_per_epoch
        for x, y in zip(a, b):
            assert np.array_equal(x.global_ids, y.global_ids)
            assert np.array_equal(x.train_targets, y.train_targets)
        c = Sampler(g, cfg, 8).epoch(2)
        assert any(not np.array_equal(x.global_ids, y.global_ids) for x, y in zip(a, c)) or cfg.kind == "cluster"

    def test_batches_span_epochs(self):
        g = random_graph(40, 0.12, seed=1)
        s = Sampler(g, SamplerConfig(kind="rns", num_parts=3), 0)
        got = s.batches(7)
        expected = s.epoch(0) + s.epoch(1) + s.epoch(2)[:1]
        assert [b.global_ids.tolist() for b in got] == [b.global_ids.tolist() for b in expected]

    def test_cluster_partition_fixed_across_epochs(self):
        g = generate(GenConfig(kind="barabasi_albert", n=200, attach_degree=2, seed=0))
        s = Sampler(g, SamplerConfig(kind="cluster", num_clusters=10, clusters_per_batch=2), 3)
        first = {tuple(b.global_ids) for b in s.epoch(0)}
        second = {tuple(b.global_ids) for b in s.epoch(1)}
        clusters = {tuple(np.flatnonzero(s.clusters == c)) for c in range(10)}
        for batch in first | second:
            parts = [c for c in clusters if set(c) <= set(batch)]
            assert sum(len(c) for c in parts) == len(batch)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(kind="lbfgs"), dict(num_parts=0), dict(walk_length=0), dict(fanout=(0,)), dict(budgets=()), dict(batch_size=0)],
    )
    def test_config_errors(self, kwargs):
        with pytest.raises(SamplerError):
            SamplerConfig(**kwargs)
