import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_graph, random_graph
from rnslab.generators import GenConfig, generate
from rnslab.gnn import ModelConfig, init_params, loss_and_grad, node_losses, forward
from rnslab.graph import full_batch, induced_subgraph
from rnslab.metrics import (
    MetricsError,
    measure,
    modified_loss_value,
    sigma_estimate,
    write_fig3_csv,
)
from rnslab.samplers import rns_epoch
from rnslab.theory import rns_bias_draws


def model_for(g, **kw):
    return ModelConfig(in_dim=g.feature_dim, num_classes=g.num_classes, **kw)


@pytest.fixture
def toy12():
    edges = [(i, (i + 1) % 12) for i in range(12)] + [(0, 6), (3, 9), (2, 7)]
    split = ["train"] * 8 + ["val"] * 2 + ["test"] * 2
    return make_graph(edges, 12, labels=[i % 3 for i in range(12)], split=split, dim=4, seed=1)


class TestMeasure:
    def test_full_batch_limit(self, small_graph):
        cfg = model_for(small_graph, depth=2)
        rep = measure(init_params(cfg, 0), cfg, small_graph, [full_batch(small_graph)])
        assert rep.bias_abs == 0 and rep.R == 0 and rep.loss_variance == 0
        assert rep.m_effective == 1

    def test_identical_batches(self, small_graph):
        cfg = model_for(small_graph)
        b = induced_subgraph(small_graph, range(10))
        assert measure(init_params(cfg, 0), cfg, small_graph, [b, b]).R == 0

    def test_brute_force_R(self, toy12):
        cfg = model_for(toy12, depth=2, hidden_dim=5)
        w = init_params(cfg, 3)
        blocks = [[0, 1, 2, 3], [4, 5, 6, 7], [0, 5, 8, 9]]
        batches = [induced_subgraph(toy12, blk) for blk in blocks]
        rep = measure(w, cfg, toy12, batches)
        # straight-line recomputation from the raw per-batch gradients
        vecs = [loss_and_grad(w, cfg, b).grad for b in batches]
        mean = [sum(v[i] for v in vecs) / 3 for i in range(w.size)]
        R = sum(sum((v[i] - mean[i]) ** 2 for i in range(w.size)) for v in vecs) / 3
        assert rep.R == pytest.approx(R, rel=1e-12)
        assert rep.grad_bar_norm_sq == pytest.approx(sum(x * x for x in mean), rel=1e-12)
        losses = [loss_and_grad(w, cfg, b).loss for b in batches]
        assert rep.L_bar == pytest.approx(sum(losses) / 3, rel=1e-14)
        assert rep.loss_variance == pytest.approx(np.var(losses), rel=1e-12)

    def test_empty_target_batches_excluded(self, toy12):
        cfg = model_for(toy12)
        w = init_params(cfg, 0)
        a = induced_subgraph(toy12, [0, 1, 2, 3])
        empty = induced_subgraph(toy12, [8, 9, 10, 11])
        rep = measure(w, cfg, toy12, [a, empty])
        assert rep.m_effective == 1 and rep.R == 0
        with pytest.raises(MetricsError):
            measure(w, cfg, toy12, [empty])

    def test_reordering_invariant(self, small_graph):
        cfg = model_for(small_graph)
        w = init_params(cfg, 1)
        batches = list(rns_epoch(small_graph, 4, np.random.default_rng(0)))
        a = measure(w, cfg, small_graph, batches)
        b = measure(w, cfg, small_graph, batches[::-1])
        assert a.R == pytest.approx(b.R, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_identity_and_signs(self, seed, m):
        g = random_graph(20, 0.2, seed=seed % 50)
        cfg = model_for(g)
        w = init_params(cfg, seed)
        rep = measure(w, cfg, g, list(rns_epoch(g, m, np.random.default_rng(seed))))
        assert rep.R >= 0 and rep.loss_variance >= 0 and rep.bias_abs >= 0
        assert rep.mean_batch_grad_norm_sq == pytest.approx(rep.grad_bar_norm_sq + rep.R, rel=1e-9, abs=1e-12)


class TestModifiedLoss:
    def setup_method(self):
        self.g = random_graph(24, 0.2, seed=8)
        self.cfg = model_for(self.g)
        self.w = init_params(self.cfg, 2)
        self.batches = list(rns_epoch(self.g, 3, np.random.default_rng(4)))

    def test_eps_zero(self):
        L_bar = np.mean([loss_and_grad(self.w, self.cfg, b).loss for b in self.batches if b.train_targets.size])
        assert modified_loss_value(self.w, self.cfg, self.batches, 0.0) == pytest.approx(L_bar, rel=1e-14)

    def test_full_batch(self):
        r = loss_and_grad(self.w, self.cfg, self.g)
        expected = r.loss + 0.1 / 4 * r.grad @ r.grad
        assert modified_loss_value(self.w, self.cfg, [full_batch(self.g)], 0.1) == pytest.approx(expected, rel=1e-14)

    def test_mean_square_form(self):
        eps = 0.3
        rs = [loss_and_grad(self.w, self.cfg, b) for b in self.batches if b.train_targets.size]
        m = len(rs)
        other = np.mean([r.loss for r in rs]) + eps / (4 * m) * sum(r.grad @ r.grad for r in rs)
        assert abs(modified_loss_value(self.w, self.cfg, self.batches, eps) - other) <= 1e-9

    def test_negative_eps(self):
        with pytest.raises(ValueError):
            modified_loss_value(self.w, self.cfg, self.batches, -1.0)


class TestSigma:
    def test_m1_zero(self, small_graph):
        cfg = model_for(small_graph, depth=2)
        batches = list(rns_epoch(small_graph, 1, np.random.default_rng(0)))
        assert sigma_estimate(init_params(cfg, 0), cfg, small_graph, batches) == 0

    @pytest.mark.parametrize("arch", ["gcn", "sage_mean"])
    def test_no_edges_zero(self, arch):
        g = make_graph([], 12, seed=2)
        cfg = model_for(g, arch=arch, depth=2)
        batches = list(rns_epoch(g, 3, np.random.default_rng(0)))
        assert sigma_estimate(init_params(cfg, 0), cfg, g, batches) == pytest.approx(0, abs=1e-14)

    def test_bias_bound_20_node_sbm(self):
        g = generate(GenConfig(kind="sbm", n=20, block_sizes=(10, 10), p_in=0.4, p_out=0.1, feature_dim=4, seed=1))
        cfg = model_for(g, depth=2, hidden_dim=8)
        w = init_params(cfg, 5)
        draws = rns_bias_draws(g, cfg, w, 2, 200, seed=0)
        bias = abs(draws.batch_losses.mean() - draws.L_full)
        assert draws.sigma_hat > 0
        assert bias <= np.sqrt(2) * draws.sigma_hat

    def test_node_subsampling_converges(self):
        g = random_graph(30, 0.2, seed=9)
        cfg = model_for(g)
        w = init_params(cfg, 1)
        draws = rns_bias_draws(g, cfg, w, 3, 400, seed=2)
        se = draws.full_subset_losses.std(ddof=1) / np.sqrt(draws.full_subset_losses.size)
        full = node_losses(forward(w, cfg, g), g.labels)[g.train_nodes].mean()
        assert abs(draws.full_subset_losses.mean() - full) <= 3 * se


def test_fig3_csv(tmp_path, small_graph):
    cfg = model_for(small_graph)
    rep = measure(init_params(cfg, 0), cfg, small_graph, [full_batch(small_graph)])
    write_fig3_csv([("rns", 0, rep), ("cluster", 0, rep)], tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "sampler,seed,bias,loss_var,R,grad_norm_sq"
    assert len(lines) == 3 and lines[1].startswith("rns,0,")
