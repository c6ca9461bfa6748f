import pytest

from rnslab.config import ConfigError, build_config, load_config, parse_flat, parse_value
from rnslab.generators import GenConfig
from rnslab.samplers import SamplerConfig


def test_parse_value():
    assert parse_value(" 3 ") == 3
    assert parse_value("(1, 2)") == (1, 2)
    assert parse_value("0.5") == 0.5
    assert parse_value("runs/sbm") == "runs/sbm"
    assert parse_value("True") is True


def test_parse_flat_comments_and_override():
    flat = parse_flat("# header\nseed = 1  # trailing\n\nseed = 2\nmodel.arch = gcn\n")
    assert flat == {"seed": 2, "model.arch": "gcn"}


def test_parse_flat_bad_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_flat("seed = 1\nnot a pair\n")


def test_full_config():
    text = """
    seed = 3
    out = runs/x
    graph.kind = sbm
    graph.n = 40
    graph.block_sizes = [20, 20]
    model.arch = sage_mean
    model.depth = 2
    samplers.rns.kind = rns
    samplers.rns.num_parts = 4
    samplers.cl.kind = cluster
    samplers.cl.num_clusters = 8
    optim.kind = adam
    optim.lr = 0.01
    regime.tag = sampled_chained
    regime.sampler = rns
    metrics.cadence = 5
    figure3.seeds = 2
    """
    cfg = build_config(parse_flat(text))
    assert cfg.seed == 3 and cfg.out == "runs/x"
    assert cfg.graph == GenConfig(kind="sbm", n=40, block_sizes=(20, 20), seed=3)
    assert cfg.samplers["rns"] == SamplerConfig(kind="rns", num_parts=4)
    assert cfg.optim.kind == "adam" and cfg.metrics_cadence == 5
    assert cfg.regime().sampler.num_parts == 4
    assert cfg.section("figure3") == {"seeds": 2}
    g = cfg.load_graph()
    mc = cfg.model_config(g)
    assert mc.in_dim == g.feature_dim and mc.num_classes == 2 and mc.arch == "sage_mean"


def test_single_sampler_section():
    cfg = build_config({"sampler.kind": "cluster", "sampler.num_clusters": 4, "regime.tag": "sampled_accumulated"})
    assert list(cfg.samplers) == ["cluster"]
    assert cfg.regime().tag == "sampled_accumulated"


def test_with_seed():
    cfg = build_config({"seed": 1, "graph.n": 100})
    assert cfg.with_seed(9).graph.seed == 9
    pinned = build_config({"seed": 1, "graph.seed": 4})
    assert pinned.with_seed(9).graph.seed == 4 and pinned.with_seed(9).seed == 9


@pytest.mark.parametrize(
    "flat",
    [
        {"colour": 1},
        {"seed": -1},
        {"graph.kind": "sbm", "graph.edges": "e.txt"},
        {"graph.edges": "e.txt"},
        {"graph.wibble": 1},
        {"model.arch": "gat"},
        {"samplers.rns": 4},
        {"samplers.a.kind": "magic"},
        {"optim.lr": -1},
        {"regime.tag": "sometimes"},
        {"regime.other": 1},
        {"metrics.cadence": -1},
        {"metrics.other": 1},
        {"plots.x": 1},
    ],
)
def test_config_errors(flat):
    with pytest.raises(ConfigError):
        build_config(flat)


def test_regime_sampler_errors():
    two = build_config({"samplers.a.kind": "rns", "samplers.b.kind": "rns", "regime.tag": "sampled_chained"})
    with pytest.raises(ConfigError):
        two.regime()
    missing = build_config({"samplers.a.kind": "rns", "regime.tag": "sampled_chained", "regime.sampler": "zz"})
    with pytest.raises(ConfigError):
        missing.regime()


def test_graph_files(tmp_path):
    from rnslab.generators import generate
    from rnslab.graph import save_graph

    g = generate(GenConfig(n=30, block_sizes=(15, 15)))
    save_graph(g, tmp_path)
    text = "\n".join(
        f"graph.{k} = {tmp_path / f}" for k, f in
        [("edges", "edges.txt"), ("features", "features.csv"), ("labels", "labels.csv"), ("split", "split.csv")]
    )
    (tmp_path / "c.cfg").write_text(text)
    h = load_config(tmp_path / "c.cfg").load_graph()
    assert h.num_nodes == 30 and h.num_edges == g.num_edges


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/c.cfg")
