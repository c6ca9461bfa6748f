"""Flat ``section.key = value`` experiment configs.

Example::

    seed = 3
    out = runs/sbm
    graph.kind = sbm
    graph.block_sizes = (50, 50)
    model.arch = gcn
    samplers.rns.kind = rns
    samplers.rns.num_parts = 4
    regime.tag = sampled_chained
    optim.lr = 0.05

Values are Python literals (``ast.literal_eval``); anything that does not
parse as a literal is kept as a string.  ``#`` starts a comment.
"""

from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .generators import GenConfig
from .gnn import ModelConfig
from .graph import Graph, load_graph
from .samplers import SamplerConfig
from .trainer import OptimConfig, Regime

GRAPH_FILE_KEYS = ("edges", "features", "labels", "split")
FREE_SECTIONS = ("verify", "figure3", "stats", "train")


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_flat(text: str) -> dict[str, object]:
    """``key = value`` lines into a dict; later keys override earlier ones."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key] = parse_value(value)
    return out


def _typed(cls, values: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown {section} key(s): {', '.join(unknown)}")
    fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**fixed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "out"
    graph: GenConfig | None = None
    graph_files: dict | None = None
    model: dict = field(default_factory=dict)
    samplers: dict[str, SamplerConfig] = field(default_factory=dict)
    optim: OptimConfig = field(default_factory=OptimConfig)
    regime_tag: str = "full"
    regime_sampler: str | None = None
    metrics_cadence: int = 0
    sections: dict[str, dict] = field(default_factory=dict)
    graph_seed_pinned: bool = False

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Same config under another global seed (a pinned graph.seed is kept)."""
        if seed < 0:
            raise ConfigError("seed must be >= 0")
        graph = self.graph
        if graph is not None and not self.graph_seed_pinned:
            graph = dataclasses.replace(graph, seed=seed)
        return dataclasses.replace(self, seed=seed, graph=graph)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def load_graph(self) -> Graph:
        from .generators import generate

        if self.graph_files is not None:
            f = self.graph_files
            return load_graph(f["edges"], f["features"], f["labels"], f["split"])
        return generate(self.graph)

    def model_config(self, g: Graph) -> ModelConfig:
        """Model section with in_dim / num_classes filled in from the graph."""
        values = {"in_dim": g.feature_dim, "num_classes": g.num_classes, **self.model}
        return _typed(ModelConfig, values, "model")

    def regime(self) -> Regime:
        if self.regime_tag == "full":
            return Regime("full")
        name = self.regime_sampler
        if name is None:
            if len(self.samplers) != 1:
                raise ConfigError("regime.sampler must name one of the configured samplers")
            name = next(iter(self.samplers))
        if name not in self.samplers:
            raise ConfigError(f"regime.sampler {name!r} is not configured")
        try:
            return Regime(self.regime_tag, self.samplers[name])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def build_config(flat: dict[str, object]) -> ExperimentConfig:
    groups: dict[str, dict] = {}
    top: dict[str, object] = {}
    for key, value in flat.items():
        head, dot, rest = key.partition(".")
        if dot:
            groups.setdefault(head, {})[rest] = value
        else:
            top[key] = value
    unknown_top = sorted(set(top) - {"seed", "out"})
    if unknown_top:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown_top)}")
    cfg = ExperimentConfig()
    if "seed" in top:
        if not isinstance(top["seed"], int) or top["seed"] < 0:
            raise ConfigError("seed must be a nonnegative integer")
        cfg.seed = top["seed"]
    cfg.out = str(top.get("out", cfg.out))

    graph = dict(groups.pop("graph", {}))
    files = {k: graph.pop(k) for k in GRAPH_FILE_KEYS if k in graph}
    if files:
        if graph:
            raise ConfigError("give either graph files or generator keys, not both")
        missing = [k for k in GRAPH_FILE_KEYS if k not in files]
        if missing:
            raise ConfigError(f"graph files missing: {', '.join(missing)}")
        cfg.graph_files = {k: str(v) for k, v in files.items()}
    else:
        cfg.graph_seed_pinned = "seed" in graph
        graph.setdefault("seed", cfg.seed)
        cfg.graph = _typed(GenConfig, graph, "graph")

    model = groups.pop("model", {})
    _typed(ModelConfig, {"in_dim": 1, "num_classes": 1, **model}, "model")
    cfg.model = {k: tuple(v) if isinstance(v, list) else v for k, v in model.items()}

    samplers: dict[str, dict] = {}
    for key, value in groups.pop("samplers", {}).items():
        name, dot, attr = key.partition(".")
        if not dot:
            raise ConfigError(f"sampler keys look like samplers.<name>.<field>, got samplers.{key}")
        samplers.setdefault(name, {})[attr] = value
    single = groups.pop("sampler", None)
    if single is not None:
        samplers.setdefault(single.get("kind", "rns"), {}).update(single)
    cfg.samplers = {n: _typed(SamplerConfig, v, f"samplers.{n}") for n, v in samplers.items()}

    cfg.optim = _typed(OptimConfig, groups.pop("optim", {}), "optim")
    regime = groups.pop("regime", {})
    unknown = sorted(set(regime) - {"tag", "sampler"})
    if unknown:
        raise ConfigError(f"unknown regime key(s): {', '.join(unknown)}")
    cfg.regime_tag = regime.get("tag", "full")
    cfg.regime_sampler = regime.get("sampler")
    if cfg.regime_tag not in ("full", "sampled_chained", "sampled_accumulated", "all"):
        raise ConfigError(f"unknown regime {cfg.regime_tag!r}")

    metrics = groups.pop("metrics", {})
    if set(metrics) - {"cadence"}:
        raise ConfigError("the metrics section only has 'cadence'")
    cfg.metrics_cadence = int(metrics.get("cadence", 0))
    if cfg.metrics_cadence < 0:
        raise ConfigError("metrics.cadence must be >= 0")

    for name in FREE_SECTIONS:
        cfg.sections[name] = groups.pop(name, {})
    if groups:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(groups))}")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return build_config(parse_flat(text))
