"""Command-line experiment runner.

    rnslab generate      --config C [--seed N] [--out DIR]
    rnslab train         --config C
    rnslab figure3       --config C [--workers K]
    rnslab verify        [--config C] [--only NAME]
    rnslab sampler-stats --config C

Exit codes: 0 success, 1 usage or config error, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats as st

from . import theory
from .config import ConfigError, ExperimentConfig, build_config, load_config
from .generators import GenConfig, generate
from .gnn import ModelConfig, init_params
from .graph import STATS_CSV_HEADER, save_graph, structural_stats
from .metrics import measure, usable, write_fig3_csv
from .samplers import SamplerConfig, rns_epoch
from .seeding import derive_seed, rng_for
from .trainer import REGIMES, Regime, train

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
FIG3_METRICS = ("bias_abs", "loss_variance", "R", "grad_bar_norm_sq")
FIG3_SUMMARY_HEADER = ["sampler", "metric", "mean", "ci95", "num_seeds", "ci_degenerate"]
REGIME_SUMMARY_HEADER = ["regime", "num_seeds", "val_mean", "val_std", "test_mean", "test_std"]
VERIFY_FAMILIES = (
    "kernel_mass",
    "order_stat",
    "rns_combinatorics",
    "rns_bias",
    "flow_full",
    "flow_sgd",
    "degree_tail",
    "edge_count",
    "sampler_ordering",
)


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


# ---------------------------------------------------------------- generate


def cmd_generate(cfg: ExperimentConfig) -> int:
    if cfg.graph is None:
        raise ConfigError("generate needs generator keys in the graph section")
    paths = save_graph(generate(cfg.graph), _out_dir(cfg))
    for p in paths:
        print(p)
    return EXIT_OK


# ------------------------------------------------------------------- train


def _metric_hook(cfg: ExperimentConfig, model_cfg: ModelConfig, g):
    cadence = cfg.metrics_cadence

    def hook(info):
        if cadence and (info.epoch + 1) % cadence == 0 and usable(info.batches):
            return measure(info.w, model_cfg, g, info.batches)
        return None

    return hook


def _run(cfg, g, model_cfg, regime: Regime, seed: int):
    return train(g, model_cfg, cfg.optim, regime, seed, [_metric_hook(cfg, model_cfg, g)])


def cmd_train(cfg: ExperimentConfig) -> int:
    g = cfg.load_graph()
    model_cfg = cfg.model_config(g)
    out = _out_dir(cfg)
    if cfg.regime_tag != "all":
        trace = _run(cfg, g, model_cfg, cfg.regime(), cfg.seed)
        trace.write_csv(out / "trace.csv")
        last = trace.records[-1]
        print(f"final val={last.val_accuracy:.6f} test={last.test_accuracy:.6f}")
        return EXIT_OK

    # all three regimes over a range of seeds, summarised at the best validation epoch
    num_seeds = int(cfg.section("train").get("seeds", 1))
    if num_seeds < 1:
        raise ConfigError("train.seeds must be >= 1")
    rows = []
    for tag in REGIMES:
        regime = Regime("full") if tag == "full" else replace(cfg, regime_tag=tag).regime()
        vals, tests = [], []
        for s in range(cfg.seed, cfg.seed + num_seeds):
            trace = _run(cfg, g, model_cfg, regime, s)
            trace.write_csv(out / f"trace_{tag}_seed{s}.csv")
            best = trace.best_val()
            vals.append(best.val_accuracy)
            tests.append(best.test_accuracy)
        rows.append([tag, num_seeds, np.mean(vals), np.std(vals), np.mean(tests), np.std(tests)])
        print(f"{tag}: test={np.mean(tests):.6f} +- {np.std(tests):.6f}")
    _write_rows(out / "regime_summary.csv", REGIME_SUMMARY_HEADER, rows)
    return EXIT_OK


# ----------------------------------------------------------------- figure3


def _sweep_one(args):
    g, model_cfg, samplers, seed, batches = args
    return theory.sampler_sweep(g, model_cfg, samplers, [seed], batches)


def fig3_points(g, model_cfg, samplers: dict, seeds, batches: int, workers: int = 1):
    """Sampler sweep fanned out over seeds; results are ordered by seed."""
    jobs = [(g, model_cfg, samplers, s, batches) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_one, jobs))
    else:
        parts = [_sweep_one(j) for j in jobs]
    return [p for part in parts for p in part]


def ci95(x) -> tuple[float, float]:
    """Mean and Student-t 95% half-width; width 0 for a single value."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    half = st.t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean()), float(half)


def fig3_summary(points, sampler_names) -> list[list]:
    rows = []
    for name in sampler_names:
        pts = [p for p in points if p.sampler == name]
        for metric in FIG3_METRICS:
            mean, half = ci95([getattr(p, metric) for p in pts])
            rows.append([name, metric, mean, half, len(pts), str(len(pts) < 2).lower()])
    return rows


def cmd_figure3(cfg: ExperimentConfig, workers: int = 1) -> int:
    if len(cfg.samplers) < 2:
        raise ConfigError("figure3 needs at least two samplers")
    sec = cfg.section("figure3")
    num_seeds = int(sec.get("seeds", 100))
    batches = int(sec.get("batches", 50))
    if num_seeds < 1 or batches < 1:
        raise ConfigError("figure3.seeds and figure3.batches must be >= 1")
    g = cfg.load_graph()
    model_cfg = cfg.model_config(g)
    seeds = list(range(cfg.seed, cfg.seed + num_seeds))
    points = fig3_points(g, model_cfg, cfg.samplers, seeds, batches, workers)
    out = _out_dir(cfg)
    write_fig3_csv([(p.sampler, p.seed, p) for p in points], out / "figure3_points.csv")
    _write_rows(out / "figure3_summary.csv", FIG3_SUMMARY_HEADER, fig3_summary(points, cfg.samplers))
    theory.write_alpha_csv([(p.sampler, p.seed, p.alpha_err, p.R) for p in points], out / "alpha_vs_R.csv")
    if num_seeds < 2:
        print("warning: a single seed gives a degenerate (zero-width) confidence interval", file=sys.stderr)
    for r in theory.ordering_checks(points, "R") + theory.ordering_checks(points, "loss_variance"):
        print(r.line())
    return EXIT_OK


# ------------------------------------------------------------------ verify


def flow_problem(seed: int = 3):
    """15-node three-block SBM with a linear one-layer GCN."""
    g = generate(
        GenConfig(kind="sbm", n=15, block_sizes=(5, 5, 5), p_in=0.6, p_out=0.1, num_classes=3,
                  feature_dim=4, split_fractions=(0.6, 0.2, 0.2), seed=seed)
    )
    cfg = ModelConfig(arch="gcn", depth=1, hidden_dim=4, num_classes=3, in_dim=4, activation="identity")
    return g, cfg, init_params(cfg, 1)


def flow_batches(g, m: int = 3, seed: int = 5):
    """First RNS plan whose blocks all contain a training node."""
    for attempt in range(100):
        batches = list(rns_epoch(g, m, np.random.default_rng(seed + attempt)))
        if all(b.train_targets.size for b in batches):
            return batches
    raise RuntimeError("no RNS plan with a training node in every block")


def bias_problem(seed: int = 0):
    """30-node two-block SBM with a two-layer GCN at random weights."""
    g = generate(
        GenConfig(kind="sbm", n=30, block_sizes=(15, 15), p_in=0.3, p_out=0.05, num_classes=2,
                  feature_dim=4, seed=seed)
    )
    cfg = ModelConfig(arch="gcn", depth=2, hidden_dim=8, num_classes=2, in_dim=4)
    return g, cfg, init_params(cfg, int(derive_seed(seed, "init").generate_state(1)[0]))


def fig3_problem(n: int = 20000, seed: int = 0):
    """BA graph, two-layer GCN and sampler settings scaled from tuned batch fractions."""
    g = generate(GenConfig(kind="barabasi_albert", n=n, attach_degree=4, num_classes=2, feature_dim=8, seed=seed))
    cfg = ModelConfig(arch="gcn", depth=2, hidden_dim=16, num_classes=2, in_dim=8)
    samplers = {
        "rns": SamplerConfig(kind="rns", num_parts=2),
        "cluster": SamplerConfig(kind="cluster", num_clusters=max(2, 3 * n // 200), clusters_per_batch=10),
        "saint_rw": SamplerConfig(kind="saint_rw", walk_length=2, num_seeds=max(1, 7 * n // 200)),
        "neighbor": SamplerConfig(kind="neighbor", fanout=(30, 10), batch_size=1024),
    }
    return g, cfg, samplers


def _grid(sec, key, default):
    return [tuple(x) for x in sec.get(key, default)]


def run_verify(sec: dict, only: str | None = None, seed: int = 0) -> list[theory.VerificationResult]:
    fams = VERIFY_FAMILIES if only is None else (only,)
    kernel_default = [(N, m, k) for N in (60, 100, 1000) for m in (2, 3, 4, 5) for k in (0, 1, 3, 7)]
    eps = tuple(sec.get("eps", (0.04, 0.02, 0.01)))
    out: list[theory.VerificationResult] = []
    for fam in fams:
        if fam == "kernel_mass":
            out += [theory.kernel_mass_check(*t) for t in _grid(sec, "kernel_grid", kernel_default)]
        elif fam == "order_stat":
            trials = int(sec.get("order_stat_trials", 2000))
            for N, m, k in _grid(sec, "kernel_grid", kernel_default):
                out += theory.order_stat_moment_check(N, m, k, trials=trials, seed=seed)
        elif fam == "rns_combinatorics":
            for N, m in _grid(sec, "pair_grid", [(8, 2), (12, 3), (100, 3), (100, 4)]):
                out.append(theory.pair_probability_check(N, m, seed=seed))
                out.append(theory.marginal_check(N, m, seed=seed))
        elif fam == "rns_bias":
            g, cfg, w = bias_problem(seed)
            for m in sec.get("bias_m", (2, 3)):
                out += theory.rns_bias_checks(g, cfg, w, m, int(sec.get("bias_trials", 500)), seed)
        elif fam == "flow_full":
            g, cfg, w0 = flow_problem()
            fc = theory.FlowCheckConfig(eps_list=eps, substeps=int(sec.get("substeps", 1000)))
            out += theory.flow_check_full(g, cfg, w0, list(fc.eps_list), fc.substeps)
        elif fam == "flow_sgd":
            g, cfg, w0 = flow_problem()
            fc = theory.FlowCheckConfig(eps_list=eps, m=int(sec.get("flow_m", 3)), substeps=int(sec.get("substeps", 1000)))
            out += theory.flow_check_sgd(flow_batches(g, fc.m), cfg, w0, list(fc.eps_list), fc.substeps)
        elif fam == "degree_tail":
            n = int(sec.get("tail_n", 50000))
            g = generate(GenConfig(kind="barabasi_albert", n=n, attach_degree=4, seed=seed))
            seeds = range(seed, seed + int(sec.get("tail_seeds", 20)))
            out += theory.degree_tail_check(g, sec.get("tail_m", (3,)), seeds)
        elif fam == "edge_count":
            g = generate(GenConfig(kind="barabasi_albert", n=int(sec.get("edge_n", 2000)), attach_degree=4, seed=seed))
            for m in sec.get("edge_m", (2, 3, 5, 10)):
                out.append(theory.induced_edge_count_check(g, m, int(sec.get("edge_epochs", 100)), seed))
        elif fam == "sampler_ordering":
            g, cfg, samplers = fig3_problem(int(sec.get("ordering_n", 20000)), seed)
            seeds = range(seed, seed + int(sec.get("ordering_seeds", 30)))
            pts = theory.sampler_sweep(g, cfg, samplers, seeds, 50, with_alpha=False)
            out += theory.ordering_checks(pts, "R")
        else:
            raise ConfigError(f"unknown check family {fam!r}; choose from {', '.join(VERIFY_FAMILIES)}")
    if "tolerance" in sec:
        tol = float(sec["tolerance"])
        out = [
            r if r.inconclusive
            else theory.verdict(r.check_name, r.measured, r.reference, tol, r.provenance, r.relative)
            for r in out
        ]
    return out


def cmd_verify(cfg: ExperimentConfig, only: str | None = None) -> int:
    results = run_verify(cfg.section("verify"), only, cfg.seed)
    theory.write_manifest(results, _out_dir(cfg) / "manifest.csv")
    failed = [r for r in results if not r.passed and not r.inconclusive]
    for r in results:
        print(r.line())
        if r in failed:
            print(f"    provenance: {r.provenance}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed or inconclusive")
    return EXIT_VERIFY if failed else EXIT_OK


# ----------------------------------------------------------- sampler-stats

STAT_FIELDS = STATS_CSV_HEADER[1:]


def samplerstats_header() -> list[str]:
    cols = ["m"]
    for name in STAT_FIELDS:
        cols += [f"{name}_mean", f"{name}_std"]
    return cols + ["expected_edges"]


def sampler_stats_rows(g, m_list, epochs: int = 5, bfs_samples: int = 4, seed: int = 0) -> list[list]:
    """Per m: mean and std over epoch plans of the batch-averaged structural stats."""
    rows = []
    for m in m_list:
        per_plan = []
        for e in range(epochs):
            batches = list(rns_epoch(g, m, rng_for(seed, "sampler", "rns", m, e)))
            table = np.array([structural_stats(b, bfs_samples, seed).as_row() for b in batches], dtype=float)
            per_plan.append(table.mean(axis=0))
        per_plan = np.array(per_plan)
        row = [m]
        for mean, std in zip(per_plan.mean(axis=0), per_plan.std(axis=0)):
            row += [float(mean), float(std)]
        rows.append(row + [g.num_edges * theory.same_block_probability(g.num_nodes, m)])
    return rows


def cmd_samplerstats(cfg: ExperimentConfig) -> int:
    kinds = {s.kind for s in cfg.samplers.values()}
    if kinds and "rns" not in kinds:
        raise ConfigError("sampler-stats needs an rns sampler (or no sampler section)")
    sec = cfg.section("stats")
    g = cfg.load_graph()
    m_list = sec.get("m_list", tuple(range(1, 11)))
    if any(not 1 <= m <= g.num_nodes for m in m_list):
        raise ConfigError("every m must lie in [1, N]")
    rows = sampler_stats_rows(g, m_list, int(sec.get("epochs", 5)), int(sec.get("bfs_samples", 4)), cfg.seed)
    path = _out_dir(cfg) / "sampler_stats.csv"
    _write_rows(path, samplerstats_header(), rows)
    print(path)
    return EXIT_OK


# -------------------------------------------------------------------- main


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rnslab", description="Graph mini-batch sampling laboratory.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("generate", "train", "figure3", "verify", "sampler-stats"):
        c = sub.add_parser(name)
        c.add_argument("--config", help="flat key = value config file")
        c.add_argument("--seed", type=int, help="override the global seed")
        c.add_argument("--out", help="override the output directory")
        if name == "verify":
            c.add_argument("--only", choices=VERIFY_FAMILIES, help="run one check family")
        if name == "figure3":
            c.add_argument("--workers", type=int, default=1, help="processes for the seed sweep")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.config is None and args.command != "verify":
            raise UsageError(f"{args.command} needs --config")
        cfg = load_config(args.config) if args.config else build_config({})
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out is not None:
            cfg.out = args.out
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "figure3":
            return cmd_figure3(cfg, max(1, args.workers))
        if args.command == "verify":
            return cmd_verify(cfg, args.only)
        return cmd_samplerstats(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
