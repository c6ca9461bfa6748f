"""Numerical checks of the backward-analysis, bias and degree-thinning results.

Each check returns :class:`VerificationResult` records.  A record passes when
``|measured - reference| <= tolerance``; interval gates ``[lo, hi]`` are
stored as reference = midpoint, tolerance = half-width, and one-sided bounds
``x <= B`` as reference 0, tolerance B.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .gnn import (
    CE_LIPSCHITZ,
    ModelConfig,
    directional_hvp,
    forward,
    init_params,
    loss_and_grad,
    node_losses,
)
from .graph import Graph, full_batch, induced_subgraph
from .metrics import measure
from .samplers import Sampler, SamplerConfig, rns_blocks, rns_epoch
from .seeding import derive_seed, rng_for

MANIFEST_HEADER = ["check_name", "measured", "reference", "tolerance", "passed", "provenance"]
ALPHA_CSV_HEADER = ["sampler", "seed", "alpha_err", "R"]

ORDER3_GATE = (6.0, 10.0)
ORDER2_GATE = (3.4, 4.6)


@dataclass(frozen=True)
class VerificationResult:
    check_name: str
    measured: float
    reference: float
    tolerance: float
    passed: bool
    provenance: str
    relative: bool = False
    inconclusive: bool = False

    def line(self) -> str:
        status = "INCONCLUSIVE" if self.inconclusive else ("PASS" if self.passed else "FAIL")
        kind = "rel" if self.relative else "abs"
        return (
            f"[{status}] {self.check_name}: measured={self.measured:.10g} "
            f"reference={self.reference:.10g} tol={self.tolerance:.3g} ({kind})"
        )


def verdict(name, measured, reference, tolerance, provenance, relative=False) -> VerificationResult:
    measured, reference, tolerance = float(measured), float(reference), float(tolerance)
    err = abs(measured - reference)
    if relative:
        err /= max(abs(reference), np.finfo(float).tiny)
    return VerificationResult(name, measured, reference, tolerance, bool(err <= tolerance), provenance, relative)


def interval(name, measured, lo, hi, provenance) -> VerificationResult:
    return verdict(name, measured, (lo + hi) / 2, (hi - lo) / 2, provenance)


def upper_bound(name, measured, bound, provenance) -> VerificationResult:
    # nonnegative quantity below a bound: |x - 0| <= bound
    return verdict(name, abs(measured), 0.0, bound, provenance)


def inconclusive(name, provenance, measured=float("nan"), reference=float("nan")) -> VerificationResult:
    return VerificationResult(name, measured, reference, float("nan"), False, provenance, inconclusive=True)


def write_manifest(results: Sequence[VerificationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in results:
            passed = "inconclusive" if r.inconclusive else str(r.passed).lower()
            writer.writerow([r.check_name, repr(r.measured), repr(r.reference), repr(r.tolerance), passed, r.provenance])


# ------------------------------------------------------- backward analysis


@dataclass(frozen=True)
class FlowCheckConfig:
    eps_list: tuple = (0.04, 0.02, 0.01)
    m: int = 3
    substeps: int = 1000
    permutation_averaging: bool = True

    def __post_init__(self):
        eps = list(self.eps_list)
        if not eps or any(e <= 0 for e in eps) or eps != sorted(eps, reverse=True) or len(set(eps)) != len(eps):
            raise ValueError("eps_list must be positive and strictly decreasing")
        if self.substeps < 100:
            raise ValueError("substeps must be >= 100")
        if not 1 <= self.m <= 4:
            raise ValueError("m must lie in [1, 4] so every ordering can be enumerated")


def rk4(field: Callable, w0: np.ndarray, T: float, substeps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta for dw/dt = field(w) on [0, T]."""
    h = T / substeps
    w = np.array(w0, dtype=np.float64)
    for _ in range(substeps):
        k1 = field(w)
        k2 = field(w + 0.5 * h * k1)
        k3 = field(w + 0.5 * h * k2)
        k4 = field(w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("ODE integration blew up; reduce the step")
    return w


def gd_flow_gap(grad_fn, hvp_fn, w0, eps, substeps=1000, corrected=True) -> float:
    """||one GD step - flow over time eps|| for the modified (or plain) field.

    The modified field is -(g + (eps/2) H g), the gradient flow of
    L + (eps/4)||grad L||^2.
    """
    w1 = w0 - eps * grad_fn(w0)

    def field(w):
        g = grad_fn(w)
        return -(g + 0.5 * eps * hvp_fn(w, g)) if corrected else -g

    return float(np.linalg.norm(w1 - rk4(field, w0, eps, substeps)))


def chained_endpoint(grad_fns, w0, step, order) -> np.ndarray:
    w = np.array(w0, dtype=np.float64)
    for k in order:
        w = w - step * grad_fns[k](w)
    return w


def sgd_flow_gap(grad_fns, hvp_fns, w0, eps, substeps=1000, corrected=True, correction_lr=None) -> float:
    """Gap between the order-averaged m-step SGD endpoint and the modified flow.

    Each of the m! orderings runs m steps of size alpha = eps / m; the flow of
    mean_k L_k + (alpha / 4m) sum_k ||grad L_k||^2 runs for time eps.
    ``correction_lr`` overrides alpha in the penalty (used to show that the
    epoch-length coefficient eps degrades the agreement to second order).
    """
    m = len(grad_fns)
    alpha = eps / m
    c = alpha if correction_lr is None else correction_lr
    orders = list(itertools.permutations(range(m)))
    avg = sum(chained_endpoint(grad_fns, w0, alpha, o) for o in orders) / len(orders)

    def field(w):
        grads = [f(w) for f in grad_fns]
        out = sum(grads) / m
        if corrected:
            out = out + c / (2 * m) * sum(hf(w, g) for hf, g in zip(hvp_fns, grads))
        return -out

    return float(np.linalg.norm(avg - rk4(field, w0, eps, substeps)))


def quadratic_gd_gap(lam: float, w0: float, eps: float, corrected=True) -> float:
    """Closed-form gap for L = lam w^2 / 2: |(1 - eps lam) w0 - w_flow(eps)|."""
    rate = lam * (1 + eps * lam / 2) if corrected else lam
    return abs((1 - eps * lam) * w0 - math.exp(-rate * eps) * w0)


def _ladder(eps_list) -> list[float]:
    eps = sorted({float(e) for e in eps_list} | {float(e) / 2 for e in eps_list}, reverse=True)
    return eps


def _ratio_results(prefix, gaps, eps_list, gate, provenance) -> list[VerificationResult]:
    out = []
    for e in eps_list:
        ratio = gaps[e] / gaps[e / 2] if gaps[e / 2] > 0 else float("inf")
        out.append(interval(f"{prefix}[eps={e:g}]", ratio, *gate, provenance))
    return out


def _monotone_result(prefix, gaps, provenance) -> VerificationResult:
    seq = [gaps[e] for e in sorted(gaps, reverse=True)]
    worst = max((b / a for a, b in zip(seq, seq[1:]) if a > 0), default=0.0)
    # every gap smaller than the one at the next larger eps
    return verdict(f"{prefix}.monotone", float(worst < 1.0), 1.0, 0.0, provenance)


def flow_gaps_full(g, cfg, w0, eps_list, substeps=1000, corrected=True, h=1e-5) -> dict[float, float]:
    data = full_batch(g) if isinstance(g, Graph) else g

    def grad_fn(w):
        return loss_and_grad(w, cfg, data).grad

    def hvp_fn(w, v):
        return directional_hvp(grad_fn, w, v, h)

    return {e: gd_flow_gap(grad_fn, hvp_fn, w0, e, substeps, corrected) for e in _ladder(eps_list)}


def flow_check_full(g, cfg: ModelConfig, w0, eps_list, substeps=1000, negative_control=True) -> list[VerificationResult]:
    """GD step vs modified gradient flow: gap ratio under eps halving ~ 8."""
    prov = "one GD step tracks the flow of L + (eps/4)||grad L||^2 up to O(eps^3)"
    eps_list = sorted(eps_list, reverse=True)
    gaps = flow_gaps_full(g, cfg, w0, eps_list, substeps)
    results = _ratio_results("flow_full.ratio", gaps, eps_list, ORDER3_GATE, prov)
    results.append(_monotone_result("flow_full", gaps, prov))
    # integrator error must be far below the smallest gap under study
    e_min = min(gaps)
    fine = flow_gaps_full(g, cfg, w0, [2 * e_min], 2 * substeps)[e_min]
    results.append(
        upper_bound("flow_full.rk4_substep_doubling", abs(fine - gaps[e_min]), 1e-3 * gaps[e_min], prov)
    )
    if negative_control:
        plain = flow_gaps_full(g, cfg, w0, eps_list, substeps, corrected=False)
        results += _ratio_results(
            "flow_full.plain_flow_ratio",
            plain,
            eps_list,
            ORDER2_GATE,
            "plain gradient flow only matches GD to O(eps^2)",
        )
    return results


def flow_gaps_sgd(batches, cfg, w0, eps_list, substeps=1000, corrected=True, correction_scale="step", h=1e-5):
    grad_fns, hvp_fns = [], []
    for b in batches:

        def gf(w, b=b):
            return loss_and_grad(w, cfg, b).grad

        grad_fns.append(gf)
        hvp_fns.append(lambda w, v, gf=gf: directional_hvp(gf, w, v, h))
    out = {}
    for e in _ladder(eps_list):
        c = None if correction_scale == "step" else e
        out[e] = sgd_flow_gap(grad_fns, hvp_fns, w0, e, substeps, corrected, correction_lr=c)
    return out


def flow_check_sgd(batches, cfg: ModelConfig, w0, eps_list, substeps=1000) -> list[VerificationResult]:
    """Order-averaged chained SGD epoch vs the modified sampled-loss flow."""
    batches = list(batches)
    if not 1 <= len(batches) <= 4:
        raise ValueError("flow_check_sgd enumerates all orderings and needs 1 <= m <= 4")
    prov = "order-averaged SGD epoch tracks the flow of L_bar + (alpha/4)(||grad L_bar||^2 + R) up to O(eps^3)"
    eps_list = sorted(eps_list, reverse=True)
    gaps = flow_gaps_sgd(batches, cfg, w0, eps_list, substeps)
    results = _ratio_results("flow_sgd.ratio", gaps, eps_list, ORDER3_GATE, prov)
    results.append(_monotone_result("flow_sgd", gaps, prov))
    return results


def ordering_spread(batches, cfg: ModelConfig, w0, eps: float, substeps: int = 1000, h: float = 1e-5) -> dict:
    """Per-ordering endpoint distances from the modified flow (reported, not gated).

    Returns the gap of every single ordering alongside the gap of their average.
    """
    batches = list(batches)
    m = len(batches)
    grad_fns = [lambda w, b=b: loss_and_grad(w, cfg, b).grad for b in batches]
    alpha = eps / m

    def field(w):
        grads = [f(w) for f in grad_fns]
        corr = sum(directional_hvp(f, w, g, h) for f, g in zip(grad_fns, grads))
        return -(sum(grads) / m + alpha / (2 * m) * corr)

    target = rk4(field, w0, eps, substeps)
    ends = {o: chained_endpoint(grad_fns, w0, alpha, o) for o in itertools.permutations(range(m))}
    avg = sum(ends.values()) / len(ends)
    return {
        "per_order": {o: float(np.linalg.norm(e - target)) for o, e in ends.items()},
        "averaged": float(np.linalg.norm(avg - target)),
    }





def block_size(N: int, m: int) -> int:
    return N // m


def thinning_kernel(N: int, m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """H_{N,d}(k) over the support d: P(k same-block neighbors | degree d).

    Hypergeometric in log space: C(d,k) C(N-1-d, b-1-k) / C(N-1, b-1) with
    block size b = N // m.
    """
    b = block_size(N, m)
    if not 0 <= k <= b - 1:
        raise ValueError(f"k must lie in [0, {b - 1}]")
    d = np.arange(k, N - b + k + 1)

    def lchoose(n, r):
        return gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)

    logh = lchoose(d, k) + lchoose(N - 1 - d, b - 1 - k) - lchoose(N - 1, b - 1)
    return d, np.exp(logh)


def kernel_mass_exact(N: int, m: int, k: int) -> Fraction:
    b = block_size(N, m)
    num = sum(math.comb(d, k) * math.comb(N - 1 - d, b - 1 - k) for d in range(k, N))
    return Fraction(num, math.comb(N - 1, b - 1))


def kernel_mass_check(N: int, m: int, k: int, tol: float = 1e-9) -> VerificationResult:
    """Sum_d H_{N,d}(k) = N / b, which is m whenever m divides N."""
    _, h = thinning_kernel(N, m, k)
    return verdict(
        f"kernel_mass[N={N},m={m},k={k}]",
        float(np.sum(h)),
        N / block_size(N, m),
        tol,
        "Vandermonde: the thinning kernel has total mass N / (N/m) = m",
        relative=True,
    )


def order_stat_moments(N: int, m: int, k: int) -> tuple[float, float]:
    """Closed-form mean and variance of d under P_k: the (k+1)-th order
    statistic of a uniform b-subset of {1..N}, shifted by -1."""
    L, r = N, block_size(N, m)
    j = k + 1
    mean = j * (L + 1) / (r + 1) - 1
    var = j * (r - j + 1) * (L + 1) * (L - r) / ((r + 1) ** 2 * (r + 2))
    return mean, var


def order_stat_summed(N: int, m: int, k: int) -> tuple[float, float]:
    d, h = thinning_kernel(N, m, k)
    p = h * block_size(N, m) / N
    mean = float(np.sum(d * p))
    return mean, float(np.sum((d - mean) ** 2 * p))


def order_stat_monte_carlo(N: int, m: int, k: int, trials: int, rng) -> np.ndarray:
    b = block_size(N, m)
    keys = rng.random((trials, N))
    subsets = np.argpartition(keys, b - 1, axis=1)[:, :b] + 1
    return np.sort(subsets, axis=1)[:, k] - 1.0


def order_stat_moment_check(N, m, k, trials=20000, seed=0, tol=1e-9) -> list[VerificationResult]:
    prov = "kernel mean/variance equal those of an order statistic of a uniform (N/m)-subset"
    mean, var = order_stat_moments(N, m, k)
    s_mean, s_var = order_stat_summed(N, m, k)
    tag = f"N={N},m={m},k={k}"
    out = [
        verdict(f"order_stat.mean_sum[{tag}]", s_mean, mean, tol, prov, relative=True),
        verdict(f"order_stat.var_sum[{tag}]", s_var, var, tol, prov, relative=True) if var > 0
        else verdict(f"order_stat.var_sum[{tag}]", s_var, var, tol, prov),
    ]
    if trials:
        x = order_stat_monte_carlo(N, m, k, trials, np.random.default_rng(seed))
        se = math.sqrt(var / trials) if var > 0 else 0.0
        out.append(verdict(f"order_stat.mean_mc[{tag}]", x.mean(), mean, 3 * se + 1e-12, prov))
    return out


def clauset_alpha(degrees, d_min: float) -> tuple[float, int]:
    """Discrete power-law MLE 1 + n / sum ln(d / (d_min - 1/2)) over d >= d_min."""
    d = np.asarray(degrees, dtype=float)
    tail = d[d >= d_min]
    if tail.size == 0:
        return float("nan"), 0
    s = np.sum(np.log(tail / (d_min - 0.5)))
    return (1.0 + tail.size / s if s > 0 else float("nan")), int(tail.size)


def default_d_min(degrees, quantile: float = 0.9) -> int:
    return max(1, int(np.ceil(np.quantile(np.asarray(degrees), quantile))))


def degree_tail_check(
    g: Graph,
    m_list,
    seeds,
    tail_tolerance: float = 0.3,
    min_tail: int = 50,
    quantile: float = 0.9,
) -> list[VerificationResult]:
    """Clauset exponent of RNS batch degrees vs the full graph.

    All fits share one d_min, the full graph's ``quantile`` degree.  A second
    record per m > 1 checks that the batch tail mass at the full graph's
    median degree is smaller than the full graph's (direction of the
    m^(1-alpha) prefactor).
    """
    prov = "RNS thinning keeps the power-law tail exponent of the degree distribution"
    deg = g.degrees
    if np.all(deg == deg[0]):
        return [inconclusive("degree_tail", prov + " (regular graph: no tail)")]
    d_min = default_d_min(deg, quantile)
    a_full, n_full = clauset_alpha(deg, d_min)
    if n_full < min_tail:
        return [inconclusive("degree_tail", prov + " (tail too short)")]
    results = []
    for m in m_list:
        alphas, shrink = [], []
        for seed in seeds:
            for b in rns_epoch(g, m, rng_for(seed, "degree_tail", m)):
                bd = b.graph.degrees
                a, n_tail = clauset_alpha(bd, d_min)
                if n_tail >= min_tail and np.isfinite(a):
                    alphas.append(a)
                shrink.append(tail_frequency_ratio(deg, bd))
        name = f"degree_tail[m={m}]"
        if not alphas:
            results.append(inconclusive(name, prov + " (batch tails too short)", reference=a_full))
            continue
        results.append(verdict(name, float(np.mean(alphas)), a_full, tail_tolerance, prov))
        if m > 1:
            results.append(
                upper_bound(
                    f"degree_tail.prefactor_direction[m={m}]",
                    float(np.mean(shrink)),
                    1.0,
                    "batch tail frequencies scale down by m^(1-alpha)",
                )
            )
    return results


def tail_frequency_ratio(full_degrees, batch_degrees, k: int | None = None) -> float:
    """P_batch(D >= k) / P_full(D >= k) at the full graph's median degree."""
    full_degrees = np.asarray(full_degrees)
    k = int(np.median(full_degrees)) if k is None else k
    pf = np.mean(full_degrees >= k)
    return float(np.mean(np.asarray(batch_degrees) >= k) / pf) if pf > 0 else float("nan")


# ----------------------------------------------------------- RNS bias


def same_block_probability(N: int, m: int) -> float:
    """P(u in B and w in B) for a fixed block B of size b = N // m."""
    b = block_size(N, m)
    return b * (b - 1) / (N * (N - 1))


def ordered_partitions(N: int, m: int):
    """All ordered partitions of range(N) into m blocks of size N // m.

    Leftover nodes (N mod m) form an unused remainder, as in RNS.
    """
    b = block_size(N, m)

    def rec(remaining: tuple, left: int):
        if left == 0:
            yield ()
            return
        for block in itertools.combinations(remaining, b):
            rest = tuple(x for x in remaining if x not in block)
            for tail in rec(rest, left - 1):
                yield (block,) + tail

    yield from rec(tuple(range(N)), m)


def exhaustive_pair_probability(N: int, m: int, u: int = 0, w: int = 1) -> Fraction:
    hits = total = 0
    for part in ordered_partitions(N, m):
        total += 1
        hits += u in part[0] and w in part[0]
    return Fraction(hits, total)


def exhaustive_marginal(N: int, m: int, v: int = 0) -> Fraction:
    hits = total = 0
    for part in ordered_partitions(N, m):
        total += 1
        hits += v in part[0]
    return Fraction(hits, total)


def pair_probability_check(N, m, trials=10_000, seed=0) -> VerificationResult:
    prov = "edge kept in a block with probability (N/m)(N/m-1)/(N(N-1))"
    ref = same_block_probability(N, m)
    if N <= 12:
        exact = exhaustive_pair_probability(N, m)
        return verdict(f"rns.pair_probability_exhaustive[N={N},m={m}]", float(exact), ref, 1e-15, prov)
    rng = rng_for(seed, "pair_probability", N, m)
    hits = 0
    for _ in range(trials):
        block = rns_blocks(N, m, rng)[0]
        hits += bool(np.isin([0, 1], block).all())
    freq = hits / trials
    se = math.sqrt(ref * (1 - ref) / trials)
    return verdict(f"rns.pair_probability_mc[N={N},m={m}]", freq, ref, 3 * se, prov)


def marginal_check(N, m, trials=10_000, seed=0, node=0) -> VerificationResult:
    prov = "each RNS block is a uniform (N/m)-subset, so P(v in B) = 1/m"
    b = block_size(N, m)
    ref = b / N
    if N <= 12:
        return verdict(f"rns.marginal_exhaustive[N={N},m={m}]", float(exhaustive_marginal(N, m, node)), ref, 1e-15, prov)
    rng = rng_for(seed, "marginal", N, m)
    hits = sum(node in rns_blocks(N, m, rng)[0] for _ in range(trials))
    se = math.sqrt(ref * (1 - ref) / trials)
    return verdict(f"rns.marginal_mc[N={N},m={m}]", hits / trials, ref, 3 * se, prov)


@dataclass
class BiasDraws:
    L_full: float
    batch_losses: np.ndarray  # L_hat^B for block 0 of each usable partition
    full_subset_losses: np.ndarray  # L_tilde^B for the same blocks
    sigma_hat: float


def rns_bias_draws(g: Graph, cfg: ModelConfig, w, m: int, trials: int, seed: int = 0) -> BiasDraws:
    full_logits = forward(w, cfg, g)
    full_losses = node_losses(full_logits, g.labels)
    train = g.train_nodes
    L_full = float(full_losses[train].mean())
    rng = rng_for(seed, "rns_bias", m)
    hat, tilde = [], []
    dev_sum = np.zeros(g.num_nodes)
    dev_cnt = np.zeros(g.num_nodes)
    for _ in range(trials):
        for k, block in enumerate(rns_blocks(g.num_nodes, m, rng)):
            b = induced_subgraph(g, block, "rns")
            if b.train_targets.size == 0:
                continue
            logits = forward(w, cfg, b)
            dev = np.linalg.norm(logits - full_logits[b.global_ids], axis=1)
            dev_sum[b.global_ids] += dev
            dev_cnt[b.global_ids] += 1
            if k == 0:
                t = b.train_targets
                hat.append(float(node_losses(logits[t], b.labels[t]).mean()))
                tilde.append(float(full_losses[b.global_ids[t]].mean()))
    seen = train[dev_cnt[train] > 0]
    sigma = float(np.max(dev_sum[seen] / dev_cnt[seen])) if seen.size else 0.0
    return BiasDraws(L_full, np.array(hat), np.array(tilde), sigma)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def rns_bias_checks(g: Graph, cfg: ModelConfig, w, m: int, trials: int = 500, seed: int = 0) -> list[VerificationResult]:
    """(a) node subsampling is unbiased; (b) |bias| <= sqrt(2) sigma_hat; (c) pair probability."""
    if trials < 100:
        raise ValueError("rns_bias_checks needs at least 100 trials")
    draws = rns_bias_draws(g, cfg, w, m, trials, seed)
    mt, st = _mean_se(draws.full_subset_losses)
    mh, sh = _mean_se(draws.batch_losses)
    tag = f"m={m}"
    return [
        verdict(
            f"rns_bias.node_subsampling_unbiased[{tag}]",
            mt,
            draws.L_full,
            3 * st + 1e-12,
            "full-graph losses averaged over an RNS block's train nodes are unbiased for L_full",
        ),
        upper_bound(
            f"rns_bias.edge_removal_bound[{tag}]",
            mh - draws.L_full,
            CE_LIPSCHITZ * draws.sigma_hat + 3 * sh + 1e-12,
            "|E[L_hat^B] - L_full| <= C_l sigma(w) with C_l = sqrt(2)",
        ),
        pair_probability_check(g.num_nodes, m, trials=max(trials, 10_000), seed=seed),
    ]


def sigma_vs_m(g: Graph, cfg: ModelConfig, w, m_list, trials: int = 50, seed: int = 0) -> list[tuple[int, float]]:
    """Monte Carlo edge-removal sensitivity for each m (a trend, not a gate)."""
    return [(m, rns_bias_draws(g, cfg, w, m, trials, seed).sigma_hat) for m in m_list]


def induced_edge_count_check(g: Graph, m: int, epochs: int = 100, seed: int = 0) -> VerificationResult:
    """Mean induced edges per RNS batch vs |E| b(b-1)/(N(N-1))."""
    ref = g.num_edges * same_block_probability(g.num_nodes, m)
    per_epoch = []
    for e in range(epochs):
        blocks = rns_blocks(g.num_nodes, m, rng_for(seed, "edge_count", e))
        per_epoch.append(np.mean([induced_subgraph(g, blk).graph.num_edges for blk in blocks]))
    mean, se = _mean_se(np.array(per_epoch))
    return verdict(
        f"rns.induced_edge_count[m={m}]",
        mean,
        ref,
        3 * se,
        "each edge survives in a given batch with probability ~1/m^2",
    )


# ------------------------------------------------------ sampler sweeps


@dataclass(frozen=True)
class SamplerPoint:
    sampler: str
    seed: int
    alpha_err: float
    R: float
    loss_variance: float
    bias_abs: float
    grad_bar_norm_sq: float


def batch_alpha(batches, d_min: float, min_tail=10) -> float:
    """Mean Clauset exponent over batches with at least ``min_tail`` tail nodes."""
    alphas = []
    for b in batches:
        a, n = clauset_alpha(b.structure_graph().degrees, d_min)
        if n >= min_tail and np.isfinite(a):
            alphas.append(a)
    return float(np.mean(alphas)) if alphas else float("nan")


def sampler_sweep(
    g: Graph,
    cfg: ModelConfig,
    sampler_configs: dict[str, SamplerConfig],
    seeds,
    batches_per_seed: int = 50,
    with_alpha: bool = True,
    quantile: float = 0.9,
) -> list[SamplerPoint]:
    """One point per (sampler, seed) at a random initialisation.

    The initialisation depends only on the seed, so samplers are compared at
    the same parameters.
    """
    d_min = default_d_min(g.degrees, quantile)
    a_full = clauset_alpha(g.degrees, d_min)[0] if with_alpha else float("nan")
    points = []
    for seed in seeds:
        w = init_params(cfg, int(derive_seed(seed, "init").generate_state(1)[0]))
        for name, scfg in sampler_configs.items():
            batches = Sampler(g, scfg, seed).batches(batches_per_seed)
            rep = measure(w, cfg, g, batches)
            a = batch_alpha(batches, d_min) if with_alpha else float("nan")
            points.append(
                SamplerPoint(name, seed, abs(a - a_full), rep.R, rep.loss_variance, rep.bias_abs, rep.grad_bar_norm_sq)
            )
    return points


def ordering_checks(points, metric="R", reference="rns", threshold=0.8) -> list[VerificationResult]:
    """Fraction of seeds where the reference sampler has the smaller metric."""
    by = {}
    for p in points:
        by.setdefault(p.sampler, {})[p.seed] = getattr(p, metric)
    if reference not in by:
        return []
    out = []
    for name, vals in by.items():
        if name == reference:
            continue
        seeds = sorted(set(vals) & set(by[reference]))
        wins = [by[reference][s] < vals[s] for s in seeds]
        frac = float(np.mean(wins)) if wins else 0.0
        out.append(
            verdict(
                f"ordering.{metric}[{reference}<{name}]",
                frac,
                1.0,
                1.0 - threshold,
                f"{reference} gives the lowest {metric} across samplers at random init",
            )
        )
    return out


def alpha_vs_R_sweep(g, cfg, sampler_configs, seeds, batches_per_seed=50):
    """Rows (sampler, seed, alpha_err, R) plus the bottom-left summary checks."""
    points = sampler_sweep(g, cfg, sampler_configs, seeds, batches_per_seed)
    rows = [(p.sampler, p.seed, p.alpha_err, p.R) for p in points]
    summary = []
    if "rns" in sampler_configs:
        summary = ordering_checks(points, "R", threshold=0.5) + ordering_checks(points, "alpha_err", threshold=0.5)
    return rows, summary


def write_alpha_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ALPHA_CSV_HEADER)
        for name, seed, err, R in rows:
            writer.writerow([name, seed, repr(float(err)), repr(float(R))])
