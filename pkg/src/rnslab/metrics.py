"""Implicit-objective quantities at a parameter point, measured from a batch set."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .gnn import ModelConfig, forward, loss_and_grad, node_losses
from .graph import Graph, full_batch

FIG3_CSV_HEADER = ["sampler", "seed", "bias", "loss_var", "R", "grad_norm_sq"]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RegularizationReport:
    L_full: float
    L_bar: float
    bias_abs: float
    loss_variance: float
    grad_bar_norm_sq: float
    R: float
    per_batch_losses: np.ndarray
    m_effective: int
    grad_bar: np.ndarray
    mean_batch_grad_norm_sq: float


def usable(batches) -> list:
    return [b for b in batches if b.train_targets.size > 0]


def measure(w, model_cfg: ModelConfig, g: Graph, batches) -> RegularizationReport:
    """L_full, L_bar, |bias|, loss variance, ||grad L_bar||^2 and R(w).

    R is the population variance of the batch gradients around their mean;
    the identity mean ||g_k||^2 = ||g_bar||^2 + R is checked on every call.
    """
    batches = usable(batches)
    if not batches:
        raise MetricsError("no batch with a nonempty target set")
    full = loss_and_grad(w, model_cfg, full_batch(g))
    results = [loss_and_grad(w, model_cfg, b) for b in batches]
    losses = np.array([r.loss for r in results])
    grads = np.stack([r.grad for r in results])
    m = len(batches)
    grad_bar = grads.mean(axis=0)
    R = float(np.mean(np.sum((grads - grad_bar) ** 2, axis=1)))
    gbar_sq = float(grad_bar @ grad_bar)
    mean_sq = float(np.mean(np.sum(grads**2, axis=1)))
    if abs(mean_sq - (gbar_sq + R)) > 1e-9 * max(1.0, mean_sq):
        raise MetricsError("variance decomposition identity violated")
    L_bar = float(losses.mean())
    return RegularizationReport(
        L_full=full.loss,
        L_bar=L_bar,
        bias_abs=abs(full.loss - L_bar),
        loss_variance=float(losses.var()),
        grad_bar_norm_sq=gbar_sq,
        R=R,
        per_batch_losses=losses,
        m_effective=m,
        grad_bar=grad_bar,
        mean_batch_grad_norm_sq=mean_sq,
    )


def modified_loss_value(w, model_cfg: ModelConfig, batches, eps: float) -> float:
    """L_bar + (eps/4) ||grad L_bar||^2 + (eps/4) R."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    batches = usable(batches)
    if not batches:
        raise MetricsError("no batch with a nonempty target set")
    results = [loss_and_grad(w, model_cfg, b) for b in batches]
    grads = np.stack([r.grad for r in results])
    grad_bar = grads.mean(axis=0)
    R = float(np.mean(np.sum((grads - grad_bar) ** 2, axis=1)))
    L_bar = float(np.mean([r.loss for r in results]))
    return L_bar + eps / 4 * float(grad_bar @ grad_bar) + eps / 4 * R


def full_node_losses(w, model_cfg: ModelConfig, g: Graph) -> np.ndarray:
    return node_losses(forward(w, model_cfg, g), g.labels)


def output_deviation(w, model_cfg: ModelConfig, g: Graph, batch, full_logits=None) -> np.ndarray:
    """||f(w, X_B, E_B)[v] - f(w, X, E)[v]|| for every v in an induced batch."""
    if full_logits is None:
        full_logits = forward(w, model_cfg, g)
    return np.linalg.norm(forward(w, model_cfg, batch) - full_logits[batch.global_ids], axis=1)


def sigma_estimate(w, model_cfg: ModelConfig, g: Graph, batches) -> float:
    """Monte Carlo edge-removal sensitivity.

    For each training node, average its output deviation over the batches
    that contain it; return the maximum of these conditional means.
    """
    full_logits = forward(w, model_cfg, g)
    total = np.zeros(g.num_nodes)
    count = np.zeros(g.num_nodes)
    for b in usable(batches):
        dev = output_deviation(w, model_cfg, g, b, full_logits)
        total[b.global_ids] += dev
        count[b.global_ids] += 1
    train = g.train_nodes
    seen = train[count[train] > 0]
    if seen.size == 0:
        return 0.0
    return float(np.max(total[seen] / count[seen]))


def write_fig3_csv(rows, path) -> None:
    """rows: iterable of (sampler, seed, RegularizationReport)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIG3_CSV_HEADER)
        for name, seed, rep in rows:
            writer.writerow(
                [name, seed, repr(rep.bias_abs), repr(rep.loss_variance), repr(rep.R), repr(rep.grad_bar_norm_sq)]
            )
