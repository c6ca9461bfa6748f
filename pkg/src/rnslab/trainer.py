"""Optimizers and the full / chained / accumulated training regimes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gnn import ModelConfig, forward, init_params, loss, loss_and_grad
from .graph import Graph, full_batch
from .samplers import Sampler, SamplerConfig, check_depth
from .seeding import derive_seed

OPTIMIZERS = ("sgd", "sgd_momentum", "adam")
REGIMES = ("full", "sampled_chained", "sampled_accumulated")
TRACE_CSV_HEADER = ["epoch", "train_loss", "val_acc", "test_acc", "bias", "loss_var", "R", "grad_norm_sq"]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimConfig:
    kind: str = "sgd"
    lr: float = 0.03
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    weight_decay: float = 0.0
    epochs: int = 100

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.momentum < 1 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("momentum coefficients must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class Regime:
    tag: str = "full"
    sampler: SamplerConfig | None = None

    def __post_init__(self):
        if self.tag not in REGIMES:
            raise ValueError(f"unknown regime {self.tag!r}")
        if self.tag != "full" and self.sampler is None:
            raise ValueError(f"regime {self.tag!r} needs a sampler")


# -------------------------------------------------------------- optimizers


def sgd_step(w, grad, state, cfg: OptimConfig):
    g = grad + cfg.weight_decay * w if cfg.weight_decay else grad
    return w - cfg.lr * g, state


def momentum_step(w, grad, state, cfg: OptimConfig):
    g = grad + cfg.weight_decay * w if cfg.weight_decay else grad
    v = g if state is None else cfg.momentum * state + g
    return w - cfg.lr * v, v


def adam_step(w, grad, state, cfg: OptimConfig):
    g = grad + cfg.weight_decay * w if cfg.weight_decay else grad
    if state is None:
        state = (0, np.zeros_like(w), np.zeros_like(w))
    t, m, v = state
    t += 1
    m = cfg.beta1 * m + (1 - cfg.beta1) * g
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
    m_hat = m / (1 - cfg.beta1**t)
    v_hat = v / (1 - cfg.beta2**t)
    return w - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps_adam), (t, m, v)


STEPS = {"sgd": sgd_step, "sgd_momentum": momentum_step, "adam": adam_step}


# -------------------------------------------------------------- evaluation


def average_precision(scores, labels) -> float:
    """Mean of precision@k over the ranks k of positive items (descending score)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].mean())


def evaluate(w, cfg: ModelConfig, g: Graph, split_tag="val", metric: str = "auto") -> float:
    """Accuracy on the nodes tagged ``split_tag``; average precision for 2 classes."""
    nodes = g.nodes_with_split(split_tag)
    if nodes.size == 0:
        raise ValueError(f"split {split_tag!r} is empty")
    logits = forward(w, cfg, g)[nodes]
    y = g.labels[nodes]
    if metric == "auto":
        metric = "ap" if cfg.num_classes == 2 else "accuracy"
    if metric == "ap":
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        return average_precision(p[:, 1] / p.sum(axis=1), y == 1)
    return float(np.mean(np.argmax(logits, axis=1) == y))


# ------------------------------------------------------------------- train


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    test_accuracy: float
    report: object = None


@dataclass
class TrainTrace:
    records: list[EpochRecord] = field(default_factory=list)
    skipped_batches: int = 0
    final_w: np.ndarray | None = None

    def rows(self) -> list[list]:
        out = []
        for r in self.records:
            rep = r.report
            extra = (
                [rep.bias_abs, rep.loss_variance, rep.R, rep.grad_bar_norm_sq]
                if rep is not None
                else ["", "", "", ""]
            )
            out.append([r.epoch, r.train_loss, r.val_accuracy, r.test_accuracy, *extra])
        return out

    def best_val(self) -> EpochRecord:
        """First epoch with the highest validation score."""
        if not self.records:
            raise TrainingError("empty trace")
        val = np.array([r.val_accuracy for r in self.records])
        if np.all(np.isnan(val)):
            return self.records[-1]
        return self.records[int(np.nanargmax(val))]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_CSV_HEADER)
            for row in self.rows():
                writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


@dataclass
class EpochInfo:
    """What a metric hook sees after each epoch."""

    epoch: int
    w: np.ndarray
    batches: list
    applied_grads: list


def accumulated_gradient(w, cfg: ModelConfig, batches) -> tuple[np.ndarray, int]:
    """Sum of batch gradients divided by the number of usable batches."""
    total, count = None, 0
    for b in batches:
        if b.train_targets.size == 0:
            continue
        g = loss_and_grad(w, cfg, b).grad
        total = g if total is None else total + g
        count += 1
    if count == 0:
        raise TrainingError("every batch in the epoch has an empty target set")
    return total / count, count


def train(
    g: Graph,
    model_cfg: ModelConfig,
    optim_cfg: OptimConfig,
    regime: Regime,
    seed: int = 0,
    metric_hooks: list[Callable] | None = None,
    w0: np.ndarray | None = None,
) -> TrainTrace:
    """Run ``optim_cfg.epochs`` epochs and evaluate on the full graph after each.

    Hooks are called as ``hook(info: EpochInfo)`` and may return a
    RegularizationReport, stored on the epoch record.
    """
    step = STEPS[optim_cfg.kind]
    if w0 is None:
        w = init_params(model_cfg, int(derive_seed(seed, "init").generate_state(1)[0]))
    else:
        w = np.array(w0, dtype=float)
    sampler = None
    if regime.tag != "full":
        check_depth(regime.sampler, model_cfg.depth)
        sampler = Sampler(g, regime.sampler, seed)
    state = None
    trace = TrainTrace()
    full = full_batch(g)
    for epoch in range(optim_cfg.epochs):
        applied = []
        if regime.tag == "full":
            batches = [full]
            grad = loss_and_grad(w, model_cfg, full).grad
            applied.append(grad)
            w, state = step(w, grad, state, optim_cfg)
        elif regime.tag == "sampled_chained":
            batches = sampler.epoch(epoch)
            used = 0
            for b in batches:
                if b.train_targets.size == 0:
                    trace.skipped_batches += 1
                    continue
                grad = loss_and_grad(w, model_cfg, b).grad
                applied.append(grad)
                w, state = step(w, grad, state, optim_cfg)
                used += 1
            if used == 0:
                raise TrainingError("every batch in the epoch has an empty target set")
        else:
            batches = sampler.epoch(epoch)
            grad, used = accumulated_gradient(w, model_cfg, batches)
            trace.skipped_batches += len(batches) - used
            applied.append(grad)
            w, state = step(w, grad, state, optim_cfg)

        report = None
        for hook in metric_hooks or ():
            out = hook(EpochInfo(epoch, w.copy(), batches, applied))
            if out is not None:
                report = out
        train_loss = loss(w, model_cfg, full)
        trace.records.append(
            EpochRecord(
                epoch,
                train_loss,
                evaluate(w, model_cfg, g, "val") if g.nodes_with_split("val").size else float("nan"),
                evaluate(w, model_cfg, g, "test") if g.nodes_with_split("test").size else float("nan"),
                report,
            )
        )
    trace.final_w = w
    return trace
