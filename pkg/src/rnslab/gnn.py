"""Two-architecture message-passing GNN (GCN, GraphSAGE-mean) in float64.

Parameters live in one flat vector; :class:`ParamLayout` maps it to per-layer
matrices.  Gradients are hand-written reverse mode through the sparse
aggregation operators, and checked against central differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .graph import Batch, Graph, full_batch

ARCHS = ("gcn", "sage_mean")
ACTIVATIONS = ("relu", "identity")

# ||softmax(z) - onehot||_2 <= sqrt(2): Lipschitz constant of cross-entropy in the logits
CE_LIPSCHITZ = np.sqrt(2.0)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "gcn"
    depth: int = 2
    hidden_dim: int = 16
    num_classes: int = 2
    in_dim: int = 8
    activation: str = "relu"
    init_scale: float = 1.0
    init_seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ModelError(f"unknown arch {self.arch!r}")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"unknown activation {self.activation!r}")
        if self.depth < 1 or min(self.hidden_dim, self.num_classes, self.in_dim) < 1:
            raise ModelError("depth and all dimensions must be positive")

    @property
    def dims(self) -> list[int]:
        return [self.in_dim] + [self.hidden_dim] * (self.depth - 1) + [self.num_classes]


class ParamLayout:
    """Shape table of the flat parameter vector, layer by layer."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        names = ("W", "b") if cfg.arch == "gcn" else ("W_self", "W_nbr", "b")
        self.entries: list[tuple[int, str, tuple]] = []
        dims = cfg.dims
        for layer in range(cfg.depth):
            d_in, d_out = dims[layer], dims[layer + 1]
            for name in names:
                shape = (d_out,) if name == "b" else (d_in, d_out)
                self.entries.append((layer, name, shape))
        self.sizes = [int(np.prod(s)) for _, _, s in self.entries]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    def unflatten(self, w: np.ndarray) -> list[dict[str, np.ndarray]]:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.size,):
            raise ModelError(f"parameter vector has shape {w.shape}, expected ({self.size},)")
        layers: list[dict[str, np.ndarray]] = [{} for _ in range(self.cfg.depth)]
        for (layer, name, shape), a, b in zip(self.entries, self.offsets[:-1], self.offsets[1:]):
            layers[layer][name] = w[a:b].reshape(shape)
        return layers

    def flatten(self, layers: list[dict[str, np.ndarray]]) -> np.ndarray:
        return np.concatenate([layers[layer][name].ravel() for layer, name, _ in self.entries])


@lru_cache(maxsize=64)
def layout(cfg: ModelConfig) -> ParamLayout:
    return ParamLayout(cfg)


def init_params(cfg: ModelConfig, seed: int | None = None) -> np.ndarray:
    """Uniform in +-scale/sqrt(fan_in) for every weight and bias."""
    lay = layout(cfg)
    rng = np.random.default_rng(cfg.init_seed if seed is None else seed)
    dims = cfg.dims
    parts = []
    for (layer, _, shape), size in zip(lay.entries, lay.sizes):
        bound = cfg.init_scale / np.sqrt(dims[layer])
        parts.append(rng.uniform(-bound, bound, size))
    return np.concatenate(parts)


@dataclass(frozen=True)
class LossGrad:
    loss: float
    grad: np.ndarray


# ---------------------------------------------------------------- operators


def _sym_norm(a: sp.spmatrix) -> sp.csr_matrix:
    a = sp.csr_matrix(a) + sp.identity(a.shape[0], format="csr")
    dr = np.asarray(a.sum(axis=1)).ravel() ** -0.5
    dc = np.asarray(a.sum(axis=0)).ravel() ** -0.5
    return sp.csr_matrix(sp.diags(dr) @ a @ sp.diags(dc))


def _mean_op(a: sp.spmatrix) -> sp.csr_matrix:
    a = sp.csr_matrix(a, copy=True)
    a.setdiag(0)
    a.eliminate_zeros()
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ a)


def _as_batch(data) -> Batch:
    return full_batch(data) if isinstance(data, Graph) else data


def propagation_ops(data, arch: str, depth: int) -> list[sp.csr_matrix]:
    """One aggregation operator per layer, in application order.

    GCN uses D_r^-1/2 (A + I) D_c^-1/2 (the usual symmetric normalisation for
    an undirected graph); SAGE uses the row-mean over neighbors, which is the
    zero row for a node without neighbors.
    """
    batch = _as_batch(data)
    key = ("ops", arch)
    if key not in batch._cache:
        if batch.graph is not None:
            a = batch.graph.adjacency()
            op = _sym_norm(a) if arch == "gcn" else _mean_op(a)
            batch._cache[key] = [op]
        elif arch == "gcn" and batch.layer_weights is not None:
            batch._cache[key] = [sp.csr_matrix(x) for x in batch.layer_weights]
        else:
            f = _sym_norm if arch == "gcn" else _mean_op
            batch._cache[key] = [f(x) for x in batch.layers]
    ops = batch._cache[key]
    if len(ops) == 1:
        return ops * depth
    if len(ops) != depth:
        raise ModelError(f"batch has {len(ops)} layers but model depth is {depth}")
    return ops


# ----------------------------------------------------------------- forward


def _forward(w, cfg: ModelConfig, data):
    batch = _as_batch(data)
    x = batch.features
    if x.shape[1] != cfg.in_dim:
        raise ModelError(f"feature dim {x.shape[1]} != model in_dim {cfg.in_dim}")
    params = layout(cfg).unflatten(w)
    ops = propagation_ops(batch, cfg.arch, cfg.depth)
    h = x
    cache = []
    for layer, (p, op) in enumerate(zip(params, ops)):
        agg = op @ h
        if cfg.arch == "gcn":
            z = agg @ p["W"] + p["b"]
        else:
            z = h @ p["W_self"] + agg @ p["W_nbr"] + p["b"]
        cache.append((h, agg, z))
        last = layer == cfg.depth - 1
        h = z if last or cfg.activation == "identity" else np.maximum(z, 0.0)
    return h, cache, params, ops


def forward(w, cfg: ModelConfig, data) -> np.ndarray:
    """Logits for every node of ``data`` (a Graph or a Batch)."""
    return _forward(w, cfg, data)[0]


def pre_activations(w, cfg: ModelConfig, data) -> list[np.ndarray]:
    return [z for _, _, z in _forward(w, cfg, data)[1]]


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def node_losses(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Cross-entropy of every row of ``logits`` against ``labels``."""
    return -_log_softmax(logits)[np.arange(labels.size), labels]


def _targets(data, targets) -> np.ndarray:
    t = _as_batch(data).train_targets if targets is None else np.asarray(targets)
    if t.size == 0:
        raise ModelError("empty target set")
    return t


def loss(w, cfg: ModelConfig, data, targets=None) -> float:
    t = _targets(data, targets)
    logits = forward(w, cfg, data)
    return float(node_losses(logits[t], _as_batch(data).labels[t]).mean())


def loss_and_grad(w, cfg: ModelConfig, data, targets=None) -> LossGrad:
    """Mean cross-entropy over ``targets`` (default: the batch's train targets)."""
    batch = _as_batch(data)
    t = _targets(batch, targets)
    logits, cache, params, ops = _forward(w, cfg, batch)
    logp = _log_softmax(logits[t])
    y = batch.labels[t]
    value = float(-logp[np.arange(t.size), y].mean())

    dz = np.zeros_like(logits)
    probs = np.exp(logp)
    probs[np.arange(t.size), y] -= 1.0
    dz[t] = probs / t.size  # targets are distinct

    grads: list[dict[str, np.ndarray]] = [{} for _ in range(cfg.depth)]
    for layer in range(cfg.depth - 1, -1, -1):
        h, agg, z = cache[layer]
        if layer < cfg.depth - 1 and cfg.activation == "relu":
            dz = dz * (z > 0)
        p, op, gl = params[layer], ops[layer], grads[layer]
        gl["b"] = dz.sum(axis=0)
        if cfg.arch == "gcn":
            gl["W"] = agg.T @ dz
            if layer:
                dz = op.T @ (dz @ p["W"].T)
        else:
            gl["W_self"] = h.T @ dz
            gl["W_nbr"] = agg.T @ dz
            if layer:
                dz = dz @ p["W_self"].T + op.T @ (dz @ p["W_nbr"].T)
    return LossGrad(value, layout(cfg).flatten(grads))


# ------------------------------------------------------- finite differences


def central_difference(fn, w: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Coordinate-wise central-difference gradient of a scalar function."""
    if h <= 0:
        raise ValueError("h must be positive")
    w = np.array(w, dtype=np.float64)
    out = np.empty_like(w)
    for i in range(w.size):
        orig = w[i]
        w[i] = orig + h
        fp = fn(w)
        w[i] = orig - h
        fm = fn(w)
        w[i] = orig
        out[i] = (fp - fm) / (2 * h)
    return out


def fd_grad(w, cfg: ModelConfig, data, targets=None, h: float = 1e-5) -> np.ndarray:
    return central_difference(lambda x: loss(x, cfg, data, targets), w, h)


def directional_hvp(grad_fn, w: np.ndarray, v: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Hessian-vector product from central differences of a gradient along v."""
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(w)
    u = v / norm
    return norm * (grad_fn(w + h * u) - grad_fn(w - h * u)) / (2 * h)


def hvp(w, cfg: ModelConfig, data, targets, v, h: float = 1e-5) -> np.ndarray:
    """H(w) v for the batch loss; exact up to O(h^2) for smooth activations."""
    return directional_hvp(lambda x: loss_and_grad(x, cfg, data, targets).grad, w, v, h)


def modified_grad(w, cfg: ModelConfig, batches, eps: float, h: float = 1e-5) -> np.ndarray:
    """Gradient of mean_k L_k + (eps / 4m) sum_k ||grad L_k||^2.

    Equals grad(L_bar) + (eps/4) grad(||grad L_bar||^2 + R); ``eps`` is the
    per-step learning rate.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    batches = list(batches)
    if not batches:
        raise ModelError("no batches")
    m = len(batches)
    grads = [loss_and_grad(w, cfg, b).grad for b in batches]
    out = sum(grads) / m
    if eps == 0:
        return out
    corr = sum(hvp(w, cfg, b, None, g, h) for b, g in zip(batches, grads))
    return out + eps / (2 * m) * corr


# -------------------------------------------------------------- checkpoints


def save_params(w: np.ndarray, cfg: ModelConfig, path) -> None:
    """CSV checkpoint: a ``# layer,name,shape`` header line per tensor, then one value per line."""
    lay = layout(cfg)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (lay.size,):
        raise ModelError(f"parameter vector has shape {w.shape}, expected ({lay.size},)")
    with open(path, "w") as fh:
        for layer, name, shape in lay.entries:
            fh.write(f"# {layer},{name},{'x'.join(map(str, shape))}\n")
        fh.writelines(f"{x!r}\n" for x in w.tolist())


def load_params(path, cfg: ModelConfig) -> np.ndarray:
    lay = layout(cfg)
    header, values = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                layer, name, shape = line[1:].strip().split(",")
                header.append((int(layer), name, tuple(int(s) for s in shape.split("x"))))
            elif line.strip():
                values.append(float(line))
    if header != lay.entries:
        raise ModelError("checkpoint shapes do not match the model config")
    return np.array(values, dtype=np.float64)
