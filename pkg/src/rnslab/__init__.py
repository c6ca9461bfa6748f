"""Random Node Sampling laboratory: graphs, samplers, a small GNN, training
regimes and numerical checks of their implicit-regularization theory."""

from .config import ExperimentConfig, load_config
from .generators import GenConfig, generate
from .gnn import ModelConfig, forward, init_params, loss_and_grad
from .graph import Batch, Graph, build_graph, induced_subgraph, structural_stats
from .metrics import RegularizationReport, measure
from .samplers import Sampler, SamplerConfig
from .theory import VerificationResult
from .trainer import OptimConfig, Regime, TrainTrace, train

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ExperimentConfig",
    "GenConfig",
    "Graph",
    "ModelConfig",
    "OptimConfig",
    "Regime",
    "RegularizationReport",
    "Sampler",
    "SamplerConfig",
    "TrainTrace",
    "VerificationResult",
    "build_graph",
    "forward",
    "generate",
    "induced_subgraph",
    "init_params",
    "load_config",
    "loss_and_grad",
    "measure",
    "structural_stats",
    "train",
]
