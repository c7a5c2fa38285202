"""Topology-aware graph augmentation for self-supervised brain-network learning."""

from tga.augment import AugmentStrategy, AugmentedView, make_views
from tga.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from tga.evaluation import EvalReport, cross_validate, top_k_edges
from tga.graphs import BrainGraph, TimeSeries, build_graph
from tga.train import TrainConfig, finetune, pretrain

__all__ = [
    "AugmentStrategy",
    "AugmentedView",
    "BrainGraph",
    "Checkpoint",
    "EvalReport",
    "TimeSeries",
    "TrainConfig",
    "build_graph",
    "cross_validate",
    "finetune",
    "load_checkpoint",
    "make_views",
    "pretrain",
    "save_checkpoint",
    "top_k_edges",
]

__version__ = "0.1.0"
