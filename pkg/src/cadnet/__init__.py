"""Semi-supervised node classification with class-attentive graph diffusion
and adaptive per-node aggregation, on a small self-contained reverse-mode
autodiff engine."""

from .adacad import ControlVector, GammaVector, adaptive_blend, control_variable, gamma_vector
from .autodiff import Tape, SparseValues, Value, leaf, sparse_leaf
from .config import ExperimentConfig
from .data import Dataset, SplitSpec, load_dataset, make_split, save_dataset
from .diffusion import (DiffusionResult, TransitionMatrix, baseline_transition,
                        cad_transition, heat_diffuse, ppr_diffuse, propagate)
from .graph import NeighborView, SparseGraph, build_graph, degree, neighbors, set_self_loops
from .model import (ForwardOutputs, ModelParams, forward, init_params, load_params,
                    loss, save_params)
from .presets import BENCHMARK_STATS, PRESETS
from .stats import StatsSummary, aggregate_stats, bootstrap_ci_mean, paired_t_test, t_cdf
from .training import AdamState, RunResult, adam_step, evaluate, train

__all__ = [
    "AdamState", "BENCHMARK_STATS", "ControlVector", "Dataset", "DiffusionResult",
    "ExperimentConfig", "ForwardOutputs", "GammaVector", "ModelParams",
    "NeighborView", "PRESETS", "RunResult", "SparseGraph", "SparseValues",
    "SplitSpec", "StatsSummary", "Tape", "TransitionMatrix", "Value",
    "adam_step", "adaptive_blend", "aggregate_stats", "baseline_transition",
    "bootstrap_ci_mean", "build_graph", "cad_transition", "control_variable",
    "degree", "evaluate", "forward", "gamma_vector", "heat_diffuse",
    "init_params", "leaf", "load_dataset", "load_params", "loss", "make_split",
    "neighbors", "paired_t_test", "ppr_diffuse", "propagate", "save_dataset",
    "save_params", "set_self_loops", "sparse_leaf", "t_cdf", "train",
]
