"""Per-dataset hyperparameter presets and the published benchmark statistics
used by the validator and the converters."""

from __future__ import annotations

from .config import ExperimentConfig

# Tuned per-dataset training recipes (hidden=64 two-layer MLP throughout).
PRESETS: dict[str, ExperimentConfig] = {
    "citeseer": ExperimentConfig(
        hidden=64, K=3, beta=0.7, leak_slope=0.05, p_drop=0.3, self_loops=True,
        epochs=200, lr0=0.03, lr_drop_every=100, lr_drop_factor=0.5,
        weight_decay=5e-4, lambda_ent=0.3, early_stop_window=None),
    "cora": ExperimentConfig(
        hidden=64, K=6, beta=0.8, leak_slope=0.05, p_drop=0.5, self_loops=True,
        epochs=100, lr0=0.01, lr_drop_every=50, lr_drop_factor=0.5,
        weight_decay=5e-4, lambda_ent=0.5, early_stop_window=10),
    "pubmed": ExperimentConfig(
        hidden=64, K=8, beta=0.85, leak_slope=0.1, p_drop=0.3, self_loops=False,
        epochs=300, lr0=0.03, lr_drop_every=100, lr_drop_factor=0.5,
        weight_decay=5e-4, lambda_ent=0.5, early_stop_window=30),
    "amazon-comp": ExperimentConfig(
        hidden=64, K=2, beta=0.95, leak_slope=0.01, p_drop=0.3, self_loops=False,
        epochs=300, lr0=0.03, lr_drop_every=None,
        weight_decay=1e-5, lambda_ent=0.1, early_stop_window=None),
    "amazon-photo": ExperimentConfig(
        hidden=64, K=2, beta=0.95, leak_slope=0.15, p_drop=0.5, self_loops=True,
        epochs=300, lr0=0.05, lr_drop_every=None,
        weight_decay=2e-7, lambda_ent=0.1, early_stop_window=20),
    "coauthor-cs": ExperimentConfig(
        hidden=64, K=4, beta=0.8, leak_slope=0.01, p_drop=0.3, self_loops=False,
        epochs=100, lr0=0.02, lr_drop_every=None,
        weight_decay=1e-6, lambda_ent=0.7, early_stop_window=20),
    "coauthor-phy": ExperimentConfig(
        hidden=64, K=6, beta=0.8, leak_slope=0.01, p_drop=0.3, self_loops=False,
        epochs=200, lr0=0.02, lr_drop_every=None,
        weight_decay=1e-6, lambda_ent=0.7, early_stop_window=20),
}

# Published statistics (nodes, undirected edges, features, classes) used to
# cross-check converted files.
BENCHMARK_STATS: dict[str, tuple[int, int, int, int]] = {
    "citeseer": (3327, 4552, 3703, 6),
    "cora": (2708, 5278, 1433, 7),
    "pubmed": (19717, 44324, 500, 3),
    "amazon-comp": (13752, 245861, 767, 10),
    "amazon-photo": (7650, 119081, 745, 8),
    "coauthor-cs": (18333, 81894, 6805, 15),
    "coauthor-phy": (34493, 247962, 8415, 5),
}

# Which split protocol each benchmark uses by default.
DEFAULT_SPLIT: dict[str, str] = {
    "citeseer": "standard",
    "cora": "standard",
    "pubmed": "standard",
    "amazon-comp": "random-per-class",
    "amazon-photo": "random-per-class",
    "coauthor-cs": "random-per-class",
    "coauthor-phy": "random-per-class",
}
