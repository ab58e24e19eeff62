"""Full-batch Adam training with step-decayed learning rate, best-validation
checkpointing with optional patience, and accuracy evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .graph import SparseGraph, set_self_loops
from .model import ForwardOutputs, ModelParams, forward, init_params, loss

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m={k: np.zeros_like(p.data) for k, p in params.named().items()},
                   v={k: np.zeros_like(p.data) for k, p in params.named().items()})


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


@dataclass
class RunResult:
    test_accuracy: float
    best_val_epoch: int
    val_curve: list[EpochRecord]
    wall_clock_ms: float
    gamma_histogram: list[float] = field(default_factory=list)


def adam_step(params: ModelParams, state: AdamState, lr: float,
              weight_decay: float, include_bias: bool = True) -> AdamState:
    """One Adam update (bias-corrected) with classic L2 added to gradients."""
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.t
    bc2 = 1.0 - ADAM_BETA2 ** state.t
    for name, p in params.named().items():
        if state.m[name].shape != p.data.shape:
            raise ValueError(f"optimizer state shape mismatch for {name}")
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if weight_decay and (include_bias or not name.startswith("b")):
            g = g + weight_decay * p.data
        state.m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return state


def evaluate(out: ForwardOutputs, labels: np.ndarray, mask: np.ndarray) -> float:
    """Argmax-match rate over the masked nodes; argmax breaks ties toward
    the lowest class index."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("evaluation mask is empty")
    pred = np.argmax(out.y_hat.data[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels, dtype=np.int64)[mask]))


def lr_at(cfg: ExperimentConfig, epoch: int) -> float:
    if cfg.lr_drop_every:
        return cfg.lr0 * cfg.lr_drop_factor ** (epoch // cfg.lr_drop_every)
    return cfg.lr0


def _check_splits(train_idx, val_idx, test_idx, n_nodes: int) -> None:
    for name, idx in (("train", train_idx), ("val", val_idx), ("test", test_idx)):
        if len(idx) == 0:
            raise ValueError(f"{name} split is empty")
        arr = np.asarray(idx)
        if arr.min() < 0 or arr.max() >= n_nodes:
            raise ValueError(f"{name} split contains out-of-range node indices")
    a, b, c = map(set, (map(int, train_idx), map(int, val_idx), map(int, test_idx)))
    if a & b or a & c or b & c:
        raise ValueError("splits are not disjoint")


def train(g: SparseGraph, x, labels: np.ndarray, splits, cfg: ExperimentConfig) -> RunResult:
    """Train on the labeled split, checkpoint the best validation epoch
    (accuracy with loss tiebreak, or loss when configured), and report test
    accuracy at that checkpoint. Deterministic given cfg.seed."""
    cfg.validate()
    train_idx, val_idx, test_idx = splits
    _check_splits(train_idx, val_idx, test_idx, g.n_nodes)
    started = time.perf_counter()

    rng = np.random.default_rng(cfg.seed)
    g_run = set_self_loops(g, cfg.self_loops)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    params = init_params(x.shape[1], cfg.hidden, n_classes, rng)
    state = AdamState.for_params(params)

    best_acc, best_loss, best_epoch = -1.0, np.inf, 0
    best_snap = params.snapshot()
    since_improved = 0
    curve: list[EpochRecord] = []

    for epoch in range(cfg.epochs):
        out = forward(params, x, g_run, cfg, training=True, rng=rng)
        train_loss = loss(out, labels, train_idx, cfg.lambda_ent, cfg.entropy_reduction)
        params.zero_grad()
        out.tape.backward(train_loss)
        adam_step(params, state, lr_at(cfg, epoch), cfg.weight_decay,
                  include_bias=cfg.wd_include_bias)

        ev = forward(params, x, g_run, cfg, training=False, rng=rng)
        val_acc = evaluate(ev, labels, val_idx)
        val_loss = loss(ev, labels, val_idx, 0.0).item()
        curve.append(EpochRecord(epoch, train_loss.item(), val_loss, val_acc))

        if cfg.early_stop_metric == "loss":
            improved = val_loss < best_loss
        else:
            improved = val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss)
        if improved:
            best_acc, best_loss, best_epoch = val_acc, val_loss, epoch
            best_snap = params.snapshot()
            since_improved = 0
        else:
            since_improved += 1
            if cfg.early_stop_window and since_improved >= cfg.early_stop_window:
                break

    params.restore(best_snap)
    final = forward(params, x, g_run, cfg, training=False, rng=rng)
    test_acc = evaluate(final, labels, test_idx)
    gamma_hist = (final.gamma.gamma.data[:, 0].tolist()
                  if final.gamma is not None else [])
    return RunResult(
        test_accuracy=test_acc,
        best_val_epoch=best_epoch,
        val_curve=curve,
        wall_clock_ms=(time.perf_counter() - started) * 1e3,
        gamma_histogram=gamma_hist,
    )
