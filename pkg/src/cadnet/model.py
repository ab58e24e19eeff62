"""The full forward pipeline and its training losses.

Two-layer MLP embeds node features into class-dimensional representations z;
the softmax of z doubles as the per-node class likelihood p. p induces the
class-attentive transition and the local blend coefficients; K diffusion
steps and the adaptive blend produce the final representation whose softmax
is the prediction. Swapping the aggregation stage for one of the structure-
only baselines leaves the rest untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import adacad as ada
from . import diffusion as diff
from .autodiff import Tape, Value, leaf
from .config import ExperimentConfig
from .graph import SparseGraph


@dataclass
class ModelParams:
    """Learnable parameters of the two-layer embedding MLP."""

    W1: Value
    b1: Value
    W2: Value
    b2: Value

    def named(self) -> dict[str, Value]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def zero_grad(self) -> None:
        for v in self.named().values():
            v.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in self.named().items():
            v.data = snap[k].copy()


@dataclass
class ForwardOutputs:
    """Everything one forward pass produces, plus its tape for backward."""

    tape: Tape
    z: Value
    p: Value
    z_adacad: Value
    y_hat: Value
    gamma: ada.GammaVector | None
    transition: diff.TransitionMatrix | None


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(n_features: int, hidden: int, n_classes: int,
                rng: np.random.Generator) -> ModelParams:
    return ModelParams(
        W1=leaf(glorot(rng, n_features, hidden), requires_grad=True),
        b1=leaf(np.zeros((1, hidden)), requires_grad=True),
        W2=leaf(glorot(rng, hidden, n_classes), requires_grad=True),
        b2=leaf(np.zeros((1, n_classes)), requires_grad=True),
    )


def _dropout_features(x, p_drop: float, training: bool, rng: np.random.Generator):
    """Inverted dropout on the constant feature matrix (dense or CSR).

    Dropping a structural zero is a no-op, so for sparse features only the
    stored values draw from the rng.
    """
    if not training or p_drop == 0.0:
        return x
    scale = 1.0 / (1.0 - p_drop)
    if sp.issparse(x):
        out = x.copy()
        out.data = out.data * ((rng.random(out.data.shape) >= p_drop) * scale)
        return out
    return x * ((rng.random(x.shape) >= p_drop) * scale)


def forward(params: ModelParams, x, g: SparseGraph, cfg: ExperimentConfig,
            training: bool, rng: np.random.Generator) -> ForwardOutputs:
    """One full pass: MLP embedding, likelihoods, aggregation, prediction.

    `x` is the constant feature matrix (ndarray or scipy CSR) whose column
    count must match W1; `g` must already carry the run's self-loop policy.
    """
    if x.shape[1] != params.W1.shape[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match W1 with {params.W1.shape[0]} rows")
    if x.shape[0] != g.n_nodes:
        raise ValueError(
            f"feature rows {x.shape[0]} do not match graph with {g.n_nodes} nodes")

    tape = Tape()
    xd = _dropout_features(x, cfg.p_drop, training, rng)
    h = tape.add(tape.feat_matmul(xd, params.W1), params.b1)
    h = tape.leaky_relu(h, cfg.leak_slope)
    h = tape.dropout(h, cfg.p_drop, training, rng)
    z = tape.add(tape.matmul(h, params.W2), params.b2)
    p = tape.row_softmax(z)

    gamma = None
    transition = None
    agg = cfg.aggregator
    if agg in ("adacad", "cad_only"):
        p_guide = tape.detach(p) if cfg.detach_transition else p
        transition = diff.cad_transition(tape, g, p_guide)
        z_cad = diff.propagate(tape, transition, z, cfg.K).features
        if agg == "adacad":
            c = ada.control_variable(tape, g, p_guide)
            gamma = ada.gamma_vector(tape, c, cfg.beta)
            z_out = ada.adaptive_blend(tape, z, z_cad, gamma)
        else:
            z_out = z_cad
    elif agg in ("rw", "symna"):
        transition = diff.baseline_transition(g, agg)
        z_out = diff.propagate(tape, transition, z, cfg.K).features
    elif agg == "ppr":
        z_out = diff.ppr_diffuse(tape, g, z, cfg.ppr_alpha, cfg.K).features
    elif agg == "hk":
        z_out = diff.heat_diffuse(tape, g, z, cfg.hk_time, cfg.K).features
    elif agg == "none":
        z_out = z
    else:
        raise ValueError(f"unknown aggregator {agg!r}")

    y_hat = tape.row_softmax(z_out)
    return ForwardOutputs(tape=tape, z=z, p=p, z_adacad=z_out, y_hat=y_hat,
                          gamma=gamma, transition=transition)


def loss(out: ForwardOutputs, labels: np.ndarray, labeled: np.ndarray,
         lambda_ent: float, entropy_reduction: str = "mean") -> Value:
    """Mean cross-entropy over the labeled nodes plus the weighted entropy
    of the pre-diffusion likelihoods (mean over all nodes, or the literal
    per-node sum with entropy_reduction="sum")."""
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise ValueError("labeled set is empty")
    tape = out.tape
    n, c = out.y_hat.shape
    mask = np.zeros((n, c))
    mask[labeled, np.asarray(labels, dtype=np.int64)[labeled]] = 1.0
    picked = tape.mul(leaf(mask), tape.log(out.y_hat))
    total = tape.affine(tape.total_sum(picked), -1.0 / labeled.size, 0.0)
    if lambda_ent:
        plogp = tape.mul(out.p, tape.log(out.p))
        denom = n if entropy_reduction == "mean" else 1
        ent = tape.affine(tape.total_sum(plogp), -1.0 / denom, 0.0)
        total = tape.add(total, tape.affine(ent, lambda_ent, 0.0))
    return total


def save_params(params: ModelParams, path) -> None:
    """Checkpoint as an .npz of named float64 arrays (bit-exact round trip)."""
    np.savez(path, **{k: v.data for k, v in params.named().items()})


def load_params(path) -> ModelParams:
    with np.load(path) as archive:
        return ModelParams(**{k: leaf(archive[k], requires_grad=True)
                              for k in ("W1", "b1", "W2", "b2")})
