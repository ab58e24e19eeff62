"""Transition operators on a graph pattern and K-step feature propagation.

Covers the class-attentive transition (softmax of per-edge class-likelihood
dot products, differentiable) and the non-learned baselines: random-walk
(D^-1 A), symmetric normalized adjacency (D^-1/2 A D^-1/2), personalized
PageRank and heat-kernel diffusion in truncated iterative form. Nothing here
ever materializes an N x N dense matrix; K-step diffusion is K sparse
products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Value, SparseValues, sparse_leaf, leaf, _per_edge
from .graph import SparseGraph

TRANSITION_KINDS = ("cad", "rw", "symna")


@dataclass
class TransitionMatrix:
    """Edge values on a graph's sparsity pattern plus their construction kind.

    For kind "cad" and "rw" every nonempty row sums to 1 (row-stochastic);
    "symna" rows carry the closed form d_i^-1/2 d_j^-1/2 instead.
    """

    pattern: SparseGraph
    values: SparseValues
    kind: str


@dataclass
class DiffusionResult:
    features: Value
    steps: int


def cad_transition(tape: Tape, g: SparseGraph, p: Value) -> TransitionMatrix:
    """Class-attentive transition: row softmax of p_i . p_j over each
    neighborhood.

    Rows of p are expected to be probability vectors (the classifier's
    per-node class likelihoods); the construction is differentiable w.r.t. p.
    Rows of isolated nodes are empty.
    """
    logits = tape.edge_dot(p, g)
    return TransitionMatrix(g, tape.segment_softmax(logits), "cad")


def baseline_transition(g: SparseGraph, kind: str) -> TransitionMatrix:
    """Structure-only transition: "rw" is D^-1 A, "symna" is D^-1/2 A D^-1/2.

    Values are constants on the pattern; rows of degree 0 are empty.
    """
    deg = g.degrees.astype(np.float64)
    if kind == "rw":
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        vals = _per_edge(g, inv)
    elif kind == "symna":
        inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
        vals = _per_edge(g, inv_sqrt) * inv_sqrt[g.col_indices]
    else:
        raise ValueError(f"unknown baseline transition kind {kind!r}")
    return TransitionMatrix(g, sparse_leaf(g, vals), kind)


def _empty_row_mask(g: SparseGraph) -> Value:
    return leaf((~g.nonempty_rows).astype(np.float64).reshape(-1, 1))


def _step(tape: Tape, t: TransitionMatrix, h: Value, stay: Value | None) -> Value:
    nxt = tape.spmm(t.values, h)
    if stay is not None:
        nxt = tape.add(nxt, tape.row_scale(h, stay))
    return nxt


def propagate(tape: Tape, t: TransitionMatrix, z: Value, k: int) -> DiffusionResult:
    """k applications of T to z. Empty rows keep their previous value
    (a walker at an isolated node stays put). k=0 returns z itself."""
    if k < 0:
        raise ValueError(f"step count must be nonnegative, got {k}")
    g = t.pattern
    if z.shape[0] != g.n_nodes:
        raise ValueError(f"feature rows {z.shape[0]} do not match graph with {g.n_nodes} nodes")
    stay = None if bool(g.nonempty_rows.all()) else _empty_row_mask(g)
    h = z
    for _ in range(k):
        h = _step(tape, t, h, stay)
    return DiffusionResult(features=h, steps=k)


def ppr_diffuse(tape: Tape, g: SparseGraph, z: Value, alpha: float, k: int) -> DiffusionResult:
    """Personalized-PageRank iterate: h <- (1-alpha) T_rw h + alpha z,
    run k times from h=z. Converges to the closed form
    alpha (I - (1-alpha) T_rw)^-1 z as k grows."""
    if not 0 < alpha <= 1:
        raise ValueError(f"teleport fraction must be in (0, 1], got {alpha}")
    if k < 0:
        raise ValueError(f"step count must be nonnegative, got {k}")
    t = baseline_transition(g, "rw")
    teleport = tape.affine(z, alpha, 0.0)
    h = z
    for _ in range(k):
        h = tape.add(tape.affine(tape.spmm(t.values, h), 1.0 - alpha, 0.0), teleport)
    return DiffusionResult(features=h, steps=k)


def heat_diffuse(tape: Tape, g: SparseGraph, z: Value, t_heat: float, k: int) -> DiffusionResult:
    """Truncated heat-kernel series sum_{m=0..k} e^-t t^m/m! T_rw^m z,
    accumulated iteratively (approximates e^{-t (I - T_rw)} z)."""
    if t_heat <= 0:
        raise ValueError(f"diffusion time must be positive, got {t_heat}")
    if k < 1:
        raise ValueError(f"series order must be at least 1, got {k}")
    t = baseline_transition(g, "rw")
    coef = float(np.exp(-t_heat))
    acc = tape.affine(z, coef, 0.0)
    h = z
    for m in range(1, k + 1):
        coef *= t_heat / m
        h = tape.spmm(t.values, h)
        acc = tape.add(acc, tape.affine(h, coef, 0.0))
    return DiffusionResult(features=acc, steps=k)
