"""Adaptive aggregation: local class-context control, per-node blend
coefficient gamma, and the convex interpolation of original and diffused
features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Value, leaf
from .graph import SparseGraph


@dataclass
class ControlVector:
    """Per-node mean class-likelihood agreement with the neighborhood,
    one value in [0, 1] per node (isolated nodes get 0)."""

    c: Value


@dataclass
class GammaVector:
    """Per-node blend coefficient gamma = (1-beta) c + beta, in [beta, 1]."""

    gamma: Value
    beta: float
    gamma_u: float = field(default=1.0)


def control_variable(tape: Tape, g: SparseGraph, p: Value) -> ControlVector:
    """Mean over each node's neighbors of p_i . p_j, differentiable in p.

    Neighborhoods follow the stored self-loop policy; nodes of degree 0
    get c_i = 0 by convention (no class-context evidence).
    """
    e = tape.edge_dot(p, g)
    s = tape.sparse_row_sum(e)
    deg = g.degrees.astype(np.float64)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return ControlVector(c=tape.row_scale(s, leaf(inv_deg.reshape(-1, 1))))


def gamma_vector(tape: Tape, c: ControlVector, beta: float) -> GammaVector:
    if not 0 <= beta <= 1:
        raise ValueError(f"sensitivity beta must be in [0, 1], got {beta}")
    return GammaVector(gamma=tape.affine(c.c, 1.0 - beta, beta), beta=beta)


def adaptive_blend(tape: Tape, z: Value, z_cad: Value, gamma: GammaVector) -> Value:
    """Per-row convex combination (1-gamma_i) z_i + gamma_i z_cad_i."""
    if z.shape != z_cad.shape:
        raise ValueError(f"feature shapes {z.shape} and {z_cad.shape} differ")
    if gamma.gamma.shape != (z.shape[0], 1):
        raise ValueError(
            f"gamma must have shape ({z.shape[0]}, 1), got {gamma.gamma.shape}")
    keep = tape.affine(gamma.gamma, -1.0, 1.0)
    return tape.add(tape.row_scale(z, keep), tape.row_scale(z_cad, gamma.gamma))
