"""Tape-based reverse-mode differentiation for the diffusion engine.

Dense values are 2-D float64 matrices; sparse values live on the fixed
CSR pattern of a SparseGraph, one float per stored entry. A Tape records
the ops of a single forward pass (define-by-run) and replays them in
reverse on backward(). Leaves (parameters, constants) are tape-free and
can be reused across passes; gradients accumulate additively into every
leaf with requires_grad.

All computation is plain numpy and therefore bit-deterministic. The only
delegated kernels are the CSR matrix products (scipy.sparse); every
gradient rule is implemented here.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import SparseGraph

LOG_EPS = 1e-12  # clamp for log arguments, avoids -inf in losses


class AutodiffError(ValueError):
    """Shape mismatch or misuse of the tape API."""


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise AutodiffError(f"dense values must be 2-D, got shape {arr.shape}")
    return arr


class Value:
    """Dense node of the reverse-mode graph (rows x cols, float64)."""

    __slots__ = ("data", "grad", "requires_grad", "tape_id", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_matrix(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.tape_id: int = -1
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise AutodiffError(f"item() on non-scalar shape {self.data.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Value(shape={self.data.shape}, requires_grad={self.requires_grad})"


class SparseValues:
    """Edge-aligned floats on a SparseGraph pattern (one per stored entry)."""

    __slots__ = ("pattern", "values", "grad", "requires_grad", "tape_id", "_backward")

    def __init__(self, pattern: SparseGraph, values, requires_grad: bool = False):
        self.pattern = pattern
        self.values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        if self.values.shape[0] != pattern.n_entries:
            raise AutodiffError(
                f"values length {self.values.shape[0]} does not match pattern "
                f"with {pattern.n_entries} entries")
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.tape_id: int = -1
        self._backward = None

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return (f"SparseValues(n={self.pattern.n_nodes}, "
                f"nnz={self.pattern.n_entries}, requires_grad={self.requires_grad})")


def _wants_grad(node) -> bool:
    return node.requires_grad or node._backward is not None


def _accum(node, g: np.ndarray) -> None:
    if not _wants_grad(node):
        return
    if node.grad is None:
        node.grad = np.zeros_like(node.data if isinstance(node, Value) else node.values)
    node.grad += g


# Segment reductions over the rows of a CSR pattern. reduceat is fed only
# the starts of nonempty rows: consecutive empty rows contribute zero
# length, so each reduced span ends exactly at its row's end.

def _seg_sum(g: SparseGraph, edge_vals: np.ndarray) -> np.ndarray:
    out = np.zeros(g.n_nodes)
    if edge_vals.size:
        out[g.nonempty_rows] = np.add.reduceat(edge_vals, g.nonempty_starts)
    return out


def _seg_max(g: SparseGraph, edge_vals: np.ndarray) -> np.ndarray:
    out = np.full(g.n_nodes, -np.inf)
    if edge_vals.size:
        out[g.nonempty_rows] = np.maximum.reduceat(edge_vals, g.nonempty_starts)
    return out


def _per_edge(g: SparseGraph, row_vals: np.ndarray) -> np.ndarray:
    return np.repeat(row_vals, g.degrees)


def _csr(t: SparseValues) -> sp.csr_matrix:
    g = t.pattern
    return sp.csr_matrix((t.values, g.col_indices, g.row_offsets),
                         shape=(g.n_nodes, g.n_nodes))


def _csr_transpose(t: SparseValues) -> sp.csc_matrix:
    # The CSR arrays of T, reinterpreted as CSC, are exactly T^T.
    g = t.pattern
    return sp.csc_matrix((t.values, g.col_indices, g.row_offsets),
                         shape=(g.n_nodes, g.n_nodes))


class Tape:
    """Op recorder for one forward pass; replayed in reverse by backward."""

    def __init__(self):
        self._nodes: list = []
        self._leaves: dict = {}  # id -> requires_grad leaf reached by some op

    def _emit(self, out, backward, *parents):
        """Register `out` with its pullback iff some parent needs gradients."""
        needed = False
        for p in parents:
            if _wants_grad(p):
                needed = True
            if p.requires_grad and p._backward is None:
                self._leaves.setdefault(id(p), p)
        if needed:
            out._backward = backward
            out.tape_id = len(self._nodes)
            self._nodes.append(out)
        return out

    # -- dense ops ---------------------------------------------------------

    def add(self, a: Value, b: Value) -> Value:
        """Elementwise sum; b may be a (1, cols) row vector (bias broadcast)."""
        broadcast = b.shape != a.shape
        if broadcast and b.shape != (1, a.shape[1]):
            raise AutodiffError(f"add shapes {a.shape} and {b.shape} incompatible")
        out = Value(a.data + b.data)

        def backward():
            g = out.grad
            _accum(a, g)
            _accum(b, g.sum(axis=0, keepdims=True) if broadcast else g)

        return self._emit(out, backward, a, b)

    def mul(self, a: Value, b: Value) -> Value:
        if a.shape != b.shape:
            raise AutodiffError(f"mul shapes {a.shape} and {b.shape} differ")
        out = Value(a.data * b.data)

        def backward():
            _accum(a, out.grad * b.data)
            _accum(b, out.grad * a.data)

        return self._emit(out, backward, a, b)

    def affine(self, x: Value, scale: float, shift: float) -> Value:
        """scale * x + shift, elementwise with scalars."""
        out = Value(scale * x.data + shift)

        def backward():
            _accum(x, scale * out.grad)

        return self._emit(out, backward, x)

    def matmul(self, a: Value, b: Value) -> Value:
        if a.shape[1] != b.shape[0]:
            raise AutodiffError(f"matmul shapes {a.shape} and {b.shape} incompatible")
        out = Value(a.data @ b.data)

        def backward():
            _accum(a, out.grad @ b.data.T)
            _accum(b, a.data.T @ out.grad)

        return self._emit(out, backward, a, b)

    def feat_matmul(self, x, w: Value) -> Value:
        """x @ w for a constant feature matrix x (ndarray or scipy sparse)."""
        if x.shape[1] != w.shape[0]:
            raise AutodiffError(f"feature matmul shapes {x.shape} and {w.shape} incompatible")
        out = Value(np.asarray(x @ w.data))

        def backward():
            _accum(w, np.asarray(x.T @ out.grad))

        return self._emit(out, backward, w)

    def leaky_relu(self, x: Value, slope: float) -> Value:
        if not 0 <= slope < 1:
            raise AutodiffError(f"leak slope must be in [0, 1), got {slope}")
        pos = x.data >= 0
        out = Value(np.where(pos, x.data, slope * x.data))

        def backward():
            _accum(x, np.where(pos, out.grad, slope * out.grad))

        return self._emit(out, backward, x)

    def dropout(self, x: Value, p_drop: float, training: bool,
                rng: np.random.Generator) -> Value:
        """Inverted dropout; the identity (and no rng draw) at inference."""
        if not 0 <= p_drop < 1:
            raise AutodiffError(f"drop probability must be in [0, 1), got {p_drop}")
        if not training or p_drop == 0.0:
            return x
        keep = (rng.random(x.shape) >= p_drop) / (1.0 - p_drop)
        out = Value(x.data * keep)

        def backward():
            _accum(x, out.grad * keep)

        return self._emit(out, backward, x)

    def row_softmax(self, x: Value) -> Value:
        shifted = x.data - x.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=1, keepdims=True)
        out = Value(y)

        def backward():
            g = out.grad
            _accum(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

        return self._emit(out, backward, x)

    def log(self, x: Value) -> Value:
        """Natural log with the argument clamped at LOG_EPS."""
        clamped = np.maximum(x.data, LOG_EPS)
        out = Value(np.log(clamped))

        def backward():
            _accum(x, out.grad / clamped)

        return self._emit(out, backward, x)

    def row_scale(self, x: Value, s: Value) -> Value:
        """x * s with s an (n, 1) column broadcast across x's columns."""
        if s.shape != (x.shape[0], 1):
            raise AutodiffError(f"row_scale needs s of shape ({x.shape[0]}, 1), got {s.shape}")
        out = Value(x.data * s.data)

        def backward():
            _accum(x, out.grad * s.data)
            _accum(s, (out.grad * x.data).sum(axis=1, keepdims=True))

        return self._emit(out, backward, x, s)

    def total_sum(self, x: Value) -> Value:
        out = Value(x.data.sum())

        def backward():
            _accum(x, np.full_like(x.data, out.grad[0, 0]))

        return self._emit(out, backward, x)

    def total_mean(self, x: Value) -> Value:
        inv = 1.0 / x.data.size
        out = Value(x.data.sum() * inv)

        def backward():
            _accum(x, np.full_like(x.data, out.grad[0, 0] * inv))

        return self._emit(out, backward, x)

    def detach(self, x: Value) -> Value:
        return Value(x.data)

    # -- sparse ops --------------------------------------------------------

    def edge_dot(self, p: Value, g: SparseGraph) -> SparseValues:
        """Per-edge dot products p_i . p_j on the graph pattern."""
        if p.shape[0] != g.n_nodes:
            raise AutodiffError(
                f"edge_dot rows {p.shape[0]} do not match graph with {g.n_nodes} nodes")
        rows, cols = g.edge_rows, g.col_indices
        out = SparseValues(g, (p.data[rows] * p.data[cols]).sum(axis=1))

        def backward():
            gv = out.grad[:, None]
            dp = np.zeros_like(p.data)
            np.add.at(dp, rows, gv * p.data[cols])
            np.add.at(dp, cols, gv * p.data[rows])
            _accum(p, dp)

        return self._emit(out, backward, p)

    def segment_softmax(self, logits: SparseValues) -> SparseValues:
        """Softmax over each row's entries; empty rows stay empty."""
        g = logits.pattern
        shifted = logits.values - _per_edge(g, _seg_max(g, logits.values))
        e = np.exp(shifted)
        y = e / _per_edge(g, _seg_sum(g, e))
        out = SparseValues(g, y)

        def backward():
            gv = out.grad
            _accum(logits, y * (gv - _per_edge(g, _seg_sum(g, y * gv))))

        return self._emit(out, backward, logits)

    def spmm(self, t: SparseValues, x: Value) -> Value:
        """Sparse-dense product T @ x; empty rows of T produce zero rows."""
        g = t.pattern
        if x.shape[0] != g.n_nodes:
            raise AutodiffError(
                f"spmm rows {x.shape[0]} do not match pattern with {g.n_nodes} nodes")
        out = Value(_csr(t) @ x.data)

        def backward():
            go = out.grad
            _accum(x, _csr_transpose(t) @ go)
            if _wants_grad(t):
                _accum(t, (go[g.edge_rows] * x.data[g.col_indices]).sum(axis=1))

        return self._emit(out, backward, t, x)

    def sparse_row_sum(self, t: SparseValues) -> Value:
        """Column vector of per-row sums of the stored entries."""
        g = t.pattern
        out = Value(_seg_sum(g, t.values).reshape(-1, 1))

        def backward():
            _accum(t, _per_edge(g, out.grad[:, 0]))

        return self._emit(out, backward, t)

    # -- reverse sweep -----------------------------------------------------

    def backward(self, loss: Value) -> dict:
        """Reverse sweep from a scalar loss; returns {leaf: grad} for every
        requires_grad leaf reached."""
        if loss.data.shape != (1, 1):
            raise AutodiffError(f"loss must be scalar, got shape {loss.data.shape}")
        loss.grad = np.ones((1, 1))
        for node in reversed(self._nodes):
            if node.grad is not None:
                node._backward()
        for node in self._nodes:
            node.grad = None  # free op-node grads; leaves keep theirs
        return {v: v.grad for v in self._leaves.values() if v.grad is not None}


def leaf(data, requires_grad: bool = False) -> Value:
    """Tape-free dense leaf (parameter or constant)."""
    return Value(data, requires_grad=requires_grad)


def sparse_leaf(pattern: SparseGraph, values, requires_grad: bool = False) -> SparseValues:
    """Tape-free sparse leaf on a fixed pattern."""
    return SparseValues(pattern, values, requires_grad=requires_grad)
