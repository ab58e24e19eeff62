"""Independent oracles shared by the test modules.

Everything here is deliberately written against dense numpy matrices and
brute-force recursions, never through the package's sparse/autodiff code
paths, so a test comparing the two exercises genuinely different routes.
"""

import numpy as np


def rel_close(got, want, tol):
    """Scale-aware elementwise closeness: |got-want| <= tol*max(1,|got|,|want|)."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(got), np.abs(want)))
    return bool(np.all(np.abs(got - want) <= tol * scale))


def finite_diff(make_loss, arr, h=1e-5):
    """Central-difference gradient of a scalar-valued rebuild w.r.t. arr."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        up = make_loss()
        arr[idx] = orig - h
        down = make_loss()
        arr[idx] = orig
        grad[idx] = (up - down) / (2.0 * h)
        it.iternext()
    return grad


def _buffer(node):
    return node.data if hasattr(node, "data") else node.values


def gradcheck(make_tape_loss, params, h=1e-5, tol=1e-4):
    """Check autodiff gradients of every leaf in `params` (dense Value or
    SparseValues) against central finite differences. make_tape_loss() must
    rebuild the graph from the leaves' current buffers and return
    (tape, loss)."""
    for p in params:
        p.zero_grad()
    tape, loss_value = make_tape_loss()
    tape.backward(loss_value)
    for p in params:
        assert p.grad is not None, "parameter received no gradient"
        fd = finite_diff(lambda: make_tape_loss()[1].item(), _buffer(p), h=h)
        assert rel_close(p.grad, fd, tol), (
            f"gradient mismatch: max abs diff {np.abs(p.grad - fd).max():.3e}")


# -- dense oracles -------------------------------------------------------------

def dense_adjacency(g):
    a = np.zeros((g.n_nodes, g.n_nodes))
    a[g.edge_rows, g.col_indices] = 1.0
    return a


def dense_masked_softmax(logits, adj):
    """Row softmax restricted to the adjacency pattern; empty rows all zero."""
    out = np.zeros_like(logits)
    for i in range(adj.shape[0]):
        cols = np.flatnonzero(adj[i])
        if cols.size == 0:
            continue
        row = logits[i, cols]
        e = np.exp(row - row.max())
        out[i, cols] = e / e.sum()
    return out


def dense_cad_transition(g, p):
    return dense_masked_softmax(p @ p.T, dense_adjacency(g))


def dense_rw_transition(g):
    a = dense_adjacency(g)
    deg = a.sum(axis=1, keepdims=True)
    return np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)


def dense_symna_transition(g):
    a = dense_adjacency(g)
    deg = a.sum(axis=1)
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def with_stay_put(t):
    """Empty rows act as identity (the walker stays at an isolated node)."""
    t = t.copy()
    empty = t.sum(axis=1) == 0
    t[empty, empty] = 1.0
    return t


def dense_propagate(t, z, k):
    h = z.copy()
    for _ in range(k):
        h = t @ h
    return h


def dense_ppr_closed_form(g, z, alpha):
    t = dense_rw_transition(g)
    n = t.shape[0]
    return alpha * np.linalg.solve(np.eye(n) - (1 - alpha) * t, z)


def dense_heat_series(g, z, t_heat, terms=200):
    """Truncated series for e^{-t (I - T_rw)} z, summed far past convergence."""
    t = dense_rw_transition(g)
    coef = np.exp(-t_heat)
    acc = coef * z
    h = z.copy()
    for m in range(1, terms + 1):
        coef *= t_heat / m
        h = t @ h
        acc = acc + coef * h
    return acc


def dense_control(g, p):
    a = dense_adjacency(g)
    deg = a.sum(axis=1)
    agreement = (a * (p @ p.T)).sum(axis=1)
    return np.divide(agreement, deg, out=np.zeros_like(deg), where=deg > 0)


def dense_softmax(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def dense_leaky_relu(x, slope):
    return np.where(x >= 0, x, slope * x)


def dense_forward(w1, b1, w2, b2, x, g, k, beta, leak_slope):
    """End-to-end dense pipeline oracle (no dropout)."""
    z = dense_leaky_relu(x @ w1 + b1, leak_slope) @ w2 + b2
    p = dense_softmax(z)
    t = with_stay_put(dense_cad_transition(g, p))
    z_cad = dense_propagate(t, z, k)
    c = dense_control(g, p)
    gamma = ((1 - beta) * c + beta)[:, None]
    z_ada = (1 - gamma) * z + gamma * z_cad
    return dense_softmax(z_ada)


def bfs_hops(g, start):
    """Hop distance from start to every node (inf when unreachable)."""
    dist = np.full(g.n_nodes, np.inf)
    dist[start] = 0
    frontier = [start]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in g.row(u):
                if dist[v] == np.inf:
                    dist[v] = d
                    nxt.append(int(v))
        frontier = nxt
    return dist


# -- synthetic benchmark ------------------------------------------------------

def make_synthetic_dataset(n_per_class=40, n_classes=3, n_features=12,
                           p_in=0.10, p_out=0.01, noise=0.6, seed=7,
                           train_per_class=5, val_per_class=10, name="synthetic"):
    """Planted-partition graph with class-informative noisy features and a
    stored standard split. Small enough for CI, hard enough that diffusion
    visibly helps."""
    from cadnet import Dataset, build_graph

    rng = np.random.default_rng(seed)
    n = n_per_class * n_classes
    labels = np.repeat(np.arange(n_classes), n_per_class)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if labels[i] == labels[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    graph = build_graph(edges, n)
    means = rng.normal(0.0, 1.0, size=(n_classes, n_features))
    features = means[labels] + rng.normal(0.0, noise, size=(n, n_features))

    train, val = [], []
    for cls in range(n_classes):
        members = np.flatnonzero(labels == cls)
        picked = rng.permutation(members)
        train.extend(picked[:train_per_class])
        val.extend(picked[train_per_class:train_per_class + val_per_class])
    train = np.sort(np.asarray(train, dtype=np.int64))
    val = np.sort(np.asarray(val, dtype=np.int64))
    test = np.setdiff1d(np.arange(n, dtype=np.int64), np.concatenate([train, val]))
    return Dataset(name=name, graph=graph, features=features,
                   labels=labels.astype(np.int64),
                   standard_split={"train": train, "val": val, "test": test},
                   n_features=n_features, n_classes=n_classes)
