"""Canonical dataset file format (CADG v1), loader/validator, and split
generation for the three evaluation protocols.

CADG v1 is line-oriented UTF-8: a header block

    cadg 1
    name <string>
    nodes <N>
    edges <M>
    features <D> sparse|dense
    classes <C>

followed by section markers on their own lines: `E` with M undirected edge
lines `i j` (i < j, sorted), `X` with the feature matrix (sparse: one `i k v`
COO triple per stored entry, row-major sorted; dense: N rows of D floats),
`Y` with N class indices, and an optional `S` section of `train|val|test i`
lines. Floats are shortest round-trip decimals, so a load/save cycle is a
fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import SparseGraph, build_graph


class DataFormatError(ValueError):
    """Malformed CADG file; message carries the offending line number."""


@dataclass
class Dataset:
    """A loaded benchmark: graph (stored without self-loops), features,
    labels, and the file's standard split when present."""

    name: str
    graph: SparseGraph
    features: np.ndarray | sp.csr_matrix
    labels: np.ndarray
    standard_split: dict[str, np.ndarray] | None
    n_features: int
    n_classes: int

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def sparse_features(self) -> bool:
        return sp.issparse(self.features)


@dataclass
class SplitSpec:
    """How to derive (train, val, test) index lists.

    kind "standard" uses the stored split, optionally subsampling the
    training set to train_per_class nodes per class (label-rate reduction).
    kind "random-planetoid" samples train_per_class per class, then val_size
    validation nodes and test_size test nodes from the remainder.
    kind "random-per-class" samples train_per_class and val_size nodes per
    class, assigning every remaining node to test.
    """

    kind: str = "standard"
    train_per_class: int | None = None
    val_size: int | None = None
    test_size: int | None = 1000

    def resolved_val_size(self) -> int:
        if self.val_size is not None:
            return self.val_size
        return 30 if self.kind == "random-per-class" else 500


SPLIT_KINDS = ("standard", "random-planetoid", "random-per-class")


# -- parsing ----------------------------------------------------------------

class _Cursor:
    def __init__(self, lines: list[str]):
        self.lines = lines
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.lines)

    def peek(self) -> str:
        return self.lines[self.pos] if not self.eof() else ""

    def next(self, what: str) -> str:
        if self.eof():
            raise DataFormatError(f"line {self.pos + 1}: expected {what}, got end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fail(self, msg: str):
        raise DataFormatError(f"line {self.pos}: {msg}")


def _header_int(cur: _Cursor, key: str) -> int:
    line = cur.next(f"'{key} <int>'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        cur.fail(f"expected '{key} <int>', got {line!r}")
    try:
        value = int(parts[1])
    except ValueError:
        cur.fail(f"{key} is not an integer: {parts[1]!r}")
    if value < 0:
        cur.fail(f"{key} must be nonnegative")
    return value


def load_dataset(path, row_normalize: bool = False) -> Dataset:
    """Parse and validate a CADG v1 file.

    With row_normalize=True, feature rows are L1-normalized at load time
    (rows summing to zero are left unchanged).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    cur = _Cursor(lines)

    magic = cur.next("'cadg 1' header")
    if magic.strip() != "cadg 1":
        cur.fail(f"bad magic header {magic!r}, expected 'cadg 1'")
    name_line = cur.next("'name <string>'")
    if not name_line.startswith("name ") or len(name_line.split()) != 2:
        cur.fail(f"expected 'name <string>', got {name_line!r}")
    name = name_line.split()[1]
    n = _header_int(cur, "nodes")
    m = _header_int(cur, "edges")
    feat_line = cur.next("'features <D> sparse|dense'")
    parts = feat_line.split()
    if len(parts) != 3 or parts[0] != "features" or parts[2] not in ("sparse", "dense"):
        cur.fail(f"expected 'features <D> sparse|dense', got {feat_line!r}")
    try:
        d = int(parts[1])
    except ValueError:
        cur.fail(f"feature count is not an integer: {parts[1]!r}")
    if d < 0:
        cur.fail("feature count must be nonnegative")
    sparse_feats = parts[2] == "sparse"
    c = _header_int(cur, "classes")
    if c < 1:
        cur.fail("classes must be >= 1")

    # E section
    marker = cur.next("'E' section marker")
    if marker.strip() != "E":
        cur.fail(f"expected section marker 'E', got {marker!r}")
    edges = np.empty((m, 2), dtype=np.int64)
    for k in range(m):
        line = cur.next(f"edge line {k + 1} of {m}")
        try:
            i, j = map(int, line.split())
        except ValueError:
            cur.fail(f"bad edge line {line!r}")
        if not 0 <= i < j:
            cur.fail(f"edge must satisfy 0 <= i < j, got {i} {j}")
        if j >= n:
            cur.fail(f"edge endpoint {j} out of range [0, {n})")
        edges[k] = (i, j)
    graph = build_graph(edges, n, add_self_loops=False)
    if graph.n_edges != m:
        raise DataFormatError(
            f"E section lists {m} edges but only {graph.n_edges} are distinct")

    # X section
    marker = cur.next("'X' section marker")
    if marker.strip() != "X":
        cur.fail(f"expected section marker 'X', got {marker!r}")
    if sparse_feats:
        rows, cols, vals = [], [], []
        while not cur.eof() and cur.peek().strip() != "Y":
            line = cur.next("feature triple")
            parts = line.split()
            if len(parts) != 3:
                cur.fail(f"expected 'i k v' feature triple, got {line!r}")
            try:
                i, k = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError:
                cur.fail(f"bad feature triple {line!r}")
            if not 0 <= i < n:
                cur.fail(f"feature row {i} out of range [0, {n})")
            if not 0 <= k < d:
                cur.fail(f"feature column {k} out of range [0, {d})")
            rows.append(i)
            cols.append(k)
            vals.append(v)
        keys = np.asarray(rows, dtype=np.int64) * d + np.asarray(cols, dtype=np.int64)
        if np.unique(keys).size != keys.size:
            raise DataFormatError("X section contains duplicate (row, column) entries")
        features = sp.csr_matrix((vals, (rows, cols)), shape=(n, d))
        features.sort_indices()
    else:
        dense = np.empty((n, d))
        for i in range(n):
            line = cur.next(f"dense feature row {i + 1} of {n}")
            parts = line.split()
            if len(parts) != d:
                cur.fail(f"expected {d} values in feature row, got {len(parts)}")
            try:
                dense[i] = [float(p) for p in parts]
            except ValueError:
                cur.fail("non-numeric value in dense feature row")
        features = dense

    # Y section
    marker = cur.next("'Y' section marker")
    if marker.strip() != "Y":
        cur.fail(f"expected section marker 'Y', got {marker!r}")
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        line = cur.next(f"label line {i + 1} of {n}")
        try:
            y = int(line.strip())
        except ValueError:
            cur.fail(f"bad label line {line!r}")
        if not 0 <= y < c:
            cur.fail(f"label {y} out of range [0, {c})")
        labels[i] = y

    # optional S section
    split = None
    if not cur.eof() and cur.peek().strip() == "S":
        cur.next("'S' section marker")
        buckets: dict[str, list[int]] = {"train": [], "val": [], "test": []}
        while not cur.eof():
            line = cur.next("split line")
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in buckets:
                cur.fail(f"expected 'train|val|test <i>', got {line!r}")
            try:
                i = int(parts[1])
            except ValueError:
                cur.fail(f"bad split index {parts[1]!r}")
            if not 0 <= i < n:
                cur.fail(f"split index {i} out of range [0, {n})")
            buckets[parts[0]].append(i)
        split = {k: np.asarray(sorted(v), dtype=np.int64) for k, v in buckets.items()}
        seen = split["train"].size + split["val"].size + split["test"].size
        merged = np.concatenate([split["train"], split["val"], split["test"]])
        if np.unique(merged).size != seen:
            raise DataFormatError("S section split lists are not disjoint")
    elif not cur.eof():
        cur.fail(f"unexpected trailing content {cur.peek()!r}")

    if row_normalize:
        features = l1_normalize_rows(features)
    return Dataset(name=name, graph=graph, features=features, labels=labels,
                   standard_split=split, n_features=d, n_classes=c)


def l1_normalize_rows(features):
    """Divide each row by its L1 norm; all-zero rows are left unchanged."""
    if sp.issparse(features):
        sums = np.abs(features).sum(axis=1).A.ravel()
        inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        return sp.diags(inv).dot(features).tocsr()
    sums = np.abs(features).sum(axis=1, keepdims=True)
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return features * inv


def save_dataset(d: Dataset, path) -> None:
    """Emit the canonical CADG v1 form (sorted edges, row-major features)."""
    edges = d.graph.undirected_edges()
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("cadg 1\n")
        fh.write(f"name {d.name}\n")
        fh.write(f"nodes {d.n_nodes}\n")
        fh.write(f"edges {edges.shape[0]}\n")
        kind = "sparse" if d.sparse_features else "dense"
        fh.write(f"features {d.n_features} {kind}\n")
        fh.write(f"classes {d.n_classes}\n")
        fh.write("E\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")
        fh.write("X\n")
        if d.sparse_features:
            coo = d.features.tocoo()
            order = np.lexsort((coo.col, coo.row))
            for i, k, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{i} {k} {float(v)!r}\n")
        else:
            for row in d.features:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        fh.write("Y\n")
        for y in d.labels:
            fh.write(f"{y}\n")
        if d.standard_split is not None:
            fh.write("S\n")
            for part in ("train", "val", "test"):
                for i in d.standard_split[part]:
                    fh.write(f"{part} {i}\n")


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    """Structural equality (used for round-trip and determinism checks)."""
    if (a.name, a.n_nodes, a.n_features, a.n_classes) != \
            (b.name, b.n_nodes, b.n_features, b.n_classes):
        return False
    if not (np.array_equal(a.graph.row_offsets, b.graph.row_offsets)
            and np.array_equal(a.graph.col_indices, b.graph.col_indices)):
        return False
    if a.sparse_features != b.sparse_features:
        return False
    if a.sparse_features:
        if (a.features != b.features).nnz != 0:
            return False
    elif not np.array_equal(a.features, b.features):
        return False
    if not np.array_equal(a.labels, b.labels):
        return False
    if (a.standard_split is None) != (b.standard_split is None):
        return False
    if a.standard_split is not None:
        for part in ("train", "val", "test"):
            if not np.array_equal(a.standard_split[part], b.standard_split[part]):
                return False
    return True


# -- split generation ---------------------------------------------------------

def _per_class_sample(labels: np.ndarray, pool: np.ndarray, per_class: int,
                      n_classes: int, rng: np.random.Generator) -> np.ndarray:
    picked = []
    for cls in range(n_classes):
        candidates = pool[labels[pool] == cls]
        if candidates.size < per_class:
            raise ValueError(
                f"class {cls} has only {candidates.size} candidate nodes, "
                f"need {per_class}")
        picked.append(rng.choice(candidates, size=per_class, replace=False))
    return np.sort(np.concatenate(picked))


def make_split(d: Dataset, spec: SplitSpec, rng: np.random.Generator):
    """Derive disjoint (train, val, test) index arrays for a SplitSpec."""
    if spec.kind not in SPLIT_KINDS:
        raise ValueError(f"unknown split kind {spec.kind!r}")
    labels = d.labels
    if spec.kind == "standard":
        if d.standard_split is None:
            raise ValueError(f"dataset {d.name!r} carries no standard split")
        train = d.standard_split["train"]
        val = d.standard_split["val"]
        test = d.standard_split["test"]
        if spec.train_per_class is not None:
            train = _per_class_sample(labels, train, spec.train_per_class,
                                      d.n_classes, rng)
        return train, val, test

    tpc = spec.train_per_class if spec.train_per_class is not None else 20
    everything = np.arange(d.n_nodes, dtype=np.int64)
    train = _per_class_sample(labels, everything, tpc, d.n_classes, rng)
    rest = np.setdiff1d(everything, train, assume_unique=True)

    if spec.kind == "random-planetoid":
        val_size = spec.resolved_val_size()
        test_size = spec.test_size
        need = val_size + (test_size or 0)
        if rest.size < max(need, val_size + 1):
            raise ValueError(
                f"not enough nodes left for validation/test: have {rest.size}")
        shuffled = rng.permutation(rest)
        val = np.sort(shuffled[:val_size])
        if test_size is None:
            test = np.sort(shuffled[val_size:])
        else:
            test = np.sort(shuffled[val_size:val_size + test_size])
        return train, val, test

    # random-per-class
    val = _per_class_sample(labels, rest, spec.resolved_val_size(),
                            d.n_classes, rng)
    test = np.setdiff1d(rest, val, assume_unique=True)
    if test.size == 0:
        raise ValueError("no nodes left for the test split")
    return train, val, test
