#!/usr/bin/env python3
"""One-shot converter from public benchmark dumps to CADG v1 files.

Two upstream formats are understood:

* Citation networks (cora, citeseer, pubmed): the eight-file pickled dump
  ``ind.<name>.{x,y,tx,ty,allx,ally,graph}`` plus ``ind.<name>.test.index``.
  The canonical assembly is applied: test rows are reordered to their node
  ids, gaps in the test id range (isolated nodes in some dumps) get all-zero
  rows, and the standard split (train = labeled block, next 500 validation,
  sorted test ids) is embedded.
* Co-purchase / co-authorship networks (amazon-comp, amazon-photo,
  coauthor-cs, coauthor-phy): the single-file ``.npz`` CSR archive with
  ``adj_*`` / ``attr_*`` arrays and ``labels``. No standard split exists for
  these; splits are drawn at run time.

Preprocessing in both cases: symmetrize, deduplicate, strip self-loops.
The emitted file is the canonical CADG form (sorted edge list, row-major
feature triples, shortest round-trip decimals), so conversion is
deterministic and re-runs produce identical checksums. A ConversionReport
is printed to stdout as JSON; mismatches against the published statistics
are warnings, not errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import pickle
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

# Published statistics (nodes, undirected edges, features, classes); a local
# copy so the converter stays independent of the engine package.
PUBLISHED_STATS = {
    "citeseer": (3327, 4552, 3703, 6),
    "cora": (2708, 5278, 1433, 7),
    "pubmed": (19717, 44324, 500, 3),
    "amazon-comp": (13752, 245861, 767, 10),
    "amazon-photo": (7650, 119081, 745, 8),
    "coauthor-cs": (18333, 81894, 6805, 15),
    "coauthor-phy": (34493, 247962, 8415, 5),
}

NPZ_CANDIDATES = {
    "amazon-comp": ["amazon_electronics_computers.npz", "amazon-comp.npz"],
    "amazon-photo": ["amazon_electronics_photo.npz", "amazon-photo.npz"],
    "coauthor-cs": ["ms_academic_cs.npz", "coauthor-cs.npz"],
    "coauthor-phy": ["ms_academic_phy.npz", "coauthor-phy.npz"],
}

PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


class _CompatUnpickler(pickle.Unpickler):
    """Resolves the private scipy module paths that old dumps reference."""

    def find_class(self, module, name):
        if module.startswith("scipy.sparse"):
            return getattr(sp, name)
        if module in ("collections", "__builtin__") and name == "defaultdict":
            return defaultdict
        return super().find_class(module, name)


def _load_pickle(path: Path):
    with open(path, "rb") as fh:
        u = _CompatUnpickler(fh, encoding="latin1")
        return u.load()


def load_planetoid(src: Path, name: str) -> dict:
    parts = {}
    for ext in PLANETOID_PARTS:
        path = src / f"ind.{name}.{ext}"
        if not path.exists():
            raise FileNotFoundError(f"missing raw file: {path}")
        parts[ext] = _load_pickle(path)
    index_path = src / f"ind.{name}.test.index"
    if not index_path.exists():
        raise FileNotFoundError(f"missing raw file: {index_path}")
    parts["test_index"] = np.array(
        [int(line) for line in index_path.read_text().split()], dtype=np.int64)
    return parts


def assemble_citation(parts: dict):
    """The canonical assembly of the pickled citation dumps."""
    y, tx, ty = parts["y"], parts["tx"], parts["ty"]
    allx, ally, graph = parts["allx"], parts["ally"], parts["graph"]
    test_reorder = parts["test_index"]
    test_sorted = np.sort(test_reorder)

    lo = int(test_sorted[0])
    full = np.arange(lo, int(test_sorted[-1]) + 1, dtype=np.int64)
    if full.size > test_sorted.size:
        # ids missing from the test range are isolated nodes: zero rows
        tx_ext = sp.lil_matrix((full.size, allx.shape[1]))
        tx_ext[test_sorted - lo, :] = tx
        tx = tx_ext.tocsr()
        ty_ext = np.zeros((full.size, ally.shape[1]))
        ty_ext[test_sorted - lo, :] = ty
        ty = ty_ext

    features = sp.vstack([sp.csr_matrix(allx), sp.csr_matrix(tx)]).tolil()
    features[test_reorder, :] = features[test_sorted, :]
    features = features.tocsr()
    features.sort_indices()

    onehot = np.vstack([ally, ty])
    onehot[test_reorder, :] = onehot[test_sorted, :]
    labels = onehot.argmax(axis=1).astype(np.int64)

    n = features.shape[0]
    n_train = y.shape[0]
    val_end = min(n_train + 500, allx.shape[0])
    split = {
        "train": np.arange(n_train, dtype=np.int64),
        "val": np.arange(n_train, val_end, dtype=np.int64),
        "test": test_sorted,
    }
    directed_entries = sum(len(v) for v in graph.values())
    pairs = ((int(u), int(v)) for u, vs in graph.items() for v in vs)
    edges = dedup_edges(pairs, n)
    raw = {"nodes": n, "edges": directed_entries,
           "features": int(features.shape[1]), "classes": int(onehot.shape[1])}
    return edges, features, labels, split, raw


def load_npz_graph(path: Path):
    with np.load(path, allow_pickle=True) as f:
        adj = sp.csr_matrix(
            (f["adj_data"], f["adj_indices"], f["adj_indptr"]),
            shape=tuple(f["adj_shape"]))
        attr = sp.csr_matrix(
            (f["attr_data"], f["attr_indices"], f["attr_indptr"]),
            shape=tuple(f["attr_shape"]))
        labels = np.asarray(f["labels"], dtype=np.int64)
    coo = adj.tocoo()
    pairs = zip(coo.row.tolist(), coo.col.tolist())
    edges = dedup_edges(pairs, adj.shape[0])
    raw = {"nodes": int(adj.shape[0]), "edges": int(adj.nnz),
           "features": int(attr.shape[1]), "classes": int(labels.max()) + 1}
    attr = attr.tocsr()
    attr.sort_indices()
    return edges, attr, labels, None, raw


def dedup_edges(pairs, n: int) -> np.ndarray:
    """Symmetrized, deduplicated, self-loop-free edge list as (m, 2) with
    i < j, lexicographically sorted."""
    seen = set()
    for u, v in pairs:
        if u == v:
            continue
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge endpoint ({u}, {v}) out of range [0, {n})")
        seen.add((u, v) if u < v else (v, u))
    if not seen:
        return np.empty((0, 2), dtype=np.int64)
    return np.array(sorted(seen), dtype=np.int64)


def write_cadg(out: Path, name: str, edges: np.ndarray, features: sp.csr_matrix,
               labels: np.ndarray, split: dict | None) -> None:
    n, d = features.shape
    classes = int(labels.max()) + 1
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("cadg 1\n")
        fh.write(f"name {name}\n")
        fh.write(f"nodes {n}\n")
        fh.write(f"edges {edges.shape[0]}\n")
        fh.write(f"features {d} sparse\n")
        fh.write(f"classes {classes}\n")
        fh.write("E\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")
        fh.write("X\n")
        coo = features.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i, k, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {k} {float(v)!r}\n")
        fh.write("Y\n")
        for yv in labels:
            fh.write(f"{yv}\n")
        if split is not None:
            fh.write("S\n")
            for part in ("train", "val", "test"):
                for i in np.sort(split[part]):
                    fh.write(f"{part} {i}\n")


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def find_npz(src: Path, dataset: str) -> Path:
    if src.is_file():
        return src
    for candidate in NPZ_CANDIDATES.get(dataset, []) + [f"{dataset}.npz"]:
        path = src / candidate
        if path.exists():
            return path
    raise FileNotFoundError(
        f"no npz archive for {dataset!r} under {src} "
        f"(tried {NPZ_CANDIDATES.get(dataset, []) + [dataset + '.npz']})")


def convert(src: Path, dataset: str, out: Path, name: str | None = None) -> dict:
    """Convert one dataset and return its ConversionReport as a dict."""
    emitted_name = name or dataset
    if (src / f"ind.{dataset}.graph").exists():
        parts = load_planetoid(src, dataset)
        edges, features, labels, split, raw = assemble_citation(parts)
    else:
        edges, features, labels, split, raw = load_npz_graph(find_npz(src, dataset))

    out.parent.mkdir(parents=True, exist_ok=True)
    write_cadg(out, emitted_name, edges, features, labels, split)

    processed = {"nodes": int(features.shape[0]), "edges": int(edges.shape[0])}
    warnings = []
    if dataset in PUBLISHED_STATS:
        want_n, want_m, want_d, want_c = PUBLISHED_STATS[dataset]
        got = (processed["nodes"], processed["edges"],
               raw["features"], int(labels.max()) + 1)
        for label, g, w in zip(("nodes", "edges", "features", "classes"),
                               got, (want_n, want_m, want_d, want_c)):
            if g != w:
                warnings.append(
                    f"{label}: converted {g}, published statistics say {w}")
    if split is not None and split["val"].size < 500:
        warnings.append(
            f"validation range clamped to {split['val'].size} nodes")
    return {
        "dataset": emitted_name,
        "raw": raw,
        "processed": processed,
        "checksum": sha256_of(out),
        "out": str(out),
        "warnings": warnings,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Convert public benchmark dumps to CADG v1")
    parser.add_argument("--dataset", required=True,
                        help="dataset key, e.g. cora or amazon-comp")
    parser.add_argument("--src", required=True,
                        help="directory with the raw files (or the npz itself)")
    parser.add_argument("--out", required=True, help="output .cadg path")
    parser.add_argument("--name", default=None,
                        help="name to embed in the file (defaults to --dataset)")
    args = parser.parse_args(argv)
    try:
        report = convert(Path(args.src), args.dataset, Path(args.out), args.name)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report, indent=2))
    for warning in report["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
