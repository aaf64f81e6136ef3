"""Attributed graphs: storage, plain-text I/O, planted-partition generation, splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive_int, check_probability


class DatasetError(ValueError):
    """A dataset directory is missing files or holds malformed content."""


def canonical_edges(pairs, num_nodes):
    """Return unique undirected edges as an (m, 2) int64 array with i < j rows.

    Rows are sorted lexicographically. Self-loops and out-of-range endpoints
    raise ``ValueError``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if pairs.min() < 0 or pairs.max() >= num_nodes:
        raise ValueError("edge endpoint out of range [0, num_nodes)")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValueError("self-loops are not allowed")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph with node labels.

    ``edges`` holds each undirected edge once, as ``(i, j)`` with ``i < j``.
    The adjacency matrix is derived on demand.
    """

    features: np.ndarray
    edges: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain NaN or Inf")
        n = features.shape[0]
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != n:
            raise ValueError(f"expected {n} labels, got {labels.shape[0]}")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        canon = canonical_edges(edges, n)
        if canon.shape != edges.shape or not np.array_equal(canon, edges):
            raise ValueError("edges must be unique, sorted, canonical (i < j) pairs")
        features.setflags(write=False)
        labels.setflags(write=False)
        canon.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "num_classes", int(self.num_classes))

    @classmethod
    def from_pairs(cls, features, pairs, labels, num_classes):
        """Build a graph from arbitrary (possibly reversed or repeated) pairs."""
        features = np.asarray(features, dtype=np.float64)
        return cls(features, canonical_edges(pairs, features.shape[0]), labels, num_classes)

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def adjacency(self):
        """Symmetric binary adjacency as a CSR matrix (zero diagonal)."""
        return edges_to_adjacency(self.edges, self.num_nodes)


def edges_to_adjacency(edges, num_nodes):
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.float64)
    return sp.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))


@dataclass(frozen=True, eq=False)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.train, self.val, self.test))


# ---------------------------------------------------------------------------
# Plain-text dataset directories

_META_KEYS = ("num_nodes", "num_features", "num_classes")


def _read_lines(path):
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh]


def _parse_int(token, where):
    try:
        return int(token, 10)
    except ValueError:
        raise DatasetError(f"{where}: non-integer cell {token!r}") from None


def load_graph(dir_path):
    """Read ``meta.json``, ``edges.tsv``, ``features.csv`` and ``labels.csv``.

    Each undirected edge may appear once per direction; a repeated
    directed line or a self-loop is rejected.
    """
    root = Path(dir_path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise DatasetError(f"missing dataset file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"meta.json is not valid JSON: {exc}") from None
    if not isinstance(meta, dict):
        raise DatasetError("meta.json must hold a JSON object")
    for key in _META_KEYS:
        if not isinstance(meta.get(key), int) or isinstance(meta.get(key), bool) or meta[key] < 0:
            raise DatasetError(f"meta.json: {key!r} must be a non-negative integer")
    n, d, c = (meta[k] for k in _META_KEYS)

    feature_lines = [ln for ln in _read_lines(root / "features.csv") if ln.strip()]
    if len(feature_lines) != n:
        raise DatasetError(f"features.csv: expected {n} rows, found {len(feature_lines)}")
    features = np.empty((n, d), dtype=np.float64)
    for k, line in enumerate(feature_lines):
        cells = line.split(",")
        if len(cells) != d:
            raise DatasetError(f"features.csv line {k + 1}: expected {d} columns, found {len(cells)}")
        try:
            features[k] = [float(cell) for cell in cells]
        except ValueError:
            raise DatasetError(f"features.csv line {k + 1}: non-numeric cell") from None
    if not np.all(np.isfinite(features)):
        raise DatasetError("features.csv contains NaN or Inf")

    label_lines = [ln for ln in _read_lines(root / "labels.csv") if ln.strip()]
    if len(label_lines) != n:
        raise DatasetError(f"labels.csv: expected {n} rows, found {len(label_lines)}")
    labels = np.array(
        [_parse_int(ln.strip(), f"labels.csv line {k + 1}") for k, ln in enumerate(label_lines)],
        dtype=np.int64,
    )
    if n and (labels.min() < 0 or labels.max() >= c):
        raise DatasetError(f"labels.csv: label outside [0, {c})")

    seen = set()
    pairs = []
    for k, line in enumerate(_read_lines(root / "edges.tsv")):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise DatasetError(f"edges.tsv line {k + 1}: expected two node indices")
        i = _parse_int(tokens[0], f"edges.tsv line {k + 1}")
        j = _parse_int(tokens[1], f"edges.tsv line {k + 1}")
        if not (0 <= i < n and 0 <= j < n):
            raise DatasetError(f"edges.tsv line {k + 1}: node index out of range [0, {n})")
        if i == j:
            raise DatasetError(f"edges.tsv line {k + 1}: self-loop {i}")
        if (i, j) in seen:
            raise DatasetError(f"edges.tsv line {k + 1}: duplicate edge {i} {j}")
        seen.add((i, j))
        pairs.append((i, j))

    return Graph(features, canonical_edges(pairs, n), labels, c)


def save_graph(graph, dir_path, *, both_directions=False):
    """Write ``graph`` in the plain-text directory format read by :func:`load_graph`."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": graph.num_nodes, "num_features": graph.num_features,
            "num_classes": graph.num_classes}
    (root / "meta.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")
    with open(root / "edges.tsv", "w", encoding="utf-8") as fh:
        for i, j in graph.edges:
            fh.write(f"{i}\t{j}\n")
            if both_directions:
                fh.write(f"{j}\t{i}\n")
    with open(root / "features.csv", "w", encoding="utf-8") as fh:
        for row in graph.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(root / "labels.csv", "w", encoding="utf-8") as fh:
        for y in graph.labels:
            fh.write(f"{int(y)}\n")


# ---------------------------------------------------------------------------
# Synthetic graphs

def generate_sbm(n, num_classes, p_in, p_out, d, feature_shift, seed):
    """Planted-partition graph with equal communities and shifted Gaussian features.

    Node ``i`` belongs to community ``i // (n // num_classes)``. Features are
    standard normal; community ``c`` gets ``feature_shift`` added on its own
    block of ``d // num_classes`` coordinates.
    """
    n = check_positive_int(n, "n")
    num_classes = check_positive_int(num_classes, "num_classes")
    d = check_positive_int(d, "d")
    p_in = check_probability(p_in, "p_in", allow_one=True)
    p_out = check_probability(p_out, "p_out", allow_one=True)
    if not (p_out < p_in or p_in == p_out == 0.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if n % num_classes:
        raise ValueError(f"n={n} is not divisible by num_classes={num_classes}")
    if d < num_classes:
        raise ValueError(f"d={d} must be at least num_classes={num_classes}")

    rng = np.random.default_rng(seed)
    labels = np.arange(n) // (n // num_classes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.shape[0]) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)

    features = rng.standard_normal((n, d))
    block = d // num_classes
    for c in range(num_classes):
        features[labels == c, c * block:(c + 1) * block] += feature_shift
    return Graph(features, edges, labels, num_classes)


def make_splits(graph_or_n, seed):
    """Random 10% / 10% / 80% train/val/test split; rounding leftovers go to test."""
    n = graph_or_n if isinstance(graph_or_n, (int, np.integer)) else graph_or_n.num_nodes
    if n < 10:
        raise ValueError(f"need at least 10 nodes to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    k = n // 10
    masks = np.zeros((3, n), dtype=bool)
    masks[0, perm[:k]] = True
    masks[1, perm[k:2 * k]] = True
    masks[2, perm[2 * k:]] = True
    return SplitMasks(masks[0], masks[1], masks[2])
