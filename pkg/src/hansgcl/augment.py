"""Stochastic two-view augmentation: edge removal and two feature-masking schemes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_probability

# Stream tag mixed into the seed so view randomness never collides with
# other consumers of the same (seed, epoch) pair.
_AUGMENT_STREAM = 0xA06


@dataclass(frozen=True)
class AugmentConfig:
    p_e: float = 0.4
    p_f1: float = 0.3
    p_f2: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_e", "p_f1", "p_f2"):
            check_probability(getattr(self, name), name)


@dataclass(frozen=True, eq=False)
class View:
    edges: np.ndarray
    features: np.ndarray


def drop_edges(edges, p_e, rng):
    """Keep each undirected edge independently with probability ``1 - p_e``.

    One draw per canonical edge, so the derived adjacency stays symmetric.
    """
    p_e = check_probability(p_e, "p_e")
    edges = np.asarray(edges).reshape(-1, 2)
    if p_e == 0.0:
        return edges.copy()
    keep = rng.random(edges.shape[0]) >= p_e
    return edges[keep]


def mask_features_v1(X, p_f, rng):
    """Zero whole columns of ``X``; each column survives with probability ``1 - p_f``."""
    p_f = check_probability(p_f, "p_f")
    X = np.asarray(X, dtype=np.float64)
    if p_f == 0.0:
        return X.copy()
    keep = rng.random(X.shape[1]) >= p_f
    return X * keep


def mask_features_v2(X, p_f, rng):
    """Keep a random ceil(d/2) columns intact and mask the rest element-wise.

    The unfixed block receives an n-by-floor(d/2) Bernoulli(1 - p_f) mask, so
    it is thinned at both row and column granularity.
    """
    p_f = check_probability(p_f, "p_f")
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if d < 2:
        raise ValueError("mask_features_v2 needs at least two feature columns")
    out = X.copy()
    perm = rng.permutation(d)
    unfixed = perm[(d + 1) // 2:]
    if p_f > 0.0:
        keep = rng.random((n, unfixed.shape[0])) >= p_f
        out[:, unfixed] *= keep
    return out


def view_rngs(seed, epoch):
    """Two independent generators for the views of ``epoch``."""
    ss = np.random.SeedSequence([_AUGMENT_STREAM, int(seed), int(epoch)])
    return [np.random.default_rng(s) for s in ss.spawn(2)]


def make_views(graph, cfg, epoch):
    """Build the (view 1, view 2) pair for one epoch, deterministic in (seed, epoch)."""
    rng1, rng2 = view_rngs(cfg.rng_seed, epoch)
    view1 = View(drop_edges(graph.edges, cfg.p_e, rng1),
                 mask_features_v1(graph.features, cfg.p_f1, rng1))
    if graph.num_features >= 2:
        x2 = mask_features_v2(graph.features, cfg.p_f2, rng2)
    else:
        x2 = mask_features_v1(graph.features, cfg.p_f2, rng2)
    view2 = View(drop_edges(graph.edges, cfg.p_e, rng2), x2)
    return view1, view2
