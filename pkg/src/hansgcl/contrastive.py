"""Cross-view InfoNCE over a scheduled subset of negatives, with exact gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import CATEGORIES

NORM_FLOOR = 1e-12


def _row_norms(H):
    return np.maximum(np.linalg.norm(H, axis=1), NORM_FLOOR)


def cosine_sim_matrix(H_a, H_b):
    """Pairwise cosine similarities; rows with norm below 1e-12 use 1e-12."""
    H_a = np.asarray(H_a, dtype=np.float64)
    H_b = np.asarray(H_b, dtype=np.float64)
    S = (H_a / _row_norms(H_a)[:, None]) @ (H_b / _row_norms(H_b)[:, None]).T
    return np.clip(S, -1.0, 1.0)


def negatives_full(n):
    """Every opposing-view candidate ``j != i`` for each anchor, as an (n, n-1) array."""
    if n < 2:
        raise ValueError("need at least two nodes to form negatives")
    grid = np.tile(np.arange(n - 1), (n, 1))
    return grid + (grid >= np.arange(n)[:, None])


@dataclass(frozen=True, eq=False)
class ActiveNegatives:
    """Currently scheduled negatives: one (n, k_cat) index array per category.

    Every anchor holds the same number of negatives per category, which is
    what budget fractions of equal-sized pools produce.
    """

    hard: np.ndarray
    inter: np.ndarray
    easy: np.ndarray

    def __post_init__(self):
        n = None
        for cat in CATEGORIES:
            arr = np.asarray(getattr(self, cat), dtype=np.int64)
            if arr.ndim != 2:
                raise ValueError(f"{cat} negatives must be a 2-D (anchors x k) array")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise ValueError("all categories must cover the same anchors")
            object.__setattr__(self, cat, arr)

    @classmethod
    def empty(cls, n):
        z = np.zeros((n, 0), dtype=np.int64)
        return cls(z, z, z)

    @classmethod
    def full(cls, n, category="hard"):
        """All candidates active, held in ``category``."""
        arrays = {cat: np.zeros((n, 0), dtype=np.int64) for cat in CATEGORIES}
        arrays[category] = negatives_full(n)
        return cls(**arrays)

    @property
    def num_anchors(self):
        return self.hard.shape[0]

    def counts(self):
        """Negatives per anchor for each category."""
        return {cat: getattr(self, cat).shape[1] for cat in CATEGORIES}

    def stacked(self):
        return np.concatenate([getattr(self, cat) for cat in CATEGORIES], axis=1)

    def validate(self):
        n = self.num_anchors
        idx = self.stacked()
        if idx.size:
            if idx.min() < 0 or idx.max() >= n:
                raise ValueError("negative index out of range")
            if np.any(idx == np.arange(n)[:, None]):
                raise ValueError("an anchor cannot be its own negative")
            s = np.sort(idx, axis=1)
            if np.any(s[:, 1:] == s[:, :-1]):
                raise ValueError("negatives repeat within an anchor")


@dataclass(frozen=True, eq=False)
class PairContext:
    """Projected embeddings of both views plus the temperature."""

    H1: np.ndarray
    H2: np.ndarray
    tau: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        H1 = np.asarray(self.H1, dtype=np.float64)
        H2 = np.asarray(self.H2, dtype=np.float64)
        if H1.shape != H2.shape or H1.ndim != 2:
            raise ValueError("views must have matching (n, h_p) embeddings")
        if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
            raise FloatingPointError("embeddings contain non-finite values")
        object.__setattr__(self, "H1", H1)
        object.__setattr__(self, "H2", H2)

    @property
    def row_norms(self):
        return _row_norms(self.H1), _row_norms(self.H2)


@dataclass
class LossResult:
    loss: float
    per_category: dict
    grad_H1: np.ndarray
    grad_H2: np.ndarray


def _lse(logits):
    if logits.shape[1] == 0:
        return np.full(logits.shape[0], -np.inf)
    m = logits.max(axis=1, keepdims=True)
    return m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))


def _anchor_losses(pos, negs, literal):
    """Per-anchor loss and logit gradients (positive column first)."""
    if literal:
        lse = _lse(negs)
        has_neg = negs.shape[1] > 0
        if not has_neg:
            return np.zeros_like(pos), np.zeros_like(pos), negs * 0.0
        loss = lse - pos
        d_neg = np.exp(negs - lse[:, None])
        return loss, -np.ones_like(pos), d_neg
    logits = np.concatenate([pos[:, None], negs], axis=1)
    lse = _lse(logits)
    loss = lse - pos
    p = np.exp(logits - lse[:, None])
    return loss, p[:, 0] - 1.0, p[:, 1:]


def _backprop_norm(H, norms, dN):
    """Gradient through row normalisation N = H / max(|H|, floor)."""
    N = H / norms[:, None]
    radial = np.sum(N * dN, axis=1, keepdims=True)
    clipped = (np.linalg.norm(H, axis=1) < NORM_FLOOR)[:, None]
    return np.where(clipped, dN, dN - N * radial) / norms[:, None]


def info_nce_loss(ctx, active, *, literal_eq8=False, intra_view_negatives=False):
    """Symmetrised InfoNCE restricted to the active negatives.

    For anchor ``i`` in view 1 the loss is
    ``-log(exp(s_ii/tau) / (exp(s_ii/tau) + sum_j exp(s_ij/tau)))`` over its active
    ``j``; view 2 anchors are scored the same way against view-1 negatives,
    and the two directions are averaged. ``per_category`` repeats the
    computation with only one category's negatives in the denominator.

    ``literal_eq8`` drops the positive term from the denominator; anchors
    without negatives then contribute zero. ``intra_view_negatives`` adds
    same-view pairs for the same active indices.
    """
    n = ctx.H1.shape[0]
    if active.num_anchors != n:
        raise ValueError(f"active negatives cover {active.num_anchors} anchors, embeddings have {n}")
    tau = ctx.tau
    r1, r2 = ctx.row_norms
    N1 = ctx.H1 / r1[:, None]
    N2 = ctx.H2 / r2[:, None]
    S12 = N1 @ N2.T
    pos = np.diag(S12) / tau
    rows = np.arange(n)[:, None]
    idx = active.stacked()

    neg1 = S12[rows, idx] / tau            # s(h_i^1, h_j^2)
    neg2 = S12[idx, rows] / tau            # s(h_i^2, h_j^1)
    if intra_view_negatives:
        S11 = N1 @ N1.T
        S22 = N2 @ N2.T
        neg1 = np.concatenate([neg1, S11[rows, idx] / tau], axis=1)
        neg2 = np.concatenate([neg2, S22[rows, idx] / tau], axis=1)

    l1, dpos1, dneg1 = _anchor_losses(pos, neg1, literal_eq8)
    l2, dpos2, dneg2 = _anchor_losses(pos, neg2, literal_eq8)
    loss = float(np.mean(0.5 * (l1 + l2)))
    if not np.isfinite(loss):
        raise FloatingPointError("contrastive loss is not finite; check the temperature and embeddings")

    k = idx.shape[1]
    scale = 1.0 / (2.0 * n * tau)
    G = np.zeros((n, n))                   # dL/dS12
    G[np.arange(n), np.arange(n)] = (dpos1 + dpos2) * scale
    if k:
        G[rows, idx] += dneg1[:, :k] * scale
        G2 = np.zeros((n, n))
        G2[rows, idx] = dneg2[:, :k] * scale
        G += G2.T
    dN1 = G @ N2
    dN2 = G.T @ N1
    if intra_view_negatives and k:
        G11 = np.zeros((n, n))
        G11[rows, idx] = dneg1[:, k:] * scale
        G22 = np.zeros((n, n))
        G22[rows, idx] = dneg2[:, k:] * scale
        dN1 += (G11 + G11.T) @ N1
        dN2 += (G22 + G22.T) @ N2

    per_category = {}
    start = 0
    for cat in CATEGORIES:
        width = getattr(active, cat).shape[1]
        cols = np.arange(start, start + width)
        if intra_view_negatives:
            cols = np.concatenate([cols, cols + k])
        c1, _, _ = _anchor_losses(pos, neg1[:, cols], literal_eq8)
        c2, _, _ = _anchor_losses(pos, neg2[:, cols], literal_eq8)
        per_category[cat] = float(np.mean(0.5 * (c1 + c2)))
        start += width

    return LossResult(
        loss=loss,
        per_category=per_category,
        grad_H1=_backprop_norm(ctx.H1, r1, dN1),
        grad_H2=_backprop_norm(ctx.H2, r2, dN2),
    )
