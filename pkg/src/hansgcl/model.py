"""Two-layer GCN encoder, two-layer projection head, manual backprop and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

PARAM_NAMES = ("W1", "W2", "P1", "b1", "P2", "b2")


def normalize_adj(edges, n):
    """Symmetrically normalized adjacency with self-loops, D^-1/2 (A + I) D^-1/2.

    Returned as a CSR matrix; an isolated node keeps a unit self-loop.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([edges[:, 0], edges[:, 1], loops])
    cols = np.concatenate([edges[:, 1], edges[:, 0], loops])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    data = inv_sqrt[rows] * inv_sqrt[cols]
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adj.sort_indices()
    return adj


@dataclass
class ModelParams:
    """Encoder weights ``W1`` (d x h), ``W2`` (h x h) and projector ``P1, b1, P2, b2``.

    ``m`` and ``v`` hold the Adam moments keyed by parameter name; ``t`` is
    the Adam step counter.
    """

    W1: np.ndarray
    W2: np.ndarray
    P1: np.ndarray
    b1: np.ndarray
    P2: np.ndarray
    b2: np.ndarray
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        for name in PARAM_NAMES:
            self.m.setdefault(name, np.zeros_like(getattr(self, name)))
            self.v.setdefault(name, np.zeros_like(getattr(self, name)))

    def arrays(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return ModelParams(
            **{name: getattr(self, name).copy() for name in PARAM_NAMES},
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            t=self.t,
        )

    def save(self, path):
        payload = {name: getattr(self, name) for name in PARAM_NAMES}
        payload.update({f"m_{k}": a for k, a in self.m.items()})
        payload.update({f"v_{k}": a for k, a in self.v.items()})
        np.savez(path, t=np.array(self.t), **payload)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(
                **{name: data[name].copy() for name in PARAM_NAMES},
                m={name: data[f"m_{name}"].copy() for name in PARAM_NAMES},
                v={name: data[f"v_{name}"].copy() for name in PARAM_NAMES},
                t=int(data["t"]),
            )


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(d, h, h_p, seed):
    """Glorot-uniform weights, zero biases and zero Adam state."""
    if min(d, h, h_p) < 1:
        raise ValueError("layer widths must be positive")
    rng = np.random.default_rng(seed)
    return ModelParams(
        W1=_glorot(rng, d, h),
        W2=_glorot(rng, h, h),
        P1=_glorot(rng, h, h_p),
        b1=np.zeros(h_p),
        P2=_glorot(rng, h_p, h_p),
        b2=np.zeros(h_p),
    )


def _elu(u):
    return np.where(u > 0, u, np.expm1(np.minimum(u, 0.0)))


def _check(arr, what):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}; parameters have likely diverged")
    return arr


@dataclass
class ForwardCache:
    adj: sp.csr_matrix
    X: np.ndarray
    pre1: np.ndarray
    hidden: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    E: np.ndarray
    H: np.ndarray


def encode(params, adj, X, *, cache=False):
    """Z = adj . relu(adj . X . W1) . W2 (the second layer is linear)."""
    pre1 = adj @ (X @ params.W1)
    hidden = np.maximum(pre1, 0.0)
    Z = _check(adj @ (hidden @ params.W2), "encoder output")
    if cache:
        return Z, (pre1, hidden)
    return Z


def project(params, Z, *, cache=False):
    """H = elu(Z . P1 + b1) . P2 + b2."""
    U = Z @ params.P1 + params.b1
    E = _elu(U)
    H = _check(E @ params.P2 + params.b2, "projection output")
    if cache:
        return H, (U, E)
    return H


def forward(params, adj, X):
    """Run encoder and projector, keeping what :func:`backward` needs."""
    X = np.asarray(X, dtype=np.float64)
    Z, (pre1, hidden) = encode(params, adj, X, cache=True)
    H, (U, E) = project(params, Z, cache=True)
    return ForwardCache(adj, X, pre1, hidden, Z, U, E, H)


def backward(params, caches, grads_H):
    """Exact parameter gradients given dL/dH for each cached view, summed over views."""
    if len(caches) != len(grads_H):
        raise ValueError("need one upstream gradient per cached view")
    grads = {name: np.zeros_like(a) for name, a in params.arrays().items()}
    for c, dH in zip(caches, grads_H):
        dH = np.asarray(dH, dtype=np.float64)
        if dH.shape != c.H.shape:
            raise ValueError(f"upstream gradient shape {dH.shape} != output shape {c.H.shape}")
        grads["P2"] += c.E.T @ dH
        grads["b2"] += dH.sum(axis=0)
        dU = (dH @ params.P2.T) * np.where(c.U > 0, 1.0, np.exp(np.minimum(c.U, 0.0)))
        grads["P1"] += c.Z.T @ dU
        grads["b1"] += dU.sum(axis=0)
        dZ = dU @ params.P1.T
        # adj is symmetric, so adj.T @ g == adj @ g
        d_hw2 = c.adj @ dZ
        grads["W2"] += c.hidden.T @ d_hw2
        d_pre1 = (d_hw2 @ params.W2.T) * (c.pre1 > 0)
        grads["W1"] += c.X.T @ (c.adj @ d_pre1)
    return grads


def adam_step(params, grads, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied in place; returns ``params``."""
    params.t += 1
    t = params.t
    for name in PARAM_NAMES:
        g = grads[name]
        m = params.m[name]
        v = params.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        getattr(params, name)[...] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params
