"""scikit-learn style estimator around the contrastive training loop."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import CATEGORIES
from .augment import AugmentConfig, make_views
from .contrastive import ActiveNegatives, PairContext, cosine_sim_matrix, info_nce_loss
from .graph import Graph
from .hans import (
    HansConfig,
    active_count,
    draw_active,
    scheduler_tick,
    stratify,
    swap,
    warmup_state,
)
from .model import adam_step, backward, encode, forward, init_params, normalize_adj, project

_SAMPLING_STREAM = 0x5A3


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    loss_hard: float
    loss_inter: float
    loss_easy: float
    eta_hard: float
    eta_inter: float
    eta_easy: float
    active_hard: int
    active_inter: int
    active_easy: int
    saturated: bool
    time_ms: float

    def to_dict(self, *, with_time=True):
        out = asdict(self)
        if not with_time:
            del out["time_ms"]
        return out


class HansGCL(TransformerMixin, BaseEstimator):
    """Self-supervised node encoder trained with scheduled negatives.

    ``fit`` takes a :class:`~hansgcl.graph.Graph` (labels are ignored) and
    ``transform`` returns node embeddings of a graph with the same feature
    width: encoder output by default, projector output when
    ``embed_projection=True``.

    Ratios are given as an (easy, hard, inter) triple.
    """

    def __init__(
        self,
        hidden_dim=128,
        proj_dim=64,
        epochs=2000,
        lr=5e-4,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        tau=0.5,
        p_e=0.4,
        p_f1=0.3,
        p_f2=0.3,
        theta_max=0.6,
        ratios=(0.1, 0.3, 0.6),
        t_init=60,
        t_interval=20,
        window=10,
        gamma=0.99,
        base_step=0.05,
        step_cap=0.10,
        eta_floor=0.05,
        swap_interval=None,
        literal_eq8=False,
        intra_view_negatives=False,
        embed_projection=False,
        random_state=0,
        callback=None,
    ):
        self.hidden_dim = hidden_dim
        self.proj_dim = proj_dim
        self.epochs = epochs
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.tau = tau
        self.p_e = p_e
        self.p_f1 = p_f1
        self.p_f2 = p_f2
        self.theta_max = theta_max
        self.ratios = ratios
        self.t_init = t_init
        self.t_interval = t_interval
        self.window = window
        self.gamma = gamma
        self.base_step = base_step
        self.step_cap = step_cap
        self.eta_floor = eta_floor
        self.swap_interval = swap_interval
        self.literal_eq8 = literal_eq8
        self.intra_view_negatives = intra_view_negatives
        self.embed_projection = embed_projection
        self.random_state = random_state
        self.callback = callback

    def hans_config(self):
        return HansConfig(
            theta_max=self.theta_max, ratios=self.ratios, t_init=self.t_init,
            t_interval=self.t_interval, window=self.window, gamma=self.gamma,
            base_step=self.base_step, step_cap=self.step_cap, eta_floor=self.eta_floor,
            swap_interval=self.swap_interval, seed=self.random_state,
        )

    def augment_config(self):
        return AugmentConfig(p_e=self.p_e, p_f1=self.p_f1, p_f2=self.p_f2,
                             rng_seed=self.random_state)

    def _sampling_rng(self, epoch):
        return np.random.default_rng([_SAMPLING_STREAM, int(self.random_state), int(epoch)])

    def fit(self, graph, y=None):
        if not isinstance(graph, Graph):
            raise TypeError("fit expects a hansgcl.graph.Graph")
        if graph.num_nodes < 4:
            raise ValueError("training needs at least 4 nodes")
        hcfg = self.hans_config()
        acfg = self.augment_config()
        if self.epochs < 1:
            raise ValueError("epochs must be positive")

        n = graph.num_nodes
        params = init_params(graph.num_features, self.hidden_dim, self.proj_dim, self.random_state)
        ledger = warmup_state(hcfg)
        pools = None
        active = ActiveNegatives.empty(n)
        swap_every = hcfg.effective_swap_interval
        records = []

        for epoch in range(1, self.epochs + 1):
            try:
                record, params, ledger, pools, active = self._epoch(
                    graph, params, ledger, pools, active, hcfg, acfg, swap_every, epoch)
            except (FloatingPointError, ValueError) as exc:
                raise type(exc)(f"epoch {epoch}: {exc}") from exc
            records.append(record)
            if self.callback is not None:
                self.callback(record)

        self.params_ = params
        self.ledger_ = ledger
        self.pools_ = pools
        self.history_ = records
        self.n_features_in_ = graph.num_features
        return self

    def _epoch(self, graph, params, ledger, pools, active, hcfg, acfg, swap_every, epoch):
        n = graph.num_nodes
        view1, view2 = make_views(graph, acfg, epoch)
        c1 = forward(params, normalize_adj(view1.edges, n), view1.features)
        c2 = forward(params, normalize_adj(view2.edges, n), view2.features)

        start = time.perf_counter()
        checkpoint = epoch == 1 or epoch % hcfg.t_interval == 0
        if checkpoint:
            pools = stratify(cosine_sim_matrix(c1.H, c2.H), hcfg.ratios)
        if ledger.saturated and epoch % swap_every == 0:
            active = swap(pools, _resized(active, pools, ledger), ledger,
                          self._sampling_rng(epoch))
        elif checkpoint or _counts_changed(active, pools, ledger):
            active = draw_active(pools, ledger, self._sampling_rng(epoch))

        result = info_nce_loss(
            PairContext(c1.H, c2.H, self.tau), active,
            literal_eq8=self.literal_eq8,
            intra_view_negatives=self.intra_view_negatives,
        )
        grads = backward(params, [c1, c2], [result.grad_H1, result.grad_H2])
        eta_used = dict(ledger.eta)
        saturated_used = ledger.saturated
        scheduler_tick(ledger, hcfg, epoch, result.per_category)
        elapsed = (time.perf_counter() - start) * 1e3

        adam_step(params, grads, self.lr, self.beta1, self.beta2, self.eps)
        counts = active.counts()
        record = EpochRecord(
            epoch=epoch,
            loss=result.loss,
            **{f"loss_{c}": result.per_category[c] for c in CATEGORIES},
            **{f"eta_{c}": eta_used[c] for c in CATEGORIES},
            **{f"active_{c}": counts[c] * n for c in CATEGORIES},
            saturated=saturated_used,
            time_ms=elapsed,
        )
        return record, params, ledger, pools, active

    def transform(self, graph):
        check_is_fitted(self, "params_")
        if graph.num_features != self.n_features_in_:
            raise ValueError(
                f"graph has {graph.num_features} features, estimator was fit on {self.n_features_in_}"
            )
        Z = encode(self.params_, normalize_adj(graph.edges, graph.num_nodes), graph.features)
        if self.embed_projection:
            return project(self.params_, Z)
        return Z

    def fit_transform(self, graph, y=None):
        return self.fit(graph, y).transform(graph)


def _target_counts(pools, ledger):
    n = pools.num_anchors
    sizes = pools.sizes()
    return {cat: active_count(ledger, cat, n - 1, sizes[cat]) for cat in CATEGORIES}


def _counts_changed(active, pools, ledger):
    return active.counts() != _target_counts(pools, ledger)


def _resized(active, pools, ledger):
    """Placeholder sets with the ledger-implied sizes, used as the swap template."""
    if not _counts_changed(active, pools, ledger):
        return active
    n = pools.num_anchors
    return ActiveNegatives(
        **{cat: np.zeros((n, k), dtype=np.int64) for cat, k in _target_counts(pools, ledger).items()}
    )
