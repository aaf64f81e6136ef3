"""Hardness-aware negative scheduling.

Negatives of every anchor are split by similarity rank into hard, intermediate
and easy pools. Each category owns a fixed slice ``ratio * theta_max`` of the
global budget, of which a fraction ``eta`` is in use. After a warm-up, ``eta``
grows one category per checkpoint, and only while the windowed loss of some
category has stopped improving. Once the global budget is used up, active
sets are periodically re-sampled at fixed size.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field

import numpy as np

from ._validation import CATEGORIES, ConfigError, check_positive_int, check_ratios
from .contrastive import ActiveNegatives

ETA_INIT = 0.05
NOMINAL_WEIGHTS = {"hard": 1.0, "inter": 1.0, "easy": 0.5}
SATURATION_TOL = 1e-12
# Slack for floor() on products such as 0.2 * 0.25 * 100 that land a hair
# below an integer in binary floating point.
COUNT_TOL = 1e-9


@dataclass(frozen=True)
class HansConfig:
    theta_max: float = 0.6
    ratios: tuple = (0.1, 0.3, 0.6)  # (easy, hard, inter)
    t_init: int = 60
    t_interval: int = 20
    window: int = 10
    gamma: float = 0.99
    base_step: float = 0.05
    step_cap: object = 0.10          # float, or mapping category -> cap
    eta_floor: float = 0.05
    swap_interval: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.theta_max, numbers.Real) or not 0.0 <= self.theta_max <= 1.0:
            raise ConfigError(f"theta_max must lie in [0, 1], got {self.theta_max!r}")
        object.__setattr__(self, "ratios", check_ratios(self.ratios))
        check_positive_int(self.t_init, "t_init", minimum=0)
        check_positive_int(self.t_interval, "t_interval")
        check_positive_int(self.window, "window")
        if 2 * self.window > self.t_init:
            raise ConfigError(f"t_init={self.t_init} must be at least twice window={self.window}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.base_step < 0:
            raise ConfigError("base_step must be non-negative")
        caps = self.step_caps
        if any(c < 0 for c in caps.values()):
            raise ConfigError("step_cap must be non-negative")
        if not 0.0 <= self.eta_floor <= 1.0:
            raise ConfigError("eta_floor must lie in [0, 1]")
        if self.swap_interval is not None:
            check_positive_int(self.swap_interval, "swap_interval")

    @property
    def step_caps(self):
        if isinstance(self.step_cap, dict):
            missing = set(CATEGORIES) - set(self.step_cap)
            if missing:
                raise ConfigError(f"step_cap mapping lacks {sorted(missing)}")
            return {cat: float(self.step_cap[cat]) for cat in CATEGORIES}
        return {cat: float(self.step_cap) for cat in CATEGORIES}

    @property
    def ratio_map(self):
        easy, hard, inter = self.ratios
        return {"hard": hard, "inter": inter, "easy": easy}

    @property
    def category_budgets(self):
        """Per-category caps ``ratio * theta_max`` as fractions of all candidates."""
        return {cat: r * self.theta_max for cat, r in self.ratio_map.items()}

    @property
    def effective_swap_interval(self):
        return self.swap_interval or self.t_interval


@dataclass
class BudgetLedger:
    """Scheduler state: consumed fractions, round-robin cursor, loss history."""

    theta_max: float
    budgets: dict
    eta: dict
    cursor: int = 0
    history: dict = field(default_factory=lambda: {cat: [] for cat in CATEGORIES})
    saturated: bool = False
    epoch: int = 0
    last_update: tuple | None = None  # (epoch, category, delta) of the latest step

    @property
    def used(self):
        """Fraction of all candidates in use, summed over categories."""
        return sum(self.eta[c] * self.budgets[c] for c in CATEGORIES)

    @property
    def eta_total(self):
        """Fraction of the global budget in use."""
        return self.used / self.theta_max if self.theta_max > 0 else 1.0

    def refresh_saturation(self):
        self.saturated = self.saturated or self.used >= self.theta_max - SATURATION_TOL
        return self.saturated

    def to_json(self):
        out = {
            "epoch": self.epoch,
            "cursor": self.cursor,
            "saturated": self.saturated,
            "theta_max": self.theta_max,
        }
        for cat in CATEGORIES:
            out[f"eta_{cat}"] = self.eta[cat]
            out[f"budget_{cat}"] = self.budgets[cat]
            out[f"history_{cat}"] = list(self.history[cat])
        return out

    @classmethod
    def from_json(cls, obj):
        return cls(
            theta_max=float(obj["theta_max"]),
            budgets={cat: float(obj[f"budget_{cat}"]) for cat in CATEGORIES},
            eta={cat: float(obj[f"eta_{cat}"]) for cat in CATEGORIES},
            cursor=int(obj["cursor"]),
            history={cat: [float(x) for x in obj.get(f"history_{cat}", [])] for cat in CATEGORIES},
            saturated=bool(obj["saturated"]),
            epoch=int(obj["epoch"]),
        )


@dataclass(frozen=True, eq=False)
class NegativePools:
    """Per-anchor candidate pools, each row ordered by descending similarity."""

    hard: np.ndarray
    inter: np.ndarray
    easy: np.ndarray

    @property
    def num_anchors(self):
        return self.hard.shape[0]

    def sizes(self):
        return {cat: getattr(self, cat).shape[1] for cat in CATEGORIES}


# ---------------------------------------------------------------------------
# Stratification

def pool_sizes(n, ratios):
    """(k_hard, k_inter, k_easy) for ``n`` nodes: rounded ratio shares of n - 1."""
    easy, hard, _ = check_ratios(ratios)
    m = n - 1
    k_hard = min(m, int(round(hard * m)))
    k_easy = min(m - k_hard, int(round(easy * m)))
    return k_hard, m - k_hard - k_easy, k_easy


def stratify(similarity, ratios):
    """Split every anchor's candidates into hard / inter / easy pools.

    ``similarity[i, j]`` is s(h_i^1, h_j^2). Candidates are sorted by
    descending similarity, ties broken by ascending node index; the top
    ``k_hard`` form the hard pool, the bottom ``k_easy`` the easy pool.
    """
    S = np.array(similarity, dtype=np.float64)
    n = S.shape[0]
    if S.ndim != 2 or S.shape[1] != n:
        raise ValueError("similarity must be a square matrix")
    if n < 4:
        raise ValueError(f"stratification needs at least 4 nodes, got {n}")
    np.fill_diagonal(S, np.inf)
    order = np.argsort(-S, axis=1, kind="stable")[:, 1:]
    k_hard, k_inter, _ = pool_sizes(n, ratios)
    return NegativePools(
        hard=order[:, :k_hard],
        inter=order[:, k_hard:k_hard + k_inter],
        easy=order[:, k_hard + k_inter:],
    )


# ---------------------------------------------------------------------------
# Ledger arithmetic

def warmup_state(cfg):
    ledger = BudgetLedger(
        theta_max=float(cfg.theta_max),
        budgets=cfg.category_budgets,
        eta={cat: ETA_INIT for cat in CATEGORIES},
    )
    ledger.refresh_saturation()
    return ledger


def gate_check(history, t, e, gamma):
    """Loss gate per category: fires when the last ``e`` losses summed are not
    below ``gamma`` times the ``e`` before them.

    ``history[cat][k]`` is the loss of epoch ``k + 1``.
    """
    fired = {}
    for cat in CATEGORIES:
        series = history[cat]
        if t < 2 * e or len(series) < t:
            raise ValueError(f"gate needs {2 * e} epochs of history up to epoch {t}")
        current = math.fsum(series[t - e:t])
        previous = math.fsum(series[t - 2 * e:t - e])
        fired[cat] = current >= gamma * previous
    return fired


def loss_weights(window_losses):
    """Loss shares per category, or the nominal (0.4, 0.4, 0.2) when any loss is <= 0."""
    if not isinstance(window_losses, dict):
        window_losses = dict(zip(CATEGORIES, window_losses))
    if all(window_losses[c] > 0 for c in CATEGORIES):
        total = math.fsum(window_losses[c] for c in CATEGORIES)
        return {c: window_losses[c] / total for c in CATEGORIES}
    total = sum(NOMINAL_WEIGHTS.values())
    return {c: NOMINAL_WEIGHTS[c] / total for c in CATEGORIES}


def step_size(ledger, cfg, category, w_cat):
    """Smallest of: loss-proportional step, per-step cap, category room, global room."""
    budget = ledger.budgets[category]
    if budget <= 0:
        raise ValueError(f"category {category!r} has no budget")
    u1 = cfg.base_step * w_cat
    u2 = cfg.step_caps[category]
    u3 = 1.0 - ledger.eta[category]
    u4 = (ledger.theta_max - ledger.used) / budget
    return max(0.0, min(u1, u2, u3, u4))


def apply_step(ledger, category, delta):
    """Add ``delta`` to the category's fraction (in place) and update saturation."""
    if delta < 0:
        raise ValueError("budget fractions never decrease")
    if delta == 0:
        return ledger
    eta = ledger.eta[category] + delta
    if eta >= 1.0 - SATURATION_TOL:
        eta = 1.0
    ledger.eta[category] = eta
    ledger.refresh_saturation()
    return ledger


def _select_category(ledger, eligible):
    if eligible["hard"]:
        return "hard"
    for k in range(len(CATEGORIES)):
        cat = CATEGORIES[(ledger.cursor + k) % len(CATEGORIES)]
        if eligible[cat]:
            return cat
    return None


def scheduler_tick(ledger, cfg, epoch, epoch_losses):
    """Record this epoch's per-category losses, then update the budget if due.

    Updates happen only after warm-up, at multiples of ``t_interval``, while
    the ledger is unsaturated and some category's gate fires. Exactly one
    category is stepped: hard whenever it is eligible, otherwise the next
    eligible category in round-robin order. The ledger is modified in place.
    """
    if not isinstance(epoch_losses, dict):
        epoch_losses = dict(zip(CATEGORIES, epoch_losses))
    if epoch != ledger.epoch + 1:
        raise ValueError(f"scheduler_tick expected epoch {ledger.epoch + 1}, got {epoch}")
    for cat in CATEGORIES:
        ledger.history[cat].append(float(epoch_losses[cat]))
    ledger.epoch = epoch

    if epoch <= cfg.t_init or ledger.saturated or epoch % cfg.t_interval:
        return ledger
    fired = gate_check(ledger.history, epoch, cfg.window, cfg.gamma)
    if not any(fired.values()):
        return ledger
    eligible = {
        cat: fired[cat] and ledger.eta[cat] < 1.0 and ledger.budgets[cat] > 0
        for cat in CATEGORIES
    }
    selected = _select_category(ledger, eligible)
    if selected is None:
        return ledger

    for cat in CATEGORIES:
        if ledger.eta[cat] < cfg.eta_floor:
            ledger.eta[cat] = cfg.eta_floor
    ledger.refresh_saturation()

    e = cfg.window
    window = {cat: math.fsum(ledger.history[cat][-e:]) for cat in CATEGORIES}
    w = loss_weights(window)
    delta = step_size(ledger, cfg, selected, w[selected])
    apply_step(ledger, selected, delta)
    ledger.cursor = (CATEGORIES.index(selected) + 1) % len(CATEGORIES)
    ledger.last_update = (epoch, selected, delta)
    return ledger


# ---------------------------------------------------------------------------
# Active negative sets

def active_count(ledger, category, num_candidates, pool_size):
    """Negatives per anchor for ``category``: floor(eta * budget * |N_i|), at least
    one when the category is live, never more than its pool."""
    budget = ledger.budgets[category]
    eta = ledger.eta[category]
    k = int(math.floor(eta * budget * num_candidates + COUNT_TOL))
    if k == 0 and eta > 0 and budget > 0 and pool_size > 0:
        k = 1
    return min(k, pool_size)


def _sample_rows(pool, k, rng):
    n, p = pool.shape
    if k <= 0:
        return np.zeros((n, 0), dtype=np.int64)
    if k >= p:
        return pool.copy()
    keys = rng.random((n, p))
    pick = np.argpartition(keys, k - 1, axis=1)[:, :k]
    return np.take_along_axis(pool, pick, axis=1)


def draw_active(pools, ledger, rng):
    """Uniformly sample each anchor's active negatives from its pools."""
    n = pools.num_anchors
    out = {}
    for cat in CATEGORIES:
        pool = getattr(pools, cat)
        k = active_count(ledger, cat, n - 1, pool.shape[1])
        out[cat] = _sample_rows(pool, k, rng)
    return ActiveNegatives(**out)


def swap(pools, active, ledger, rng):
    """Re-sample every active set from its pool, keeping its size."""
    if not ledger.saturated:
        raise RuntimeError("swapping starts only once the global budget is saturated")
    counts = active.counts()
    return ActiveNegatives(
        **{cat: _sample_rows(getattr(pools, cat), counts[cat], rng) for cat in CATEGORIES}
    )


def simulate(cfg, losses, epochs):
    """Run the ledger alone against a loss stream.

    ``losses`` is a callable ``epoch -> {category: loss}``. Returns the ledger
    and a list with a copy of ``eta`` after every epoch.
    """
    ledger = warmup_state(cfg)
    trajectory = []
    for epoch in range(1, epochs + 1):
        scheduler_tick(ledger, cfg, epoch, losses(epoch))
        trajectory.append(dict(ledger.eta))
    return ledger, trajectory
