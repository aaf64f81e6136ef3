"""Run configuration, multi-seed training and the ratio/budget sweeps."""

from __future__ import annotations

import csv
import json
import logging
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import CATEGORIES, ConfigError
from .augment import AugmentConfig
from .estimator import EpochRecord, HansGCL
from .graph import generate_sbm, load_graph, make_splits
from .hans import HansConfig, pool_sizes, simulate, warmup_state, active_count
from .probe import micro_f1, train_probe

logger = logging.getLogger(__name__)

# (easy, hard, inter) triples of the ratio ablation grid
RATIO_GRID = (
    (0.1, 0.1, 0.8),
    (0.1, 0.2, 0.7),
    (0.1, 0.3, 0.6),
    (0.2, 0.3, 0.5),
    (0.3, 0.3, 0.4),
    (0.1, 0.4, 0.5),
    (0.25, 0.25, 0.5),
    (0.2, 0.1, 0.7),
    (0.2, 0.2, 0.6),
    (0.3, 0.1, 0.6),
    (0.3, 0.2, 0.5),
)


class MetricsError(ValueError):
    """A metrics file is missing, empty or unreadable."""


@dataclass
class RunConfig:
    # dataset: a directory in the on-disk format, otherwise an SBM
    dataset_path: str | None = None
    sbm_n: int = 300
    sbm_num_classes: int = 3
    sbm_p_in: float = 0.10
    sbm_p_out: float = 0.01
    sbm_d: int = 32
    sbm_feature_shift: float = 1.0
    sbm_seed: int = 7
    # augmentation
    p_e: float = 0.4
    p_f1: float = 0.3
    p_f2: float = 0.3
    # model and optimiser
    hidden_dim: int = 128
    proj_dim: int = 64
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: float = 0.5
    literal_eq8: bool = False
    intra_view_negatives: bool = False
    embed_projection: bool = False
    # scheduler
    theta_max: float = 0.6
    ratios: tuple = (0.1, 0.3, 0.6)
    t_init: int = 60
    t_interval: int = 20
    window: int = 10
    gamma: float = 0.99
    base_step: float = 0.05
    step_cap: float | dict = 0.10
    eta_floor: float = 0.05
    swap_interval: int | None = None
    # training and evaluation
    epochs: int = 2000
    probe_alpha: float = 1e-4
    probe_lr: float = 0.05
    probe_iters: int = 2000
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    deterministic: bool = False

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        self.augment_config()
        hcfg = self.hans_config(self.seeds[0])
        if self.epochs < hcfg.t_init + 2 * hcfg.window:
            raise ConfigError(
                f"epochs={self.epochs} is shorter than t_init + 2*window = {hcfg.t_init + 2 * hcfg.window}"
            )
        for name in ("hidden_dim", "proj_dim", "probe_iters"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.tau > 0 or not self.lr > 0 or not self.probe_lr > 0:
            raise ConfigError("tau, lr and probe_lr must be positive")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        out = asdict(self)
        out["ratios"] = list(self.ratios)
        return out

    def replace(self, **changes):
        return type(self).from_dict({**self.to_dict(), **changes})

    def augment_config(self, seed=0):
        return AugmentConfig(p_e=self.p_e, p_f1=self.p_f1, p_f2=self.p_f2, rng_seed=seed)

    def hans_config(self, seed=0):
        return HansConfig(
            theta_max=self.theta_max, ratios=self.ratios, t_init=self.t_init,
            t_interval=self.t_interval, window=self.window, gamma=self.gamma,
            base_step=self.base_step, step_cap=self.step_cap, eta_floor=self.eta_floor,
            swap_interval=self.swap_interval, seed=seed,
        )

    def estimator(self, seed):
        return HansGCL(
            hidden_dim=self.hidden_dim, proj_dim=self.proj_dim, epochs=self.epochs,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps, tau=self.tau,
            p_e=self.p_e, p_f1=self.p_f1, p_f2=self.p_f2,
            theta_max=self.theta_max, ratios=self.ratios, t_init=self.t_init,
            t_interval=self.t_interval, window=self.window, gamma=self.gamma,
            base_step=self.base_step, step_cap=self.step_cap, eta_floor=self.eta_floor,
            swap_interval=self.swap_interval, literal_eq8=self.literal_eq8,
            intra_view_negatives=self.intra_view_negatives,
            embed_projection=self.embed_projection, random_state=seed,
        )

    def load_graph(self):
        if self.dataset_path is not None:
            return load_graph(self.dataset_path)
        return generate_sbm(self.sbm_n, self.sbm_num_classes, self.sbm_p_in, self.sbm_p_out,
                            self.sbm_d, self.sbm_feature_shift, seed=self.sbm_seed)


@dataclass
class SeedResult:
    seed: int
    micro_f1: float
    mean_epoch_ms: float
    estimator: HansGCL
    metrics_path: Path


@dataclass
class RunResult:
    report: dict
    seeds: list
    out_dir: Path

    @property
    def params(self):
        return {r.seed: r.estimator.params_ for r in self.seeds}


def write_metrics(records, path, *, with_time=True):
    path = Path(path)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(with_time=with_time)) + "\n")
    return path


def read_metrics(path):
    path = Path(path)
    if not path.is_file():
        raise MetricsError(f"metrics file not found: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise MetricsError(f"{path}:{lineno}: not valid JSON") from exc
    if not rows:
        raise MetricsError(f"metrics file is empty: {path}")
    needed = {"epoch", *(f"active_{c}" for c in CATEGORIES)}
    for i, row in enumerate(rows, 1):
        if not isinstance(row, dict) or not needed <= row.keys():
            raise MetricsError(f"{path}:{i}: record lacks {sorted(needed)}")
    return rows


def _train_seed(cfg, graph, seed, out_dir):
    est = cfg.estimator(seed).fit(graph)
    Z = est.transform(graph)
    masks = make_splits(graph, seed)
    probe = train_probe(Z, graph.labels, masks, alpha=cfg.probe_alpha, iters=cfg.probe_iters,
                        lr=cfg.probe_lr, seed=seed, num_classes=graph.num_classes)
    score = micro_f1(probe.predict(Z), graph.labels, masks.test)

    seed_dir = out_dir / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    metrics = write_metrics(est.history_, seed_dir / "metrics.jsonl",
                            with_time=not cfg.deterministic)
    if cfg.deterministic:
        with open(seed_dir / "timing.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "time_ms"])
            w.writerows((r.epoch, r.time_ms) for r in est.history_)
    est.params_.save(seed_dir / "params.npz")
    mean_ms = float(np.mean([r.time_ms for r in est.history_]))
    logger.info("seed %d: micro-F1 %.4f, %.2f ms/epoch", seed, score, mean_ms)
    return SeedResult(seed, score, mean_ms, est, metrics)


def run_training(cfg, graph=None):
    """Train one model per seed, probe it and write metrics plus a report.

    Layout under ``cfg.out_dir``: ``seed_<s>/metrics.jsonl``, ``seed_<s>/params.npz``
    and ``report.json``. In deterministic mode BLAS is pinned to one thread and
    wall-clock values go to ``seed_<s>/timing.csv`` so the metrics stay byte-stable.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if graph is None:
        graph = cfg.load_graph()
    limits = threadpool_limits(limits=1) if cfg.deterministic else nullcontext()
    with limits:
        results = [_train_seed(cfg, graph, s, out_dir) for s in cfg.seeds]

    scores = np.array([r.micro_f1 for r in results])
    report = {
        "seeds": cfg.seeds,
        "micro_f1": scores.tolist(),
        "mean": float(scores.mean()),
        "std": float(scores.std()),
        "num_nodes": graph.num_nodes,
        "epochs": cfg.epochs,
        "theta_max": cfg.theta_max,
        "ratios": list(cfg.ratios),
        "final_eta": [r.estimator.ledger_.eta for r in results],
    }
    if cfg.theta_max == 0:
        report["note"] = "degenerate run: zero negative budget, the loss is identically 0"
    if not cfg.deterministic:
        report["mean_epoch_ms"] = float(np.mean([r.mean_epoch_ms for r in results]))
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return RunResult(report, results, out_dir)


def _write_table(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return path


def run_ratio_sweep(cfg, ratios=RATIO_GRID, graph=None):
    """One multi-seed run per (easy, hard, inter) triple; writes ``ratio_sweep.csv``."""
    out_dir = Path(cfg.out_dir)
    graph = graph if graph is not None else cfg.load_graph()
    rows = []
    for triple in ratios:
        tag = "_".join(f"{round(100 * r):d}" for r in triple)
        sub = cfg.replace(ratios=list(triple), out_dir=str(out_dir / f"ratio_{tag}"))
        rep = run_training(sub, graph).report
        rows.append({"easy": triple[0], "hard": triple[1], "inter": triple[2],
                     "mean": rep["mean"], "std": rep["std"]})
    _write_table(rows, out_dir / "ratio_sweep.csv")
    return rows


def run_budget_sweep(cfg, thetas=(0.0, 0.25, 0.5, 1.0), graph=None):
    """One multi-seed run per budget; also records mean per-epoch time."""
    out_dir = Path(cfg.out_dir)
    graph = graph if graph is not None else cfg.load_graph()
    rows = []
    for theta in thetas:
        if not 0.0 <= theta <= 1.0:
            raise ConfigError(f"theta_max must lie in [0, 1], got {theta}")
        sub = cfg.replace(theta_max=float(theta), deterministic=False,
                          out_dir=str(out_dir / f"theta_{theta:g}"))
        res = run_training(sub, graph)
        rows.append({"theta_max": theta, "mean": res.report["mean"], "std": res.report["std"],
                     "mean_epoch_ms": res.report["mean_epoch_ms"]})
    _write_table(rows, out_dir / "budget_sweep.csv")
    return rows


def plateau_epochs(rows):
    """First epoch from which each category's active count stays at its final value."""
    out = {}
    for cat in CATEGORIES:
        series = [r[f"active_{cat}"] for r in rows]
        final = series[-1]
        k = len(series)
        while k > 0 and series[k - 1] == final:
            k -= 1
        out[cat] = rows[k]["epoch"]
    return out


def schedule_records(hcfg, n, epochs, losses=None):
    """Active-count trajectory implied by the scheduler alone, without training.

    ``losses`` maps an epoch to per-category losses; flat losses by default.
    Returns metrics-style dicts, usable with :func:`plateau_epochs` and
    :func:`emit_plots`.
    """
    if losses is None:
        losses = lambda epoch: {c: 1.0 for c in CATEGORIES}  # noqa: E731
    k_hard, k_inter, k_easy = pool_sizes(n, hcfg.ratios)
    sizes = {"hard": k_hard, "inter": k_inter, "easy": k_easy}
    ledger = warmup_state(hcfg)
    _, trajectory = simulate(hcfg, losses, epochs)
    # the eta in force during epoch t is the one left by the tick of epoch t-1
    in_force = [dict(ledger.eta)] + trajectory[:-1]
    rows = []
    for epoch, eta in enumerate(in_force, 1):
        ledger.eta = dict(eta)
        rows.append({
            "epoch": epoch,
            **{f"eta_{c}": eta[c] for c in CATEGORIES},
            **{f"active_{c}": n * active_count(ledger, c, n - 1, sizes[c]) for c in CATEGORIES},
        })
    return rows


def emit_plots(metrics_paths, out_dir, *, render=True):
    """Accumulation and timing series as CSV, plus PNGs when matplotlib is present."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(metrics_paths, (str, Path)):
        metrics_paths = [metrics_paths]
    if not metrics_paths:
        raise MetricsError("no metrics files given")
    written = []
    for i, path in enumerate(metrics_paths):
        rows = read_metrics(path)
        stem = f"run{i}"
        acc = out_dir / f"{stem}_accumulation.csv"
        _write_table([{"epoch": r["epoch"], **{c: r[f"active_{c}"] for c in CATEGORIES}}
                      for r in rows], acc)
        written.append(acc)
        if "time_ms" in rows[0]:
            written.append(_write_table([{"epoch": r["epoch"], "time_ms": r["time_ms"]} for r in rows],
                                        out_dir / f"{stem}_time.csv"))
        if render:
            written.extend(_render(rows, out_dir, stem))
    return written


def _render(rows, out_dir, stem):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.info("matplotlib not installed, skipping images")
        return []
    epochs = [r["epoch"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for cat in CATEGORIES:
        ax.plot(epochs, [r[f"active_{cat}"] for r in rows], label=cat)
    ax.set_xlabel("epoch")
    ax.set_ylabel("active negatives")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{stem}_accumulation.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


__all__ = [
    "RATIO_GRID", "EpochRecord", "MetricsError", "RunConfig", "RunResult",
    "emit_plots", "plateau_epochs", "read_metrics", "run_budget_sweep",
    "run_ratio_sweep", "run_training", "schedule_records", "write_metrics",
]
