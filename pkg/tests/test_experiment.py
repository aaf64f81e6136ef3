import csv
import json

import numpy as np
import pytest

from hansgcl._validation import ConfigError
from hansgcl.experiment import (
    RATIO_GRID,
    MetricsError,
    RunConfig,
    emit_plots,
    plateau_epochs,
    read_metrics,
    run_budget_sweep,
    run_ratio_sweep,
    run_training,
    schedule_records,
)
from hansgcl.hans import HansConfig

SMALL = dict(sbm_n=150, sbm_d=8, hidden_dim=8, proj_dim=4, epochs=30, t_init=4,
             t_interval=2, window=2, probe_iters=100)


def small_cfg(tmp_path, **kw):
    return RunConfig(**{**SMALL, "out_dir": str(tmp_path), **kw})


def test_config_rejects_unknown_and_bad_values(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig(epochs=70)                      # < 60 + 2 * 10
    with pytest.raises(ConfigError):
        RunConfig(ratios=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        RunConfig(p_e=1.0)
    with pytest.raises(ConfigError):
        RunConfig(seeds=[])
    with pytest.raises(ConfigError):
        RunConfig.from_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.from_json(tmp_path / "bad.json")


def test_config_json_roundtrip(tmp_path):
    cfg = small_cfg(tmp_path, step_cap={"hard": 0.2, "inter": 0.1, "easy": 0.05}, seeds=[2, 3])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.from_json(path) == cfg
    assert RunConfig().epochs == 2000


def test_report_has_population_std(tmp_path):
    res = run_training(small_cfg(tmp_path, seeds=list(range(1, 11))))
    scores = np.array(res.report["micro_f1"])
    assert len(scores) == 10
    assert res.report["mean"] == pytest.approx(scores.mean())
    assert res.report["std"] == pytest.approx(scores.std(ddof=0))
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["mean"] == res.report["mean"]
    assert set(res.params) == set(range(1, 11))
    for s in range(1, 11):
        assert (tmp_path / f"seed_{s}" / "params.npz").is_file()


def test_deterministic_metrics_are_byte_identical(tmp_path):
    a = run_training(small_cfg(tmp_path / "a", deterministic=True, seeds=[5]))
    b = run_training(small_cfg(tmp_path / "b", deterministic=True, seeds=[5]))
    ma = (a.out_dir / "seed_5" / "metrics.jsonl").read_bytes()
    assert ma == (b.out_dir / "seed_5" / "metrics.jsonl").read_bytes()
    assert b"time_ms" not in ma
    assert (a.out_dir / "seed_5" / "timing.csv").is_file()
    assert a.report == b.report


def test_zero_budget_run_is_flagged(tmp_path):
    res = run_training(small_cfg(tmp_path, theta_max=0.0))
    rows = read_metrics(tmp_path / "seed_0" / "metrics.jsonl")
    assert all(r["loss"] == 0.0 for r in rows)
    assert "degenerate" in res.report["note"]


def test_ratio_sweep_rows(tmp_path):
    rows = run_ratio_sweep(small_cfg(tmp_path), [(0.1, 0.1, 0.8), (0.1, 0.4, 0.5)])
    assert [(r["easy"], r["hard"], r["inter"]) for r in rows] == [(0.1, 0.1, 0.8), (0.1, 0.4, 0.5)]
    assert all({"mean", "std"} <= r.keys() for r in rows)
    with open(tmp_path / "ratio_sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert len(RATIO_GRID) == 11 and all(abs(sum(t) - 1) < 1e-12 for t in RATIO_GRID)


def test_budget_sweep_rows(tmp_path):
    rows = run_budget_sweep(small_cfg(tmp_path), [0.0, 0.25, 0.5, 1.0])
    assert [r["theta_max"] for r in rows] == [0.0, 0.25, 0.5, 1.0]
    assert all(r["mean_epoch_ms"] > 0 for r in rows)
    with pytest.raises(ConfigError):
        run_budget_sweep(small_cfg(tmp_path), [1.5])


def test_emit_plots_writes_three_series(tmp_path):
    run_training(small_cfg(tmp_path / "run"))
    written = emit_plots([tmp_path / "run" / "seed_0" / "metrics.jsonl"], tmp_path / "plots")
    acc = tmp_path / "plots" / "run0_accumulation.csv"
    assert acc in written and (tmp_path / "plots" / "run0_time.csv") in written
    with open(acc) as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == ["epoch", "hard", "inter", "easy"]
        assert len(list(reader)) == 30


def test_emit_plots_rejects_bad_input(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    (tmp_path / "junk.jsonl").write_text("{oops\n")
    for bad in ("empty.jsonl", "junk.jsonl", "missing.jsonl"):
        with pytest.raises(MetricsError):
            emit_plots([tmp_path / bad], tmp_path / "out")
    with pytest.raises(MetricsError):
        emit_plots([], tmp_path / "out")


def test_plateau_epochs():
    rows = [{"epoch": e, "active_hard": h, "active_inter": m, "active_easy": s}
            for e, h, m, s in [(1, 1, 1, 1), (2, 2, 1, 1), (3, 3, 2, 1), (4, 3, 2, 2)]]
    assert plateau_epochs(rows) == {"hard": 3, "inter": 3, "easy": 4}


def test_flat_loss_schedule_hard_plateaus_first():
    hcfg = HansConfig(theta_max=0.6, ratios=(0.1, 0.3, 0.6))
    rows = schedule_records(hcfg, 200, 4000)
    assert rows[-1]["eta_hard"] == 1.0
    p = plateau_epochs(rows)
    assert p["hard"] <= p["easy"]
    assert rows[0]["active_hard"] == 200 * max(1, int(0.05 * 0.18 * 199))
