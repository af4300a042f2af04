import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rilco.errors import ConfigError
from rilco.sweep import (DESK, RunResult, SweepResult, SweepSpec, bar_chart_svg, cell_seeds,
                         profile_config, read_sweep_csv, run_sweep, sweep_csv, worker_count,
                         write_sweep)
from rilco.trainer import PAPER_BATCHES

TINY = dict(iterations=20)


def _spec(**kw):
    base = dict(methods=("ril_co", "gail_logistic"), noise_rates=(0.0, 0.4), seeds=(1, 2, 3),
                n_expert=200, overrides=TINY)
    return SweepSpec(**{**base, **kw})


@pytest.fixture(scope="module")
def result(grid):
    return run_sweep(grid, _spec(), workers=1)


def test_profiles():
    desk = profile_config("desk")
    assert (desk.batch_b, desk.k, desk.iterations) == (64, 16, 2000)
    assert desk.classifier_step == DESK["classifier_step"]
    paper = profile_config("paper_faithful")
    assert (paper.batch_b, paper.batch_u, paper.batch_v, paper.k) == tuple(PAPER_BATCHES.values())
    assert profile_config("desk", k=4).k == 4
    with pytest.raises(ConfigError):
        profile_config("huge")


def test_spec_validation():
    with pytest.raises(ConfigError):
        _spec(seeds=()).validate()
    with pytest.raises(ConfigError):
        _spec(noise_rates=(0.5,)).validate()
    with pytest.raises(ConfigError):
        _spec(methods=("dagger",)).validate()
    spec = _spec(methods=("co_logistic",),
                 method_overrides={"co_logistic": {"method": "ril_co", "loss": "logistic",
                                                   "allow_nonsymmetric": True}}).validate()
    cfg = spec.config_for("co_logistic", 9)
    assert cfg.method == "ril_co" and str(cfg.resolved_loss) == "logistic" and cfg.seed == 9


def test_cell_seeds_are_shared_across_methods_and_distinct_across_cells():
    assert cell_seeds(0, 0.4, 1) == cell_seeds(0, 0.4, 1)
    seen = {cell_seeds(m, d, s) for m in (0, 1) for d in (0.0, 0.2, 0.4) for s in (1, 2, 3)}
    assert len(seen) == 18


def test_grid_is_complete(result):
    assert len(result.runs) == 2 * 2 * 3 and not result.failures
    aggs = result.aggregates()
    assert len(aggs) == 4 and all(a["n_seeds"] == 3 for a in aggs)


def test_aggregates_use_seed_standard_error(result):
    vals = [r.final_return for r in result.runs if r.method == "ril_co" and r.delta == 0.4]
    a = result.aggregate("ril_co", 0.4)
    mean = sum(vals) / 3
    se = math.sqrt(sum((v - mean) ** 2 for v in vals) / 2) / math.sqrt(3)
    assert a["mean_return"] == pytest.approx(mean, rel=1e-14)
    assert a["stderr"] == pytest.approx(se, rel=1e-12)


def test_csv_round_trip(result):
    text = result.to_csv()
    assert len(text.splitlines()) == 1 + 12 + 4
    runs, aggs = read_sweep_csv(text)
    assert [r.final_return for r in runs] == [r.final_return for r in result.runs]
    assert sweep_csv(runs, aggs) == text


def test_sweep_is_reproducible_across_worker_counts(grid, result):
    again = run_sweep(grid, _spec(), workers=2)
    assert again.to_csv() == result.to_csv()
    assert [r.record_csv for r in again.runs] == [r.record_csv for r in result.runs]


def test_failed_cells_are_recorded(grid):
    spec = _spec(methods=("ril_co", "broken"), noise_rates=(0.0,), seeds=(1,),
                 method_overrides={"broken": {"method": "ril_co", "loss": "logistic"}})
    res = run_sweep(grid, spec, workers=1)
    assert len(res.runs) == 2 and len(res.failures) == 1
    assert res.failures[0].status.startswith("failed: ConfigError")
    agg = res.aggregate("broken", 0.0)
    assert agg["n_seeds"] == 0 and math.isnan(agg["mean_return"])


def test_write_sweep_layout(result, tmp_path):
    out = write_sweep(result, tmp_path / "s")
    assert (out / "sweep.csv").read_text() == result.to_csv()
    run = out / "runs" / "ril_co_d0.4_s2"
    assert (run / "status.txt").read_text() == "ok\n"
    assert (run / "record.csv").read_text().splitlines()[-1].startswith("summary,")
    ET.fromstring((out / "chart.svg").read_text())


def test_chart_contents(result):
    svg = bar_chart_svg(result.aggregates(), result.expert_return)
    root = ET.fromstring(svg)
    rects = [e for e in root.iter() if e.tag.endswith("rect")]
    assert len(rects) == 4 + 2  # bars plus legend swatches
    assert "data: method,delta,mean_return,stderr,n_seeds" in svg
    assert "expert" in svg


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("RIL_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("RIL_THREADS")
    assert worker_count(3) == 3


def test_synthetic_result_aggregation():
    spec = SweepSpec(methods=("bc",), noise_rates=(0.1,), seeds=(1, 2))
    res = SweepResult(spec, [RunResult("bc", 0.1, 1, 1.0), RunResult("bc", 0.1, 2, 3.0)], 4.0)
    a = res.aggregate("bc", 0.1)
    assert a["mean_return"] == 2.0 and a["stderr"] == pytest.approx(1.0)
    one = SweepResult(spec, [RunResult("bc", 0.1, 1, 1.0)], 4.0).aggregate("bc", 0.1)
    assert np.isnan(one["stderr"])
