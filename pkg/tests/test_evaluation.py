import math
import time

import numpy as np
import pytest

from glim.errors import ConfigError, DomainError, ValidationError
from glim.evaluation import (CSV_HEADER, ExperimentReport, ReportRow, check_monotone_submodular,
                             loglog_slope, mae_relative, relative_error_protocol, run_experiment,
                             scaling_smoke)
from glim.glie import GlieConfig, init_model, save_model
from glim.graph import GeneratorConfig, from_edges, generate, save_graph
from glim.maximize import ExactEstimator


def test_mae_relative_examples():
    assert mae_relative([1, 2, 3], [1, 2, 3]) == 0
    assert mae_relative([11], [10]) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        mae_relative([], [])
    with pytest.raises(DomainError):
        mae_relative([1], [0])


def test_constant_estimator_gives_zero_series():
    s = check_monotone_submodular(lambda nodes: 7.0, [0, 1, 2, 3], [5, 6, 7, 8])
    for name, series in s.as_dict().items():
        assert series == [0.0] * (4 if name.startswith("m") else 3)


def test_series_with_exact_oracle():
    g = from_edges(6, [(0, 1, 0.5), (1, 2, 0.5), (0, 3, 0.7), (3, 4, 0.2), (4, 5, 0.9), (2, 5, 0.4)])
    f = ExactEstimator(g)
    traj, rand = [0, 4, 2], [5, 1, 3]
    s = check_monotone_submodular(lambda nodes: f(nodes) if nodes else 0.0, traj, rand, rng_seed=1)
    assert s.m_ss[0] == pytest.approx(f([0]))
    assert s.m_sr[1] == pytest.approx(f([0, 1]) - f([0]))
    assert s.min() >= -1e-12     # exact spread is monotone and submodular
    with pytest.raises(ValidationError):
        check_monotone_submodular(f, [0, 1], [2])


def test_loglog_slope():
    x = np.array([1e3, 4e3, 16e3])
    assert loglog_slope(x, 3 * x) == pytest.approx(1.0)
    assert loglog_slope(x, x ** 2) == pytest.approx(2.0)


def test_scaling_smoke_tiny_graphs_fast():
    model = init_model(GlieConfig(rng_seed=0))
    graphs = [generate(GeneratorConfig(n=n, m=2, rng_seed=1)) for n in (10, 20, 40)]
    t0 = time.perf_counter()
    out = scaling_smoke(graphs, 3, model, repeats=1)
    assert time.perf_counter() - t0 < 1.0
    assert out["edges"] == [g.n_edges for g in graphs] and math.isfinite(out["slope"])
    with pytest.raises(ConfigError):
        scaling_smoke(graphs[:2], 3, model)


def test_relative_error_protocol(small_model):
    model, _ = small_model
    g = generate(GeneratorConfig(n=100, m=3, rng_seed=4))
    out = relative_error_protocol(g, model, 3, n_sims=500, rng_seed=2)
    assert len(out["preds"]) == len(out["labels"]) == 10
    assert out["rel_err"] == pytest.approx(mae_relative(out["preds"], out["labels"]))
    with pytest.raises(DomainError):
        relative_error_protocol(g, model, 0)


def test_report_csv_roundtrip():
    rep = ExperimentReport([ReportRow("g", "pun", 5, 12.25, 0.5, 0.01, 1.5, 0.125),
                            ReportRow("h", "kcore", 3, 4.0, 0.0, 0.0)])
    text = rep.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = ExperimentReport.from_csv(text)
    assert back == rep
    assert math.isnan(back.rows[1].mae)
    assert rep.to_json()["rows"][1]["mae"] is None
    with pytest.raises(ValidationError):
        ExperimentReport.from_csv("a,b\n")


def test_empty_method_list_gives_empty_report():
    assert run_experiment({"graphs": [{"model": "ba", "n": 20, "m": 2}], "methods": []}).rows == []


def test_experiment_rows_deterministic(tmp_path):
    g = generate(GeneratorConfig(n=60, m=2, rng_seed=3))
    save_graph(g, tmp_path / "g.edges")
    save_model(init_model(GlieConfig(rng_seed=1)), tmp_path / "m.json")
    cfg = {"graphs": [str(tmp_path / "g.edges"), str(tmp_path / "g.edges")],
           "methods": ["degdisc", "kcore", "pun"], "budgets": [2, 4], "eval_sims": 300,
           "model": str(tmp_path / "m.json"), "seed": 5}
    a = run_experiment(cfg, timing=False)
    b = run_experiment(cfg, timing=False)
    assert a == b and len(a.rows) == 12
    assert a.to_csv().splitlines()[1:7] == a.to_csv().splitlines()[7:]
    assert all(r.time_s == 0.0 for r in a.rows)
    assert all(r.k <= r.spread_mean <= g.n for r in a.rows)


def test_experiment_errors(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment({"graphs": [{"model": "ba", "n": 20, "m": 2}], "methods": ["pun"]})
    with pytest.raises(ConfigError):
        run_experiment({"graphs": [{"model": "ba", "n": 20, "m": 2}], "methods": ["bogus"]})
    with pytest.raises(OSError):
        run_experiment({"graphs": [str(tmp_path / "missing.edges")], "methods": ["kcore"]})
