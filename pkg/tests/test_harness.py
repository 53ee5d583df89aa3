import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal

from ssnsketch.data import read_libsvm, synth_gen
from ssnsketch.harness.cli import main
from ssnsketch.harness.grid import (
    ExperimentSpec,
    budget_grid,
    resolve_hypers,
    run_grid,
    STEP_GRID,
)
from ssnsketch.harness.plots import Y_FLOOR, clip_for_log, emit_plots
from ssnsketch.methods import NewtonSketch, RunTrace, SsnCg, SsnSgi, Svrg


def test_budget_grid_examples():
    assert budget_grid(1000) == [10, 20, 100, 200, 500, 1000, 2000, 5000, 10000]
    assert budget_grid(100) == [1, 2, 10, 20, 50, 100, 200, 500, 1000]
    grid = budget_grid(9000)
    assert grid[4] == 4500 and grid[-1] == 90000
    assert budget_grid(150)[0] == 2  # 1.5 rounds up
    with pytest.raises(ValueError):
        budget_grid(99)


def test_resolve_examples():
    svrg = resolve_hypers("svrg", 1000, 1000)
    assert {v.m_svrg for v in svrg} == {500} and len(svrg) == 13
    assert [v.alpha for v in svrg] == list(STEP_GRID)
    assert STEP_GRID[0] == 2.0**-12 and STEP_GRID[-1] == 1.0
    pairs = {(v.T, v.max_cg) for v in resolve_hypers("ssn-cg", 1000, 1000)}
    assert pairs == {(1000, 1), (500, 2), (200, 5), (100, 10), (40, 25), (20, 50)}
    assert {v.m_sgi for v in resolve_hypers("ssn-sgi", 1000, 1000)} == {1000}
    assert all(v.zeta == 1e-2 for v in resolve_hypers("newton-sketch", 1000, 1000))


def test_resolve_respects_sample_cap_and_tiny_budgets():
    assert all(v.T <= 1000 for v in resolve_hypers("ssn-cg", 5000, 1000))
    assert resolve_hypers("svrg", 1, 100) == []
    assert resolve_hypers("newton-sketch", 7, 100) == []
    with pytest.raises(ValueError):
        resolve_hypers("lissa", 10, 10)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 20000), st.integers(100, 10000), st.sampled_from(["svrg", "ssn-sgi", "ssn-cg", "newton-sketch"]))
def test_budget_identity(b, n, method):
    for v in resolve_hypers(method, b, n):
        if isinstance(v, SsnCg):
            assert v.T * v.max_cg == b and v.T <= n
        elif isinstance(v, NewtonSketch):
            assert 2 * v.m_ns * v.max_cg == b
        elif isinstance(v, SsnSgi):
            assert v.m_sgi == b
        else:
            assert v.m_svrg == b // 2


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentSpec(data="x", methods=[])
    with pytest.raises(ValueError):
        ExperimentSpec(data="x", methods=["bfgs"])
    with pytest.raises(ValueError):
        ExperimentSpec(data="x", budget_fractions=[0.0])
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"data": "a.txt", "seed": 3, "methods": ["svrg"]}))
    spec = ExperimentSpec.from_json(cfg, seed=9, methods=None)
    assert spec.seed == 9 and spec.methods == ["svrg"]


SMALL = {"n": 330, "d": 8, "kappa": 10.0, "seed": 2}


def test_single_cell_grid():
    spec = ExperimentSpec(SMALL, methods=["svrg"], budget_fractions=[1.0], alphas=[2.0**-6], max_ege=40)
    rep = run_grid(spec)
    assert len(rep.cells) == 1
    cell = rep.cells[0]
    assert rep.best["svrg"] is cell
    assert cell.params == {"alpha": 2.0**-6, "m_svrg": 148}
    assert cell.best_error == cell.trace.best_error()
    assert cell.ege_to[1e-4] == cell.trace.ege_to_reach(1e-4)


def summary(rep):
    return [(c.key, c.status, c.best_error, c.ege_to) for c in rep.cells]


def test_grid_deterministic_and_failures_recorded():
    spec = ExperimentSpec(SMALL, budget_fractions=[0.5, 2.0], alphas=[2.0**-8, 1.0], ladder=[1, 5], max_ege=30)
    a, b = run_grid(spec), run_grid(spec)
    assert summary(a) == summary(b)
    assert set(a.best) == {"ssn-cg", "newton-sketch", "ssn-sgi", "svrg"}
    for method, cell in a.best.items():
        mine = [c for c in a.cells if c.method == method and c.status != "failed"]
        assert cell.score() == min(c.score() for c in mine)
    failed = [c for c in a.cells if c.status == "failed"]
    assert failed and all(c.method == "ssn-sgi" and c.params["alpha_inner"] == 1.0 for c in failed)
    assert all(a.best[c.method] is not c for c in failed)
    # 2n / 1 would need T = 2n > n
    assert all(c.params.get("T", 0) <= a.n for c in a.cells)


def test_grid_fallback_to_best_error():
    spec = ExperimentSpec(SMALL, methods=["svrg"], budget_fractions=[0.5], alphas=[2.0**-12, 2.0**-10], max_ege=6)
    rep = run_grid(spec)
    assert all(c.ege_to[1e-8] == np.inf for c in rep.cells)
    assert rep.best["svrg"].best_error == min(c.best_error for c in rep.cells)


def test_grid_parallel_matches_serial():
    kw = dict(methods=["ssn-cg", "svrg"], budget_fractions=[1.0], alphas=[2.0**-7], ladder=[1, 2], max_ege=20)
    serial = run_grid(ExperimentSpec(SMALL, **kw))
    parallel = run_grid(ExperimentSpec(SMALL, workers=2, **kw))
    assert summary(serial) == summary(parallel)


def test_grid_writes_outputs(tmp_path):
    spec = ExperimentSpec(SMALL, methods=["ssn-cg", "svrg"], budget_fractions=[1.0], alphas=[2.0**-7],
                          ladder=[1, 2], max_ege=20, out_dir=str(tmp_path))
    rep = run_grid(spec)
    cells = sorted((tmp_path / "cells").glob("*.csv"))
    assert len(cells) == len(rep.cells)
    for path in cells:
        RunTrace.from_csv(path)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(rep.cells)
    meta = json.loads((tmp_path / "report.json").read_text())
    assert meta["divisor_ladder"] == [1, 2]
    assert set(meta["best"]) == {"ssn-cg", "svrg"}
    svgs = sorted((tmp_path / "plots").glob("*.svg"))
    assert len(svgs) == 3
    for svg in svgs:
        ET.parse(svg)


def fake_trace(errors, n=10):
    tr = RunTrace("fake", n, f_star=0.0)
    for k, e in enumerate(errors):
        tr.iters.append(k)
        tr.cum_ege.append(float(k + 1))
        tr.objective.append(e)
        tr.test_loss.append(0.5)
        tr.step_len.append(1.0)
        tr.inner_iters.append(3)
        tr.wall_ms.append(0.1 * k)
    return tr


def test_plot_single_point_is_valid_svg(tmp_path):
    paths = emit_plots({"one": fake_trace([0.3])}, tmp_path, "tiny")
    svgs = [p for p in paths if p.suffix == ".svg"]
    assert len(svgs) == 3
    for p in svgs:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")


def test_plot_clipping_and_csv(tmp_path):
    assert_array_equal(clip_for_log([1e-3, 0.0, -1e-12, 1e-20]), [1e-3, Y_FLOOR, Y_FLOOR, Y_FLOOR])
    traces = {"a": fake_trace([1.0, 1e-5, 0.0]), "b": fake_trace([2.0, 1e-30])}
    paths = emit_plots(traces, tmp_path, "mix")
    table = [p for p in paths if p.suffix == ".csv"][0]
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert float(rows[2]["train_error"]) == 0.0


def test_plot_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_plots({}, tmp_path)


def test_cli_end_to_end(tmp_path, capsys):
    data = tmp_path / "synth.txt"
    assert main(["gen", "--n", "300", "--d", "6", "--kappa", "10", "--seed", "1", "--out", str(data)]) == 0
    ds = read_libsvm(data)
    assert (ds.n, ds.d) == (300, 6)
    assert ds.same_as(synth_gen(300, 6, 10.0, 1))

    fstar = tmp_path / "fstar.json"
    main(["fstar", "--data", str(data), "--out", str(fstar)])
    info = json.loads(fstar.read_text())
    assert info["grad_norm"] <= 1e-12 and info["n"] == 270

    runs = tmp_path / "runs"
    main(["run", "--data", str(data), "--method", "ssn-cg", "--T", "100", "--max-cg", "5",
          "--fstar", str(fstar), "--max-outer", "10", "--out", str(runs)])
    main(["run", "--data", str(data), "--method", "svrg", "--alpha", "0.01", "--max-outer", "10", "--out", str(runs)])
    tr = RunTrace.from_csv(runs / "ssn-cg.csv")
    assert tr.train_error[-1] < tr.train_error[0]

    plots = tmp_path / "plots"
    main(["plot", "--traces", str(runs), "--out", str(plots), "--name", "synth"])
    assert len(list(plots.glob("*.svg"))) == 3

    spec_csv = tmp_path / "spec.csv"
    main(["spectrum", "--data", str(data), "--t-frac", "0.5", "--m", "64", "--reps", "3", "--out", str(spec_csv)])
    assert len(spec_csv.read_text().splitlines()) == 7

    grid = tmp_path / "grid"
    main(["grid", "--data", str(data), "--methods", "ssn-cg,svrg", "--budgets", "1", "--max-ege", "10",
          "--out", str(grid)])
    assert (grid / "summary.csv").exists()
    out = capsys.readouterr().out
    assert "ssn-cg" in out and "svrg" in out
