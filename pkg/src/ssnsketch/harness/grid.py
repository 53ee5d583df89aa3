"""Per-iteration budget grid and hyper-parameter tuning protocol.

For a budget ``b`` (work between full gradients, in component units):

* SVRG runs cycles of ``m_svrg = b // 2`` over a step-length grid,
* SSN-SGI runs ``m_sgi = b`` inner steps over the same grid,
* SSN-CG uses pairs with ``T * max_cg == b``,
* Newton-Sketch uses pairs with ``2 * m_ns * max_cg == b``.

Each method's best cell is the one reaching training error 1e-8 with the
fewest effective gradient evaluations (falling back to the lowest error).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
import json
import logging
import math

import numpy as np

from ssnsketch.data import Dataset, SplitDataset, read_libsvm, split, synth_gen
from ssnsketch.methods import (
    MethodConfig,
    NewtonSketch,
    RunTrace,
    SsnCg,
    SsnSgi,
    Svrg,
    run_method,
    run_reference_newton,
)
from ssnsketch.problem import LogisticModel
from ssnsketch.rng import derive_seed

log = logging.getLogger(__name__)

METHODS = ("ssn-cg", "newton-sketch", "ssn-sgi", "svrg")
BUDGET_FRACTIONS = (1 / 100, 1 / 50, 1 / 10, 1 / 5, 1 / 2, 1, 2, 5, 10)
STEP_GRID = tuple(2.0**-k for k in range(12, -1, -1))
DIVISOR_LADDER = (1, 2, 5, 10, 25, 50)
SELECTION_THRESHOLD = 1e-8
REPORT_THRESHOLDS = (1e-4, 1e-8)


def _nearest(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def budget_grid(n: int, fractions=BUDGET_FRACTIONS) -> list[int]:
    """Budgets ``n/100 ... 10n`` rounded to the nearest integer (at least 1)."""
    if n < 100:
        raise ValueError("budget grid needs n >= 100")
    return [_nearest(n * f) for f in fractions]


def resolve_hypers(method: str, b: int, n: int, alphas=STEP_GRID, ladder=DIVISOR_LADDER,
                   zeta: float = 1e-2) -> list:
    """Concrete method variants whose per-iteration work equals ``b``.

    An empty list means no integer-valid pair exists for this budget.
    """
    if b < 2:
        return []
    if method == "svrg":
        return [Svrg(a, b // 2) for a in alphas]
    if method == "ssn-sgi":
        return [SsnSgi(b, a) for a in alphas]
    if method == "ssn-cg":
        return [SsnCg(b // k, k, zeta) for k in ladder if b % k == 0 and b // k <= n]
    if method == "newton-sketch":
        if b % 2:
            return []
        half = b // 2
        return [NewtonSketch(half // k, k, zeta) for k in ladder if half % k == 0]
    raise ValueError(f"unknown method {method!r}")


def variant_params(v) -> dict:
    return {k: v for k, v in asdict(v).items()}


@dataclass
class ExperimentSpec:
    """What to run. ``data`` is a libsvm path or a dict ``{n, d, kappa, seed}``.

    ``budget_fractions`` are multiples of ``n``; ``test_data`` (a path) replaces
    the random split when the dataset ships with its own test set.
    """

    data: object
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    budget_fractions: list[float] = field(default_factory=lambda: list(BUDGET_FRACTIONS))
    alphas: list[float] = field(default_factory=lambda: list(STEP_GRID))
    ladder: list[int] = field(default_factory=lambda: list(DIVISOR_LADDER))
    zeta: float = 1e-2
    replications: int = 1
    seed: int = 0
    out_dir: str | None = None
    test_frac: float = 0.1
    test_data: str | None = None
    lam: float | None = None
    max_outer: int = 500
    max_ege: float = 200.0
    target_error: float = 1e-10
    workers: int = 1

    def __post_init__(self):
        if not self.methods:
            raise ValueError("need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if any(f <= 0 for f in self.budget_fractions):
            raise ValueError("budgets must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentSpec":
        with open(path) as fh:
            raw = json.load(fh)
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


def load_split(spec: ExperimentSpec) -> SplitDataset:
    if isinstance(spec.data, dict):
        p = spec.data
        ds = synth_gen(int(p["n"]), int(p["d"]), float(p["kappa"]), int(p.get("seed", spec.seed)))
    else:
        ds = read_libsvm(spec.data)
    if spec.test_data is not None:
        test = read_libsvm(spec.test_data, n_features=ds.d)
        return SplitDataset(ds, test, spec.seed)
    return split(ds, spec.test_frac, derive_seed(spec.seed, "split"))


@dataclass
class GridCell:
    method: str
    budget: int
    params: dict
    status: str
    best_error: float
    ege_to: dict
    trace: RunTrace | None = None

    @property
    def key(self) -> str:
        inner = "-".join(f"{k}{v:g}" for k, v in sorted(self.params.items()))
        return f"{self.method}_b{self.budget}_{inner}"

    def score(self):
        """Sort key: EGE to the selection threshold, then best error."""
        return (self.ege_to[SELECTION_THRESHOLD], self.best_error)


@dataclass
class GridReport:
    dataset: str
    n: int
    d: int
    f_star: float
    cells: list[GridCell]
    best: dict
    skipped: list[tuple[str, int]]
    ladder: list[int]


def _run_cell(args):
    model, test, w0, cfg, f_star = args
    return run_method(model, w0, cfg, f_star=f_star, test_data=test)


def _summarize(method, b, variant, traces: list[RunTrace]) -> GridCell:
    # median over replications of the reaching costs; representative trace is the first
    ege = {t: float(np.median([tr.ege_to_reach(t) for tr in traces])) for t in REPORT_THRESHOLDS}
    best = float(np.median([tr.best_error() for tr in traces]))
    status = traces[0].status if len({tr.status for tr in traces}) == 1 else "mixed"
    return GridCell(method, b, variant_params(variant), status, best, ege, traces[0])


def run_grid(spec: ExperimentSpec, data: SplitDataset | None = None, f_star: float | None = None) -> GridReport:
    """Run every (method, budget, hyper-parameter) cell and pick each method's best.

    Cell failures (divergence, line-search breakdown) are recorded, never raised.
    """
    data = data if data is not None else load_split(spec)
    model = LogisticModel(data.train, spec.lam)
    if f_star is None:
        _, f_star = run_reference_newton(model)
    w0 = np.zeros(model.d)
    jobs, index, skipped = [], [], []
    for method in spec.methods:
        for frac in spec.budget_fractions:
            b = _nearest(model.n * frac)
            variants = resolve_hypers(method, b, model.n, spec.alphas, spec.ladder, spec.zeta)
            if not variants:
                skipped.append((method, b))
                continue
            for v in variants:
                index.append((method, b, v))
                for r in range(spec.replications):
                    cfg = MethodConfig(
                        v,
                        max_outer=spec.max_outer,
                        seed=derive_seed(spec.seed, method, b, repr(variant_params(v)), r),
                        target_error=spec.target_error,
                        max_ege=spec.max_ege,
                    )
                    jobs.append((model, data.test, w0, cfg, f_star))
    log.info("grid: %d cells, %d runs", len(index), len(jobs))
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            traces = list(pool.map(_run_cell, jobs))
    else:
        traces = [_run_cell(j) for j in jobs]

    R = spec.replications
    cells = [
        _summarize(method, b, v, traces[i * R:(i + 1) * R]) for i, (method, b, v) in enumerate(index)
    ]
    best = {}
    for method in spec.methods:
        mine = [c for c in cells if c.method == method and c.status != "failed"]
        if mine:
            best[method] = min(mine, key=GridCell.score)
    report = GridReport(data.train.name, model.n, model.d, f_star, cells, best, skipped, list(spec.ladder))
    if spec.out_dir is not None:
        write_report(report, spec, spec.out_dir)
    return report


def summary_rows(report: GridReport) -> list[dict]:
    rows = []
    for c in report.cells:
        rows.append({
            "method": c.method,
            "budget": c.budget,
            "params": json.dumps(c.params, sort_keys=True),
            "status": c.status,
            "best_error": c.best_error,
            "ege_1e-4": c.ege_to[1e-4],
            "ege_1e-8": c.ege_to[1e-8],
            "selected": report.best.get(c.method) is c,
        })
    return rows


def write_report(report: GridReport, spec: ExperimentSpec, out_dir) -> None:
    """Per-cell trace CSVs, a summary CSV and JSON, best-cell traces and plots."""
    import csv

    from ssnsketch.harness.plots import emit_plots

    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    (out / "best").mkdir(parents=True, exist_ok=True)
    for c in report.cells:
        c.trace.to_csv(out / "cells" / f"{c.key}.csv")
    rows = summary_rows(report)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["method"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for method, c in report.best.items():
        c.trace.to_csv(out / "best" / f"{method}.csv")
    meta = {
        "dataset": report.dataset,
        "n": report.n,
        "d": report.d,
        "f_star": report.f_star,
        "divisor_ladder": report.ladder,
        "skipped_cells": report.skipped,
        "spec": {k: v for k, v in asdict(spec).items() if k != "out_dir"},
        "best": {m: {"budget": c.budget, "params": c.params, "ege_1e-8": c.ege_to[1e-8],
                     "best_error": c.best_error, "status": c.status} for m, c in report.best.items()},
    }
    with open(out / "report.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=float)
    if report.best:
        emit_plots({m: c.trace for m, c in report.best.items()}, out / "plots", report.dataset)
