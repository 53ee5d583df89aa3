"""Outer optimizers: SSN-CG, Newton-Sketch, SSN-SGI, SVRG, and a reference Newton-CG.

Every run owns a fresh ``OracleCounter`` and records one ``RunTrace`` row per
outer iteration (per cycle for SVRG). Effective gradient evaluations (EGE) are
counter units divided by ``n``:

* SSN-CG: ``n + T * cg_iters`` plus ``n`` per line-search trial
* Newton-Sketch: ``n + 2 * m_ns * cg_iters`` plus line-search trials
* SSN-SGI: ``n + m_sgi`` plus line-search trials
* SVRG: ``n + 2 * m_svrg`` per cycle

The line-search methods also pay ``n`` once for ``F(w0)``. Objective and test
loss values written to the trace for reporting are not charged.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Union
import csv
import math
import time

import numpy as np
from scipy.special import expit

from ssnsketch._kernels import run_svrg_cycle
from ssnsketch.problem import LogisticModel, logistic_loss
from ssnsketch.rng import derive_seed, stream
from ssnsketch.sketch import build_sketched_sqrt, new_sketch
from ssnsketch.solvers import SolverBreakdown, cg, sgi

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class SsnCg:
    T: int
    max_cg: int
    zeta: float = 1e-2
    name = "ssn-cg"


@dataclass(frozen=True)
class NewtonSketch:
    m_ns: int
    max_cg: int
    zeta: float = 1e-2
    name = "newton-sketch"


@dataclass(frozen=True)
class SsnSgi:
    m_sgi: int
    alpha_inner: float
    name = "ssn-sgi"


@dataclass(frozen=True)
class Svrg:
    alpha: float
    m_svrg: int
    name = "svrg"


Variant = Union[SsnCg, NewtonSketch, SsnSgi, Svrg]


@dataclass(frozen=True)
class MethodConfig:
    """Run settings shared by all methods.

    ``target_error`` (needs ``f_star``) and ``max_ege`` are optional early stops
    used by the experiment harness. ``unit_step`` skips the line search and
    always takes ``alpha = 1``.
    """

    variant: Variant
    max_outer: int = 100
    grad_tol: float = 1e-10
    seed: int = 0
    c1: float = 1e-4
    rho: float = 0.5
    max_backtracks: int = 50
    unit_step: bool = False
    target_error: float | None = None
    max_ege: float | None = None

    def __post_init__(self):
        v = self.variant
        counts = {
            SsnCg: ("T", "max_cg"),
            NewtonSketch: ("m_ns", "max_cg"),
            SsnSgi: (),
            Svrg: ("m_svrg",),
        }
        if type(v) not in counts:
            raise TypeError(f"unknown method variant {v!r}")
        for attr in counts[type(v)]:
            if getattr(v, attr) < 1:
                raise ValueError(f"{attr} must be >= 1")
        # zero inner steps is allowed and gives gradient descent
        if isinstance(v, SsnSgi) and v.m_sgi < 0:
            raise ValueError("m_sgi must be >= 0")
        if isinstance(v, (SsnCg, NewtonSketch)) and not 0.0 < v.zeta < 1.0:
            raise ValueError("zeta must lie in (0, 1)")
        if isinstance(v, SsnSgi) and not v.alpha_inner > 0:
            raise ValueError("alpha_inner must be positive")
        if isinstance(v, Svrg) and not v.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not (0.0 < self.c1 < 1.0 and 0.0 < self.rho < 1.0):
            raise ValueError("need 0 < c1 < 1 and 0 < rho < 1")


def iteration_units(variant, n: int, inner_iters: int = 0, ls_evals: int = 0) -> int:
    """Closed-form oracle units of one outer iteration (one cycle for SVRG)."""
    if isinstance(variant, SsnCg):
        return n + variant.T * inner_iters + n * ls_evals
    if isinstance(variant, NewtonSketch):
        return n + 2 * variant.m_ns * inner_iters + n * ls_evals
    if isinstance(variant, SsnSgi):
        return n + variant.m_sgi + n * ls_evals
    if isinstance(variant, Svrg):
        return n + 2 * variant.m_svrg
    raise TypeError(f"unknown method variant {variant!r}")


TRACE_COLUMNS = ("iter", "cum_ege", "train_error", "test_loss", "step_len", "inner_iters", "wall_ms")


@dataclass
class RunTrace:
    """Per-iteration record of a run. ``wall_ms`` is elapsed time since the run started."""

    method: str
    n: int
    f_star: float | None = None
    iters: list[int] = field(default_factory=list)
    cum_ege: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    step_len: list[float] = field(default_factory=list)
    inner_iters: list[int] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    units: list[int] = field(default_factory=list)
    status: str = "running"
    message: str = ""
    failed_at: int | None = None
    iterates: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.iters)

    @property
    def train_error(self) -> np.ndarray:
        f_star = np.nan if self.f_star is None else self.f_star
        return np.asarray(self.objective) - f_star

    @property
    def failed(self) -> bool:
        return self.status == "failed"

    def ege_to_reach(self, threshold: float) -> float:
        """EGE at the first row with training error <= threshold (inf if never)."""
        err = self.train_error
        hits = np.flatnonzero(err <= threshold)
        return float(self.cum_ege[hits[0]]) if hits.size else math.inf

    def best_error(self) -> float:
        err = self.train_error
        return float(np.min(err)) if err.size else math.inf

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for row in zip(
                self.iters, self.cum_ege, self.train_error, self.test_loss,
                self.step_len, self.inner_iters, self.wall_ms,
            ):
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])

    @classmethod
    def from_csv(cls, path, method: str = "", n: int = 0) -> "RunTrace":
        """Load a trace CSV. Objective values are relative to F* (``f_star`` is 0)."""
        trace = cls(method, n, f_star=0.0, status="loaded")
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                trace.iters.append(int(rec["iter"]))
                trace.cum_ege.append(float(rec["cum_ege"]))
                trace.objective.append(float(rec["train_error"]))
                trace.test_loss.append(float(rec["test_loss"]))
                trace.step_len.append(float(rec["step_len"]))
                trace.inner_iters.append(int(rec["inner_iters"]))
                trace.wall_ms.append(float(rec["wall_ms"]))
        return trace


class LineSearchError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class ArmijoResult(NamedTuple):
    alpha: float
    fn_evals: int
    f_new: float


def armijo(model: LogisticModel, w, p, g, cfg: MethodConfig, f0: float) -> ArmijoResult:
    """Backtracking from ``alpha = 1`` until ``F(w + a p) <= F(w) + c1 a <g, p>``.

    ``f0`` is ``F(w)``, supplied by the caller. Each trial is one counted
    function evaluation (``n`` units); ``fn_evals`` is the number of trials.
    """
    slope = float(g @ p)
    if not slope < 0:
        raise LineSearchError(f"not a descent direction (<g, p> = {slope:g})")
    alpha = 1.0
    for trial in range(1, cfg.max_backtracks + 2):
        f_new = model.value(w + alpha * p)
        if f_new <= f0 + cfg.c1 * alpha * slope:
            return ArmijoResult(alpha, trial, f_new)
        alpha *= cfg.rho
    raise LineSearchError(f"no sufficient decrease after {cfg.max_backtracks} backtracks")


class _Recorder:
    def __init__(self, trace: RunTrace, model: LogisticModel, test_data, keep_iterates: bool):
        self.trace = trace
        self.model = model
        self.test_data = test_data
        self.t0 = time.perf_counter()
        if keep_iterates:
            trace.iterates = []

    def row(self, k: int, w, f: float, step: float, inner: int):
        tr = self.trace
        tr.iters.append(k)
        tr.units.append(self.model.counter.units)
        tr.cum_ege.append(self.model.counter.units / self.model.n)
        tr.objective.append(float(f))
        tr.test_loss.append(logistic_loss(self.test_data, w) if self.test_data is not None else math.nan)
        tr.step_len.append(float(step))
        tr.inner_iters.append(int(inner))
        tr.wall_ms.append(1e3 * (time.perf_counter() - self.t0))
        if tr.iterates is not None:
            tr.iterates.append(np.array(w, copy=True))

    def should_stop(self, cfg: MethodConfig) -> bool:
        tr = self.trace
        if cfg.target_error is not None and tr.f_star is not None:
            if tr.objective[-1] - tr.f_star <= cfg.target_error:
                tr.status = "target_reached"
                return True
        if cfg.max_ege is not None and tr.cum_ege[-1] >= cfg.max_ege:
            tr.status = "max_ege"
            return True
        return False


def _fail(trace: RunTrace, k: int, message: str) -> RunTrace:
    trace.status = "failed"
    trace.failed_at = k
    trace.message = message
    return trace


def _run_newton_type(model, w0, cfg, direction, f_star, test_data, keep_iterates):
    model = model.fresh()
    trace = RunTrace(cfg.variant.name, model.n, f_star)
    rec = _Recorder(trace, model, test_data, keep_iterates)
    w = np.array(w0, dtype=np.float64, copy=True)
    f = model.value(w)
    rec.row(0, w, f, 0.0, 0)
    if rec.should_stop(cfg):
        return trace
    for k in range(1, cfg.max_outer + 1):
        margins = model.margins(w)
        g = model.gradient(w, margins)
        if not np.all(np.isfinite(g)):
            return _fail(trace, k, "non-finite gradient")
        if np.linalg.norm(g) <= cfg.grad_tol:
            trace.status = "converged"
            return trace
        try:
            p, inner = direction(model, w, g, margins, k)
        except SolverBreakdown as exc:
            return _fail(trace, k, str(exc))
        slope = float(g @ p)
        if not slope < 0:
            return _fail(trace, k, f"not a descent direction (<g, p> = {slope:g})")
        if -slope <= 16 * EPS * max(1.0, abs(f)):
            # predicted decrease is below the resolution of F
            trace.status = "stalled"
            return trace
        if cfg.unit_step:
            step, f = 1.0, model.value_uncounted(w + p)
        else:
            try:
                step, _, f = armijo(model, w, p, g, cfg, f)
            except LineSearchError as exc:
                return _fail(trace, k, str(exc))
        w = w + step * p
        if not (np.isfinite(f) and np.all(np.isfinite(w))):
            return _fail(trace, k, "non-finite iterate")
        rec.row(k, w, f, step, inner)
        if rec.should_stop(cfg):
            return trace
    trace.status = "max_outer"
    return trace


def _sorted_sample(rng, n: int, size: int):
    if size >= n:
        return None
    return np.sort(rng.choice(n, size=size, replace=False))


def run_ssn_cg(model, w0, cfg: MethodConfig, f_star=None, test_data=None, keep_iterates=False) -> RunTrace:
    v = cfg.variant
    if not isinstance(v, SsnCg):
        raise TypeError("run_ssn_cg needs an SsnCg variant")
    if v.T > model.n:
        raise ValueError(f"T={v.T} exceeds n={model.n}")
    rng = stream(cfg.seed, "ssn-cg")

    def direction(m, w, g, margins, k):
        op = m.hessian_operator(w, _sorted_sample(rng, m.n, v.T), margins)
        res = cg(op, -g, v.max_cg, v.zeta)
        return res.solution, res.iters_used

    return _run_newton_type(model, w0, cfg, direction, f_star, test_data, keep_iterates)


def run_newton_sketch(model, w0, cfg: MethodConfig, f_star=None, test_data=None, keep_iterates=False) -> RunTrace:
    v = cfg.variant
    if not isinstance(v, NewtonSketch):
        raise TypeError("run_newton_sketch needs a NewtonSketch variant")

    def direction(m, w, g, margins, k):
        s = new_sketch(m.n, v.m_ns, derive_seed(cfg.seed, "newton-sketch", k))
        b = build_sketched_sqrt(m, w, s, margins=margins, w_tag=k)
        res = cg(b, -g, v.max_cg, v.zeta)
        return res.solution, res.iters_used

    return _run_newton_type(model, w0, cfg, direction, f_star, test_data, keep_iterates)


def run_ssn_sgi(model, w0, cfg: MethodConfig, f_star=None, test_data=None, keep_iterates=False) -> RunTrace:
    v = cfg.variant
    if not isinstance(v, SsnSgi):
        raise TypeError("run_ssn_sgi needs an SsnSgi variant")

    def direction(m, w, g, margins, k):
        p = sgi(m, w, g, v.m_sgi, v.alpha_inner, derive_seed(cfg.seed, "ssn-sgi", k), margins)
        return p, v.m_sgi

    return _run_newton_type(model, w0, cfg, direction, f_star, test_data, keep_iterates)


def run_svrg(model, w0, cfg: MethodConfig, f_star=None, test_data=None, keep_iterates=False) -> RunTrace:
    """SVRG with Option I: each cycle restarts from the last inner iterate.

    One trace row per cycle, recorded after the cycle's inner loop.
    """
    v = cfg.variant
    if not isinstance(v, Svrg):
        raise TypeError("run_svrg needs an Svrg variant")
    model = model.fresh()
    n, lam, alpha = model.n, model.lam, v.alpha
    trace = RunTrace(v.name, n, f_star)
    rec = _Recorder(trace, model, test_data, keep_iterates)
    rng = stream(cfg.seed, "svrg")
    X, y = model.X, model.y
    w = np.array(w0, dtype=np.float64, copy=True)
    rec.row(0, w, model.value_uncounted(w), 0.0, 0)
    if rec.should_stop(cfg):
        return trace
    for k in range(1, cfg.max_outer + 1):
        snap = w.copy()
        margins = model.margins(snap)
        g_bar = model.gradient(snap, margins)
        if not np.all(np.isfinite(g_bar)):
            return _fail(trace, k, "non-finite gradient")
        if np.linalg.norm(g_bar) <= cfg.grad_tol:
            trace.status = "converged"
            return trace
        snap_coef = -expit(-y * margins) * y
        # constant part of every corrected step
        drift = alpha * (g_bar - lam * snap)
        picks = rng.integers(0, n, size=v.m_svrg)
        w = run_svrg_cycle(X, y, snap_coef, picks, w, drift, alpha, lam)
        model.counter.component_grads += 2 * v.m_svrg
        if not np.all(np.isfinite(w)):
            return _fail(trace, k, f"SVRG diverged (alpha={alpha})")
        f = model.value_uncounted(w)
        if not math.isfinite(f):
            return _fail(trace, k, "non-finite objective")
        rec.row(k, w, f, alpha, v.m_svrg)
        if rec.should_stop(cfg):
            return trace
    trace.status = "max_outer"
    return trace


_RUNNERS = {
    SsnCg: run_ssn_cg,
    NewtonSketch: run_newton_sketch,
    SsnSgi: run_ssn_sgi,
    Svrg: run_svrg,
}


def run_method(model, w0, cfg: MethodConfig, f_star=None, test_data=None, keep_iterates=False) -> RunTrace:
    return _RUNNERS[type(cfg.variant)](model, w0, cfg, f_star, test_data, keep_iterates)


def reference_newton_path(model: LogisticModel, w0=None, tol: float = 1e-12, max_iter: int = 200):
    """Newton-CG iterates with the full Hessian, CG to ``zeta = 1e-14`` and Armijo.

    Once the predicted decrease drops below the resolution of ``F`` the unit
    step is taken without a line search. Returns the list of iterates (including
    ``w0``); raises ``ConvergenceError`` if ``||grad F|| <= tol`` is not reached
    within ``max_iter`` iterations.
    """
    model = model.fresh()
    cfg = MethodConfig(SsnCg(model.n, 1), c1=1e-4, rho=0.5, max_backtracks=60)
    w = np.zeros(model.d) if w0 is None else np.array(w0, dtype=np.float64, copy=True)
    path = [w.copy()]
    f = model.value(w)
    for _ in range(max_iter):
        margins = model.margins(w)
        g = model.gradient(w, margins)
        if np.linalg.norm(g) <= tol:
            return path
        op = model.hessian_operator(w, None, margins)
        p = cg(op, -g, max(5 * model.d, 50), 1e-14).solution
        if -(g @ p) <= 16 * EPS * max(1.0, abs(f)):
            step, f = 1.0, model.value(w + p)
        else:
            step, _, f = armijo(model, w, p, g, cfg, f)
        w = w + step * p
        path.append(w.copy())
    raise ConvergenceError(f"reference Newton did not reach ||grad|| <= {tol:g} in {max_iter} iterations")


def run_reference_newton(model: LogisticModel, w0=None, tol: float = 1e-12, max_iter: int = 200):
    """High-accuracy minimizer. Returns ``(w_star, f_star)``."""
    w_star = reference_newton_path(model, w0, tol, max_iter)[-1]
    return w_star, model.fresh().value(w_star)
