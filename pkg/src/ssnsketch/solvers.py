"""Inner solvers for the Newton-type systems ``A p = -g``."""

from dataclasses import dataclass, field

import numpy as np

from ssnsketch._kernels import run_sgi
from ssnsketch.problem import LogisticModel
from ssnsketch.rng import stream


class SolverBreakdown(FloatingPointError):
    """Non-finite values inside an inner solver (indefinite operator or divergent step)."""


@dataclass
class CgResult:
    solution: np.ndarray
    iters_used: int
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False


def cg(apply_A, b, max_iters: int, zeta: float, callback=None) -> CgResult:
    """Conjugate gradient from ``p0 = 0`` with the relative residual test.

    Stops at the first iterate with ``||b - A p|| <= zeta ||b||`` (recursive
    residual) or after ``max_iters`` operator applications. ``iters_used``
    equals the number of times ``apply_A`` was called. ``callback(p)`` is
    invoked after every update.
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise SolverBreakdown("right-hand side is not finite")
    x = np.zeros_like(b)
    r = b.copy()
    rr = float(r @ r)
    b_norm = np.sqrt(rr)
    tol = zeta * b_norm
    result = CgResult(x, 0, [b_norm], b_norm <= tol)
    if result.converged:
        return result
    p = r.copy()
    for _ in range(max_iters):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        result.iters_used += 1
        if not np.isfinite(pAp):
            raise SolverBreakdown(f"CG: non-finite curvature at iteration {result.iters_used}")
        if pAp <= 1e-16 * float(p @ p):
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        result.residual_norms.append(np.sqrt(rr_new))
        if callback is not None:
            callback(x)
        if np.sqrt(rr_new) <= tol:
            result.converged = True
            break
        p *= rr_new / rr
        p += r
        rr = rr_new
    result.solution = x
    return result


def sgi(model: LogisticModel, w, g, m_sgi: int, alpha: float, seed: int, margins=None) -> np.ndarray:
    """Stochastic gradient iteration on the sampled quadratic models.

    Starting from ``p = -g``, each of the ``m_sgi`` steps draws one component
    ``i`` uniformly (with replacement) and applies
    ``p <- (I - alpha H_i) p - alpha g``. Charges ``m_sgi`` component
    Hessian-vector products.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    g = np.asarray(g, dtype=np.float64)
    p = -g
    if m_sgi == 0:
        return p
    weights = model.diag_weights(w, margins=margins)
    picks = stream(seed, "sgi").integers(0, model.n, size=m_sgi)
    with np.errstate(over="ignore", invalid="ignore"):
        p = run_sgi(model.X, weights, picks, p.copy(), g, float(alpha), model.lam)
    model.counter.component_hvs += m_sgi
    if not np.all(np.isfinite(p)):
        raise SolverBreakdown(f"SGI diverged (alpha={alpha})")
    return p
