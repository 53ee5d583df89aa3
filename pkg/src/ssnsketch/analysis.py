"""Spectra of true, subsampled and sketched Hessians; CG and complexity calculators.

The complexity functions are order-of-magnitude calculators: they evaluate the
bracketed expressions of the work bounds with every hidden constant set to 1.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from ssnsketch.linops import sym_eig
from ssnsketch.problem import LogisticModel
from ssnsketch.rng import derive_seed, stream
from ssnsketch.sketch import build_sketched_sqrt, new_sketch
from ssnsketch.solvers import cg

DENSE_D_LIMIT = 2000
# n * d^2 above which the Hessian-variance second moment is sampled
EXACT_VARIANCE_LIMIT = 5 * 10**8


class GuardError(ValueError):
    pass


@dataclass
class SpectrumReport:
    d: int
    true_eigs: np.ndarray
    sub_mean: np.ndarray
    sub_min: np.ndarray
    sub_max: np.ndarray
    sketch_mean: np.ndarray
    sketch_min: np.ndarray
    sketch_max: np.ndarray
    replications: int
    sample_size: int
    sketch_rows: int
    w_used: np.ndarray

    @property
    def sub_band(self) -> np.ndarray:
        return self.sub_max - self.sub_min

    @property
    def sketch_band(self) -> np.ndarray:
        return self.sketch_max - self.sketch_min

    COLUMNS = ("index", "true", "sub_mean", "sub_min", "sub_max", "sketch_mean", "sketch_min", "sketch_max")

    def to_csv(self, path) -> None:
        cols = [self.true_eigs, self.sub_mean, self.sub_min, self.sub_max,
                self.sketch_mean, self.sketch_min, self.sketch_max]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.COLUMNS)
            for i in range(self.d):
                writer.writerow([i] + [repr(float(c[i])) for c in cols])

    @staticmethod
    def read_csv(path) -> dict[str, np.ndarray]:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return {k: np.array([float(r[k]) for r in rows]) for k in SpectrumReport.COLUMNS}


def _aggregate(samples: list[np.ndarray]):
    S = np.vstack(samples)
    return S.mean(axis=0), S.min(axis=0), S.max(axis=0)


def spectrum_report(model: LogisticModel, w, T: int, m: int, reps: int = 10, seed: int = 0) -> SpectrumReport:
    """Eigenvalues of the true Hessian and of ``reps`` subsampled / sketched ones at ``w``.

    Subsamples of size ``T`` are drawn without replacement; sketches are ROS
    with ``m`` rows. Per-index mean, min and max are taken over replications
    after sorting each spectrum ascending.
    """
    if model.d > DENSE_D_LIMIT:
        raise GuardError(f"d={model.d} exceeds the dense limit {DENSE_D_LIMIT}")
    if not 1 <= T <= model.n:
        raise ValueError(f"T={T} must lie in [1, n={model.n}]")
    if reps < 1 or m < 1:
        raise ValueError("reps and m must be >= 1")
    w = np.asarray(w, dtype=np.float64)
    model = model.fresh()
    true_eigs = sym_eig(model.dense_hessian(w))[0]
    rng = stream(seed, "spectrum-subsample")
    margins = model.margins(w)
    sub, sk = [], []
    for j in range(reps):
        subset = None if T == model.n else np.sort(rng.choice(model.n, T, replace=False))
        sub.append(sym_eig(model.dense_hessian(w, subset))[0])
        s = new_sketch(model.n, m, derive_seed(seed, "spectrum-sketch", j))
        sk.append(sym_eig(build_sketched_sqrt(model, w, s, margins=margins).dense())[0])
    return SpectrumReport(model.d, true_eigs, *_aggregate(sub), *_aggregate(sk), reps, T, m, w.copy())


def cg_error_bound(eigs, r: int) -> float:
    """Squared CG contraction factor after ``r`` steps from the eigenvalue-gap bound."""
    eigs = np.asarray(eigs, dtype=np.float64)
    d = eigs.shape[0]
    if not 1 <= r <= d:
        raise ValueError(f"r={r} outside [1, {d}]")
    if eigs[0] <= 0 or np.any(np.diff(eigs) < 0):
        raise ValueError("eigenvalues must be positive and ascending")
    top, low = eigs[d - r], eigs[0]
    return float(((top - low) / (top + low)) ** 2)


@dataclass(frozen=True)
class ProblemConstants:
    mu_hat: float
    L_hat: float
    sigma_hat: float
    exact: bool = True

    def __post_init__(self):
        if not 0 < self.mu_hat <= self.L_hat:
            raise ValueError(f"need 0 < mu_hat <= L_hat, got {self.mu_hat}, {self.L_hat}")
        if self.sigma_hat < 0:
            raise ValueError("sigma_hat must be >= 0")

    @property
    def kappa_hat(self) -> float:
        return self.L_hat / self.mu_hat


def theorem1_sample_size(c: ProblemConstants) -> int:
    """``ceil(64 sigma^2 / mu^2)``; 0 means any sample size works."""
    x = 64.0 * c.sigma_hat**2 / c.mu_hat**2
    return int(math.ceil(x * (1 - 1e-12)))


def theorem1_cg_iters(eigs_sub, kappa: float) -> int:
    """Smallest ``r`` in ``[1, d]`` whose eigenvalue-gap ratio is ``<= 1/(8 kappa^1.5)``."""
    eigs = np.asarray(eigs_sub, dtype=np.float64)
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    d = eigs.shape[0]
    threshold = 1.0 / (8.0 * kappa**1.5)
    low = eigs[0]
    for r in range(1, d + 1):
        top = eigs[d - r]
        if (top - low) / (top + low) <= threshold:
            return r
    return d


def _log_inv(eps: float) -> float:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return math.log(1.0 / eps)


def work_ssn_cg(n: int, r_bar: int, c: ProblemConstants, d: int, eps: float) -> float:
    """``(n + r_bar sigma^2/mu^2) d log(1/eps)``, unit constants."""
    return (n + r_bar * c.sigma_hat**2 / c.mu_hat**2) * d * _log_inv(eps)


def work_newton_sketch(n: int, kappa: float, d: int, eps: float) -> float:
    """``(n + kappa^4 d^2) d log(1/eps)``, unit constants."""
    return (n + kappa**4 * d**2) * d * _log_inv(eps)


def sketch_dimension(kappa: float, n: int, d: int) -> float:
    """Sketch rows needed for linear convergence, ``kappa^2 min(n, d)``, unit constants."""
    return kappa**2 * min(n, d)


def estimate_constants(model: LogisticModel, w, probe_count: int = 100, seed: int = 0,
                       allow_sampling: bool = False) -> ProblemConstants:
    """Estimate mu, L and sigma of the curvature assumptions at ``w``.

    ``mu_hat`` is the smallest eigenvalue of the full Hessian. ``L_hat`` is the
    largest eigenvalue over ``probe_count`` randomly chosen component Hessians
    ``d_i x_i x_i^T + lam I`` (at least the full Hessian's largest eigenvalue).
    ``sigma_hat^2`` is the spectral norm of ``(1/n) sum_i (H_i - H)^2``.

    For ``d`` beyond the dense limit, or ``n d^2`` beyond the exact-variance
    limit, quantities are estimated iteratively or over a sampled subset of
    components; that requires ``allow_sampling`` and yields ``exact=False``.
    """
    w = np.asarray(w, dtype=np.float64)
    model = model.fresh()
    n, d, lam = model.n, model.d, model.lam
    rng = stream(seed, "constants")
    weights = model.diag_weights(w)
    sq = model.row_sqnorms()
    probes = np.arange(n) if probe_count >= n else rng.choice(n, probe_count, replace=False)
    L_components = float(np.max(weights[probes] * sq[probes])) + lam

    sampled = n * d * d > EXACT_VARIANCE_LIMIT
    if (d > DENSE_D_LIMIT or sampled) and not allow_sampling:
        raise GuardError(f"n={n}, d={d} exceeds exact limits; pass allow_sampling=True")
    rows = np.arange(n) if not sampled else np.sort(rng.choice(n, min(n, max(probe_count, 10 * d)), replace=False))
    Xr = model.X[rows]
    second_w = weights[rows] ** 2 * sq[rows]

    if d <= DENSE_D_LIMIT:
        H = model.dense_hessian(w)
        eigs = sym_eig(H)[0]
        mu, L_full = float(eigs[0]), float(eigs[-1])
        Hc = H - lam * np.eye(d)
        if sp.issparse(Xr):
            M2 = (Xr.T @ sp.diags(second_w) @ Xr).toarray() / len(rows)
        else:
            M2 = Xr.T @ (second_w[:, None] * Xr) / len(rows)
        V = M2 - Hc @ Hc
        sigma2 = float(np.max(np.abs(sym_eig(0.5 * (V + V.T))[0])))
        # below this the difference is pure cancellation error
        if sigma2 <= 64 * d * np.finfo(float).eps * float(np.max(np.abs(M2), initial=0.0)):
            sigma2 = 0.0
    else:
        hv = model.hessian_operator(w)
        H_op = LinearOperator((d, d), matvec=lambda v: hv(np.ravel(v)), dtype=np.float64)
        L_full = float(eigsh(H_op, k=1, which="LA", return_eigenvectors=False)[0])
        mu = float(eigsh(H_op, k=1, which="SA", return_eigenvectors=False)[0])

        def var_mv(v):
            v = np.ravel(v)
            hc = hv(v) - lam * v
            return Xr.T @ (second_w * (Xr @ v)) / len(rows) - (hv(hc) - lam * hc)

        V_op = LinearOperator((d, d), matvec=var_mv, dtype=np.float64)
        sigma2 = float(abs(eigsh(V_op, k=1, which="LM", return_eigenvectors=False)[0]))
    return ProblemConstants(mu, max(L_components, L_full), math.sqrt(max(sigma2, 0.0)),
                            exact=not sampled and d <= DENSE_D_LIMIT)


def theorem1_run(model: LogisticModel, w0, w_star, T: int, kappa: float, iters: int = 5, seed: int = 0):
    """SSN-CG with unit steps and the spectral CG-iteration rule.

    Each iteration draws a subsample of size ``T``, computes the eigenvalues of
    the subsampled Hessian, runs CG for the smallest number of steps meeting
    the eigenvalue-gap condition for ``kappa``, and takes the full step.
    Returns ``(distances, cg_iters)``: ``||w_k - w_star||`` for k = 0..iters and
    the CG step counts used.
    """
    model = model.fresh()
    rng = stream(seed, "theorem1")
    w = np.array(w0, dtype=np.float64, copy=True)
    w_star = np.asarray(w_star, dtype=np.float64)
    dist = [float(np.linalg.norm(w - w_star))]
    used = []
    for _ in range(iters):
        subset = None if T >= model.n else np.sort(rng.choice(model.n, T, replace=False))
        margins = model.margins(w)
        g = model.gradient(w, margins)
        r = theorem1_cg_iters(sym_eig(model.dense_hessian(w, subset))[0], kappa)
        res = cg(model.hessian_operator(w, subset, margins), -g, r, 1e-15)
        w = w + res.solution
        used.append(res.iters_used)
        dist.append(float(np.linalg.norm(w - w_star)))
    return np.array(dist), used
