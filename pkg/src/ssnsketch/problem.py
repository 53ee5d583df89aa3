"""l2-regularized logistic regression as a finite sum, with counted oracles.

Each component is ``F_i(w) = log(1 + exp(-y_i <x_i, w>)) + (lam/2)||w||^2``
and ``F`` is their average. Work is charged to an ``OracleCounter`` in component
units: one component function value, gradient or Hessian-vector product costs
one unit, and ``n`` units make one effective gradient evaluation.
"""

from dataclasses import dataclass
import copy

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ssnsketch import linops
from ssnsketch.data import Dataset

WEIGHT_FLOOR = 1e-300


@dataclass
class OracleCounter:
    component_fn_evals: int = 0
    component_grads: int = 0
    component_hvs: int = 0

    @property
    def units(self) -> int:
        return self.component_fn_evals + self.component_grads + self.component_hvs

    def ege(self, n: int) -> float:
        return self.units / n


def log1pexp_neg(z):
    """``log(1 + exp(-z))`` without overflow."""
    z = np.asarray(z, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(0.0, -z)


def logistic_loss(ds: Dataset, w) -> float:
    """Mean unregularized logistic loss of ``w`` on ``ds`` (used for test loss)."""
    z = ds.labels * linops.matvec(ds.features, w)
    return float(np.mean(log1pexp_neg(z)))


class LogisticModel:
    """Regularized logistic-regression objective over a training ``Dataset``.

    ``lam`` defaults to ``1/n``. All oracles accept ``subset`` as an index array
    (``None`` means all rows) and charge their work to ``self.counter``.
    """

    def __init__(self, data: Dataset, lam: float | None = None):
        if data.n == 0:
            raise ValueError("empty dataset")
        if lam is None:
            lam = 1.0 / data.n
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.data = data
        self.lam = float(lam)
        self.X = data.features
        self.y = data.labels.astype(np.float64)
        self.counter = OracleCounter()
        self._csc = None
        self._row_sqnorms = None

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def d(self) -> int:
        return self.data.d

    def fresh(self) -> "LogisticModel":
        """Shallow copy sharing the data but owning a new zeroed counter."""
        other = copy.copy(self)
        other.counter = OracleCounter()
        return other

    def _check_w(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            raise linops.DimensionError(f"expected a vector of length {self.d}, got shape {w.shape}")
        return w

    def _subset(self, subset) -> np.ndarray | None:
        if subset is None:
            return None
        subset = np.asarray(subset, dtype=np.int64)
        if subset.size == 0:
            raise ValueError("subset is empty")
        if subset.min() < 0 or subset.max() >= self.n:
            raise IndexError("subset index out of range")
        return subset

    def margins(self, w) -> np.ndarray:
        """``X w`` for all rows. Uncounted: callers charge it with the oracle that uses it."""
        return linops.matvec(self.X, self._check_w(w))

    def value(self, w, margins=None) -> float:
        w = self._check_w(w)
        t = self.margins(w) if margins is None else margins
        self.counter.component_fn_evals += self.n
        # divergent iterates give inf here; callers check finiteness
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.mean(log1pexp_neg(self.y * t)) + 0.5 * self.lam * (w @ w))

    def gradient(self, w, margins=None) -> np.ndarray:
        w = self._check_w(w)
        t = self.margins(w) if margins is None else margins
        coef = -expit(-self.y * t) * self.y
        self.counter.component_grads += self.n
        return linops.matvec_t(self.X, coef) / self.n + self.lam * w

    def value_uncounted(self, w) -> float:
        saved = self.counter.component_fn_evals
        f = self.value(w)
        self.counter.component_fn_evals = saved
        return f

    def diag_weights(self, w, subset=None, margins=None) -> np.ndarray:
        """Logistic curvature ``s(t)(1 - s(t))`` at ``t = <w, x_i>``, values in (0, 1/4]."""
        w = self._check_w(w)
        subset = self._subset(subset)
        if margins is None:
            rows = self.X if subset is None else self.X[subset]
            t = linops.matvec(rows, w)
        else:
            t = margins if subset is None else margins[subset]
        return np.maximum(expit(t) * expit(-t), WEIGHT_FLOOR)

    def hessian_operator(self, w, subset=None, margins=None):
        """Subsampled Hessian ``(1/|S|) sum_{i in S} d_i x_i x_i^T + lam I`` as a callable.

        Weights and the row block are prepared once; every application charges
        ``|S|`` component Hessian-vector products.
        """
        subset = self._subset(subset)
        weights = self.diag_weights(w, subset, margins)
        rows = self.X if subset is None else self.X[subset]
        size = rows.shape[0]
        lam = self.lam
        counter = self.counter
        d = self.d

        def apply(v):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (d,):
                raise linops.DimensionError(f"expected a vector of length {d}, got shape {v.shape}")
            counter.component_hvs += size
            return (rows.T @ (weights * (rows @ v))) / size + lam * v

        return apply

    def hess_vec(self, w, v, subset=None) -> np.ndarray:
        return self.hessian_operator(w, subset)(v)

    def sqrt_weights(self, w, margins=None) -> np.ndarray:
        """Row scaling ``sqrt(d_i / n)`` of the Hessian square root ``(1/sqrt(n)) D^{1/2} X``."""
        return np.sqrt(self.diag_weights(w, margins=margins) / self.n)

    def sqrt_hess_apply(self, w, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        return self.sqrt_weights(w) * linops.matvec(self.X, u)

    def sqrt_hess_apply_t(self, w, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.n,):
            raise linops.DimensionError(f"expected a vector of length {self.n}, got shape {z.shape}")
        return linops.matvec_t(self.X, self.sqrt_weights(w) * z)

    def dense_hessian(self, w, subset=None) -> np.ndarray:
        """Dense (sub)sampled Hessian. Uncounted; for analysis at small ``d``."""
        subset = self._subset(subset)
        weights = self.diag_weights(w, subset)
        rows = self.X if subset is None else self.X[subset]
        if sp.issparse(rows):
            G = (rows.T @ sp.diags(weights) @ rows).toarray()
        else:
            G = rows.T @ (weights[:, None] * rows)
        H = G / rows.shape[0]
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += self.lam
        return H

    def column_block(self, j0: int, j1: int) -> np.ndarray:
        """Dense copy of columns ``j0:j1`` of X."""
        if sp.issparse(self.X):
            if self._csc is None:
                self._csc = self.X.tocsc()
            return self._csc[:, j0:j1].toarray()
        return np.asarray(self.X[:, j0:j1])

    def row_sqnorms(self) -> np.ndarray:
        if self._row_sqnorms is None:
            if sp.issparse(self.X):
                self._row_sqnorms = np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()
            else:
                self._row_sqnorms = np.einsum("ij,ij->i", self.X, self.X)
        return self._row_sqnorms
