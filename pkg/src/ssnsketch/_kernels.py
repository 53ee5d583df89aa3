"""Compiled inner loops for the one-component-per-step methods (SGI and SVRG)."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _sigmoid_neg(z):
    # 1 / (1 + exp(z)) without overflow
    if z >= 0.0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


@numba.njit(cache=True)
def sgi_dense(X, weights, picks, p, g, alpha, lam):
    shrink = 1.0 - alpha * lam
    d = p.shape[0]
    for i in picks:
        dot = 0.0
        for j in range(d):
            dot += X[i, j] * p[j]
        c = alpha * weights[i] * dot
        for j in range(d):
            p[j] = shrink * p[j] - alpha * g[j] - c * X[i, j]
    return p


@numba.njit(cache=True)
def sgi_csr(indptr, indices, data, weights, picks, p, g, alpha, lam):
    shrink = 1.0 - alpha * lam
    d = p.shape[0]
    for i in picks:
        dot = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            dot += data[k] * p[indices[k]]
        c = alpha * weights[i] * dot
        for j in range(d):
            p[j] = shrink * p[j] - alpha * g[j]
        for k in range(indptr[i], indptr[i + 1]):
            p[indices[k]] -= c * data[k]
    return p


@numba.njit(cache=True)
def svrg_cycle_dense(X, y, snap_coef, picks, w, drift, alpha, lam):
    """Inner SVRG steps; ``drift = alpha * (g_bar - lam * snapshot)``."""
    shrink = 1.0 - alpha * lam
    d = w.shape[0]
    for i in picks:
        dot = 0.0
        for j in range(d):
            dot += X[i, j] * w[j]
        c = alpha * (-_sigmoid_neg(y[i] * dot) * y[i] - snap_coef[i])
        for j in range(d):
            w[j] = shrink * w[j] - drift[j] - c * X[i, j]
    return w


@numba.njit(cache=True)
def svrg_cycle_csr(indptr, indices, data, y, snap_coef, picks, w, drift, alpha, lam):
    shrink = 1.0 - alpha * lam
    d = w.shape[0]
    for i in picks:
        dot = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            dot += data[k] * w[indices[k]]
        c = alpha * (-_sigmoid_neg(y[i] * dot) * y[i] - snap_coef[i])
        for j in range(d):
            w[j] = shrink * w[j] - drift[j]
        for k in range(indptr[i], indptr[i + 1]):
            w[indices[k]] -= c * data[k]
    return w


def run_sgi(X, weights, picks, p, g, alpha, lam):
    if hasattr(X, "indptr"):
        return sgi_csr(X.indptr, X.indices, X.data, weights, picks, p, g, alpha, lam)
    return sgi_dense(X, weights, picks, p, g, alpha, lam)


def run_svrg_cycle(X, y, snap_coef, picks, w, drift, alpha, lam):
    if hasattr(X, "indptr"):
        return svrg_cycle_csr(X.indptr, X.indices, X.data, y, snap_coef, picks, w, drift, alpha, lam)
    return svrg_cycle_dense(np.ascontiguousarray(X), y, snap_coef, picks, w, drift, alpha, lam)
