"""Randomized Hadamard (ROS) sketches of the Hessian square root.

A sketch ``S`` (m x n) is realized as ``sqrt(n_pad) * P H D`` acting on the input
zero-padded to ``n_pad`` rows: ``D`` random signs, ``H`` the orthonormal
Walsh-Hadamard matrix and ``P`` picks ``m`` rows uniformly with replacement.
With this scaling ``E[S^T S / m] = I``.
"""

from dataclasses import dataclass

import numpy as np

from ssnsketch import linops
from ssnsketch.problem import LogisticModel, OracleCounter
from ssnsketch.rng import stream

# rows x columns of float64 scratch per FWHT pass when sketching a matrix
_BLOCK_ENTRIES = 1 << 22


@dataclass(frozen=True, eq=False)
class RosSketch:
    n: int
    n_pad: int
    m: int
    signs: np.ndarray
    row_picks: np.ndarray
    seed: int

    def apply_matrix(self, U) -> np.ndarray:
        """``S @ U`` for an n x k block, one FWHT pass over the padded block."""
        U = np.asarray(U, dtype=np.float64)
        if U.shape[0] != self.n:
            raise linops.DimensionError(f"sketch expects {self.n} rows, got {U.shape[0]}")
        tail = U.shape[1:]
        padded = np.zeros((self.n_pad,) + tail)
        padded[: self.n] = U
        padded *= self.signs.reshape((-1,) + (1,) * len(tail))
        return np.sqrt(self.n_pad) * linops.fwht(padded)[self.row_picks]

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.n,):
            raise linops.DimensionError(f"sketch expects a vector of length {self.n}, got shape {u.shape}")
        return self.apply_matrix(u)

    def dense(self) -> np.ndarray:
        """Explicit m x n matrix. Test sizes only."""
        return self.apply_matrix(np.eye(self.n))


def new_sketch(n: int, m: int, seed: int) -> RosSketch:
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    n_pad = linops.next_power_of_two(n)
    rng = stream(seed, "ros", n, m)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n_pad)
    row_picks = rng.integers(0, n_pad, size=m)
    return RosSketch(n, n_pad, m, signs, row_picks, seed)


@dataclass(frozen=True, eq=False)
class GaussianSketch:
    """Dense sketch with i.i.d. N(0, 1) entries; same ``E[S^T S / m] = I`` contract."""

    n: int
    m: int
    matrix: np.ndarray
    seed: int

    def apply_matrix(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=np.float64)
        if U.shape[0] != self.n:
            raise linops.DimensionError(f"sketch expects {self.n} rows, got {U.shape[0]}")
        return self.matrix @ U

    def apply(self, u) -> np.ndarray:
        return self.apply_matrix(u)

    def dense(self) -> np.ndarray:
        return self.matrix.copy()


def new_gaussian_sketch(n: int, m: int, seed: int) -> GaussianSketch:
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return GaussianSketch(n, m, stream(seed, "gaussian", n, m).standard_normal((m, n)), seed)


@dataclass(frozen=True, eq=False)
class SketchedSqrt:
    """Sketched square root ``B = S (1/sqrt(n)) D^{1/2} X`` at one iterate.

    The regularizer is kept outside the sketch: the operator is
    ``(1/m) B^T B + lam I``.
    """

    B: np.ndarray
    lam: float
    w_tag: object = None
    counter: OracleCounter | None = None

    @property
    def m(self) -> int:
        return self.B.shape[0]

    def dense(self) -> np.ndarray:
        H = (self.B.T @ self.B) / self.m
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += self.lam
        return H

    def __call__(self, p) -> np.ndarray:
        return sketched_hess_vec(self, p)


def build_sketched_sqrt(model: LogisticModel, w, s, margins=None, w_tag=None) -> SketchedSqrt:
    """Form ``B`` column block by column block with FWHT passes.

    For sparse ``X`` only a block of weighted columns is densified at a time.
    Not charged to the model's counter.
    """
    if s.n != model.n:
        raise linops.DimensionError(f"sketch built for n={s.n}, model has n={model.n}")
    root = model.sqrt_weights(w, margins=margins)
    rows = getattr(s, "n_pad", s.n)
    block = max(1, _BLOCK_ENTRIES // rows)
    B = np.empty((s.m, model.d))
    for j0 in range(0, model.d, block):
        j1 = min(model.d, j0 + block)
        B[:, j0:j1] = s.apply_matrix(root[:, None] * model.column_block(j0, j1))
    return SketchedSqrt(B, model.lam, w_tag, model.counter)


def sketched_hess_vec(b: SketchedSqrt, p) -> np.ndarray:
    """``(1/m) B^T (B p) + lam p``, charged as 2m component products."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (b.B.shape[1],):
        raise linops.DimensionError(f"expected a vector of length {b.B.shape[1]}, got shape {p.shape}")
    if b.counter is not None:
        b.counter.component_hvs += 2 * b.m
    v1 = b.B @ p
    return (b.B.T @ v1) / b.m + b.lam * p
