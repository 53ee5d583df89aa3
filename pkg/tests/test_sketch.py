import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import random_dataset
from ssnsketch.data import Dataset
from ssnsketch.linops import DimensionError, sym_eig
from ssnsketch.problem import LogisticModel
from ssnsketch.sketch import (
    SketchedSqrt,
    build_sketched_sqrt,
    new_gaussian_sketch,
    new_sketch,
    sketched_hess_vec,
)


def isotropy_gap(n, m, reps, make=new_sketch, offset=0):
    acc = np.zeros((n, n))
    for s in range(reps):
        S = make(n, m, offset + s).dense()
        acc += S.T @ S / m
    return np.linalg.norm(acc / reps - np.eye(n), 2)


def test_new_sketch_fields():
    s = new_sketch(5, 3, seed=1)
    assert (s.n, s.n_pad, s.m) == (5, 8, 3)
    assert set(np.unique(s.signs)) <= {-1.0, 1.0}
    assert s.row_picks.min() >= 0 and s.row_picks.max() < 8
    with pytest.raises(ValueError):
        new_sketch(4, 0, 0)


def test_scalar_sketch():
    s = new_sketch(1, 1, seed=3)
    S = s.dense()
    assert S.shape == (1, 1)
    assert abs(S[0, 0]) == pytest.approx(1.0)


def test_rows_have_norm_sqrt_npad():
    s = new_sketch(16, 6, seed=2)
    assert_allclose(np.abs(s.dense()), 1.0, atol=1e-14)
    s = new_sketch(12, 5, seed=2)
    # padded rows are dropped, so the restriction has entries of magnitude one
    assert_allclose(np.abs(s.apply_matrix(np.eye(12))), 1.0, atol=1e-14)


def test_apply_matches_dense_and_is_linear():
    s = new_sketch(8, 4, seed=5)
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(8), rng.standard_normal(8)
    assert_allclose(s.apply(u), s.dense() @ u, atol=1e-12)
    assert_allclose(s.apply(np.zeros(8)), 0.0)
    assert_allclose(s.apply(2 * u - 3 * v), 2 * s.apply(u) - 3 * s.apply(v), atol=1e-12)
    with pytest.raises(DimensionError):
        s.apply(np.ones(7))


def test_sketch_deterministic():
    a, b = new_sketch(20, 7, 9), new_sketch(20, 7, 9)
    u = np.arange(20.0)
    assert np.array_equal(a.apply(u), b.apply(u))


def test_isotropy_monte_carlo():
    # frozen from measurement: gap about 0.21 at 200 reps for n=32, m=16
    assert isotropy_gap(32, 16, 200) < 0.35
    assert isotropy_gap(32, 16, 200, make=new_gaussian_sketch) < 0.35


def test_build_identity_data():
    n = 8
    ds = Dataset(np.eye(n), np.ones(n, dtype=np.int8), "eye")
    m = LogisticModel(ds, lam=1e-300)
    s = new_sketch(n, 5, seed=4)
    b = build_sketched_sqrt(m, np.zeros(n), s)
    assert_allclose(b.B, s.dense() / (2 * np.sqrt(n)), atol=1e-14)


def test_build_single_column():
    ds = random_dataset(20, 1, seed=3)
    m = LogisticModel(ds)
    w = np.array([0.4])
    s = new_sketch(20, 6, seed=1)
    col = m.sqrt_weights(w) * ds.features[:, 0]
    assert_allclose(build_sketched_sqrt(m, w, s).B[:, 0], s.apply(col), atol=1e-13)


def test_build_sparse_matches_dense():
    sparse = random_dataset(30, 5, seed=8, sparse=True)
    dense = Dataset(sparse.dense_features(), sparse.labels, "d")
    w = np.random.default_rng(1).standard_normal(5)
    s = new_sketch(30, 9, seed=2)
    Bs = build_sketched_sqrt(LogisticModel(sparse), w, s).B
    Bd = build_sketched_sqrt(LogisticModel(dense), w, s).B
    assert_allclose(Bs, Bd, atol=1e-13)


def test_build_dimension_check():
    m = LogisticModel(random_dataset(10, 2))
    with pytest.raises(DimensionError):
        build_sketched_sqrt(m, np.zeros(2), new_sketch(11, 3, 0))


def test_sketched_hess_vec_explicit_gram():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((16, 4))
    b = SketchedSqrt(B, 0.3)
    p, q = rng.standard_normal(4), rng.standard_normal(4)
    assert_allclose(sketched_hess_vec(b, p), (B.T @ B / 16 + 0.3 * np.eye(4)) @ p, atol=1e-13)
    assert_allclose(sketched_hess_vec(b, np.zeros(4)), 0.0)
    assert q @ b(p) == pytest.approx(p @ b(q), rel=1e-12)
    with pytest.raises(DimensionError):
        b(np.ones(5))


def test_sketched_hess_vec_charges_2m():
    m = LogisticModel(random_dataset(12, 3))
    b = build_sketched_sqrt(m, np.zeros(3), new_sketch(12, 5, 0))
    assert m.counter.units == 0
    b(np.ones(3))
    b(np.ones(3))
    assert m.counter.component_hvs == 20


def test_sketched_hessian_unbiased():
    m = LogisticModel(random_dataset(64, 8, seed=2))
    w = 0.3 * np.random.default_rng(5).standard_normal(8)
    H = m.dense_hessian(w)

    def mean_gap(reps, offset):
        acc = sum(build_sketched_sqrt(m, w, new_sketch(64, 16, offset + r)).dense() for r in range(reps))
        return np.linalg.norm(acc / reps - H, 2) / np.linalg.norm(H, 2)

    small, large = mean_gap(25, 0), mean_gap(400, 1000)
    # frozen from measurement: about 0.14 and 0.04 (ratio close to 4)
    assert large < 0.06
    assert large < small / 2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_sketched_operator_min_eig_at_least_lambda(seed, m_rows):
    m = LogisticModel(random_dataset(20, 4, seed=seed % 97), lam=0.01)
    w = np.random.default_rng(seed).standard_normal(4)
    b = build_sketched_sqrt(m, w, new_sketch(20, m_rows, seed))
    eigs = sym_eig(b.dense())[0]
    assert eigs[0] >= 0.01 - 1e-10
