import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal

from ssnsketch.data import (
    Dataset,
    LibsvmFormatError,
    read_libsvm,
    split,
    synth_gen,
    write_libsvm,
)
from ssnsketch.linops import sym_eig
from ssnsketch.methods import run_reference_newton
from ssnsketch.problem import LogisticModel


def write(tmp_path, text, name="data.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_single_line(tmp_path):
    ds = read_libsvm(write(tmp_path, "1 1:0.5 3:2.0\n"))
    assert (ds.n, ds.d) == (1, 3)
    assert_array_equal(ds.dense_features(), [[0.5, 0.0, 2.0]])
    assert_array_equal(ds.labels, [1])


@pytest.mark.parametrize(
    "text,expected",
    [
        ("0 2:1.0\n1 1:1\n", [-1, 1]),
        ("2 1:1\n1 1:1\n", [-1, 1]),
        ("-1 1:1\n+1 1:1\n", [-1, 1]),
        ("1 1:1\n1 2:1\n", [1, 1]),
    ],
)
def test_label_mapping(tmp_path, text, expected):
    assert_array_equal(read_libsvm(write(tmp_path, text)).labels, expected)


def test_unmappable_labels(tmp_path):
    with pytest.raises(ValueError):
        read_libsvm(write(tmp_path, "3 1:1\n5 1:1\n"))


@pytest.mark.parametrize(
    "bad",
    ["1 2:1 1:3\n", "1 0:1\n", "1 a:1\n", "x 1:1\n", "1 1:nan\n", "1 3\n", "1 2:1 2:1\n"],
)
def test_malformed_lines_report_line_number(tmp_path, bad):
    p = write(tmp_path, "1 1:1\n" + bad)
    with pytest.raises(LibsvmFormatError, match=":2:"):
        read_libsvm(p)


def test_comments_and_blank_lines(tmp_path):
    ds = read_libsvm(write(tmp_path, "# header\n\n1 1:1 # trailing\n-1 2:2\n"))
    assert (ds.n, ds.d) == (2, 2)


def test_storage_choice(tmp_path):
    sparse_text = "".join(f"1 {i + 1}:1\n" for i in range(10))
    assert read_libsvm(write(tmp_path, sparse_text)).is_sparse
    dense_text = "1 1:1 2:2\n-1 1:3 2:4\n"
    assert not read_libsvm(write(tmp_path, dense_text, "b.txt")).is_sparse


def test_hand_written_round_trip(tmp_path):
    text = "+1 1:0.25 4:-3\n-1 2:1e-300\n+1 3:7.5 4:1\n-1 1:0.1\n"
    ds = read_libsvm(write(tmp_path, text))
    out = tmp_path / "out.txt"
    write_libsvm(ds, out)
    back = read_libsvm(out)
    assert ds.same_as(back)
    assert b"\r" not in out.read_bytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**32 - 1), st.booleans())
def test_write_read_round_trip(tmp_path_factory, n, d, seed, sparse):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * 10.0 ** rng.integers(-5, 5, size=(n, d))
    X[:, -1] = 1.0  # keep the feature count fixed
    if sparse:
        X[rng.random((n, d)) < 0.7] = 0.0
        X[:, -1] = 1.0
        X = sp.csr_matrix(X)
    y = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    ds = Dataset(X, y, "rt")
    path = tmp_path_factory.mktemp("rt") / "ds.txt"
    write_libsvm(ds, path)
    assert read_libsvm(path).same_as(ds)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), np.array([1, 0]), "bad")
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), np.array([1]), "bad")
    with pytest.raises(ValueError):
        Dataset(np.array([[np.inf, 1.0]]), np.array([1]), "bad")


def test_synth_shape_and_labels():
    ds = synth_gen(9000, 100, 100.0, seed=1)
    assert (ds.n, ds.d) == (9000, 100)
    assert set(np.unique(ds.labels)) == {-1, 1}
    assert np.all(np.isfinite(ds.features))


def test_synth_reproducible():
    a = synth_gen(200, 10, 50.0, seed=7)
    b = synth_gen(200, 10, 50.0, seed=7)
    assert_array_equal(a.features, b.features)
    assert_array_equal(a.labels, b.labels)
    c = synth_gen(200, 10, 50.0, seed=8)
    assert not np.array_equal(a.features, c.features)


def test_synth_kappa_one_is_isotropic_at_zero():
    model = LogisticModel(synth_gen(400, 8, 1.0, seed=0))
    eigs = sym_eig(model.dense_hessian(np.zeros(8)))[0]
    assert eigs[-1] / eigs[0] == pytest.approx(1.0, abs=1e-10)


def test_synth_condition_number_calibration():
    # frozen: measured cond of the Hessian at the optimum is about 6e3
    model = LogisticModel(synth_gen(2000, 50, 1e4, seed=0))
    w_star, _ = run_reference_newton(model)
    eigs = sym_eig(model.dense_hessian(w_star))[0]
    assert 1e3 <= eigs[-1] / eigs[0] <= 1e5


def test_synth_flip_fraction():
    n = 1000
    ds = synth_gen(n, 5, 10.0, seed=3)
    # logistic fit on clean labels separates well; about 5% are flipped by construction
    model = LogisticModel(ds)
    w, _ = run_reference_newton(model)
    wrong = np.mean(np.sign(ds.features @ w) != ds.labels)
    assert 0.02 <= wrong <= 0.1


def test_synth_errors():
    with pytest.raises(ValueError):
        synth_gen(5, 10, 10.0, 0)
    with pytest.raises(ValueError):
        synth_gen(50, 10, 0.5, 0)


def test_split_sizes():
    ds = synth_gen(10, 2, 1.0, 0)
    sd = split(ds, 0.1, seed=0)
    assert (sd.train.n, sd.test.n) == (9, 1)


def test_split_partition_and_determinism():
    n = 1000
    X = np.arange(n, dtype=float)[:, None] * np.ones((1, 2))
    ds = Dataset(X, np.ones(n, dtype=np.int8), "idx")
    a = split(ds, 0.1, seed=5)
    b = split(ds, 0.1, seed=5)
    assert (a.train.n, a.test.n) == (900, 100)
    rows = np.concatenate([a.train.features[:, 0], a.test.features[:, 0]])
    assert_array_equal(np.sort(rows), np.arange(n))
    assert_array_equal(a.train.features, b.train.features)
    assert not np.array_equal(a.train.features, split(ds, 0.1, seed=6).train.features)


@pytest.mark.parametrize("frac", [0.0, 1.0, 0.01])
def test_split_degenerate(frac):
    ds = synth_gen(10, 2, 1.0, 0)
    with pytest.raises(ValueError):
        split(ds, frac, 0)
