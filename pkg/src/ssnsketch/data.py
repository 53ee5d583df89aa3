"""Datasets: libsvm text I/O, synthetic ill-conditioned problems, train/test splits."""

from dataclasses import dataclass
from pathlib import Path
import math

import numpy as np
import scipy.sparse as sp

from ssnsketch import linops
from ssnsketch.rng import stream

SPARSE_DENSITY_THRESHOLD = 0.25
LABEL_FLIP_FRACTION = 0.05
# keeps lam = 1/n from masking the small singular directions at desk-scale n
FEATURE_SCALE = 10.0


class LibsvmFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (dense ndarray or CSR) with labels in {-1, +1}."""

    features: object
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = self.features
        if sp.issparse(X):
            X = linops.as_csr(X)
        else:
            X = np.ascontiguousarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ValueError("features must be 2-D")
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        values = X.data if sp.issparse(X) else X
        if not np.all(np.isfinite(values)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int8))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.features)

    def rows(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], self.name)

    def dense_features(self) -> np.ndarray:
        return linops.densify(self.features)

    def same_as(self, other: "Dataset") -> bool:
        """Value equality of features and labels, ignoring storage format and name."""
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.dense_features(), other.dense_features())
        )


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: Dataset
    test: Dataset
    seed: int

    def __post_init__(self):
        if self.train.d != self.test.d:
            raise ValueError("train and test feature counts differ")


def _map_labels(raw: list[float], path) -> np.ndarray:
    values = set(raw)
    if values <= {-1.0, 1.0}:
        mapping = {-1.0: -1, 1.0: 1}
    elif values <= {0.0, 1.0}:
        mapping = {0.0: -1, 1.0: 1}
    elif values <= {1.0, 2.0}:
        mapping = {2.0: -1, 1.0: 1}
    else:
        shown = sorted(values)[:5]
        raise LibsvmFormatError(f"{path}: cannot map label set {shown} to -1/+1")
    return np.array([mapping[v] for v in raw], dtype=np.int8)


def read_libsvm(path, n_features: int | None = None, name: str | None = None) -> Dataset:
    """Parse a libsvm/svmlight text file.

    Lines look like ``<label> <idx>:<val> ...`` with 1-based ascending indices;
    blank lines and ``#`` comments are skipped. The feature count is the largest
    index seen unless ``n_features`` is given. Labels from {0,1} or {1,2} are
    mapped to {-1,+1} (0 and 2 become -1). The result is stored as CSR when the
    density is below 25%, dense otherwise.
    """
    path = Path(path)
    raw_labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                raw_labels.append(float(parts[0]))
            except ValueError:
                raise LibsvmFormatError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            prev = 0
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    j = -1
                if not sep or j < 1:
                    raise LibsvmFormatError(f"{path}:{lineno}: bad feature token {tok!r}")
                if j <= prev:
                    raise LibsvmFormatError(f"{path}:{lineno}: indices not strictly ascending at {tok!r}")
                if not math.isfinite(v):
                    raise LibsvmFormatError(f"{path}:{lineno}: non-finite value in {tok!r}")
                prev = j
                indices.append(j - 1)
                values.append(v)
            indptr.append(len(indices))

    labels = _map_labels(raw_labels, path)
    d_seen = (max(indices) + 1) if indices else 0
    d = d_seen if n_features is None else n_features
    if d < d_seen:
        raise LibsvmFormatError(f"{path}: index {d_seen} exceeds n_features={n_features}")
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), d),
    )
    X.eliminate_zeros()
    density = X.nnz / max(1, X.shape[0] * X.shape[1])
    features = X if density < SPARSE_DENSITY_THRESHOLD else X.toarray()
    return Dataset(features, labels, name if name is not None else path.stem)


def write_libsvm(ds: Dataset, path) -> None:
    """Write ``ds`` in libsvm format: %.17g values, 1-based indices, LF endings."""
    X = linops.as_csr(ds.features)
    with open(path, "w", newline="\n") as fh:
        for i in range(ds.n):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            toks = [f"{int(ds.labels[i]):+d}"]
            toks.extend(
                f"{j + 1}:{v:.17g}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]) if v != 0.0
            )
            fh.write(" ".join(toks) + "\n")


def synth_gen(n: int, d: int, kappa_target: float, seed: int, name: str | None = None) -> Dataset:
    """Random binary-classification data with a prescribed spread of curvature.

    ``X = G diag(s) Q^T`` where ``G`` is ``sqrt(n)`` times the orthonormalized
    columns of a standard normal n x d matrix, ``Q`` a random orthogonal matrix
    and ``s`` log-spaced over ``[1/sqrt(kappa_target), 1]`` times a common scale
    of 10, so ``X^T X / n = Q diag(s^2) Q^T`` exactly. Labels are the signs of
    a random hyperplane, then 5% of them are flipped. Identical arguments give
    bitwise-identical data.
    """
    if d < 2 or n < d:
        raise ValueError(f"need n >= d >= 2, got n={n}, d={d}")
    if not kappa_target >= 1:
        raise ValueError("kappa_target must be >= 1")
    rng = stream(seed, "synth", n, d, repr(float(kappa_target)))
    U, R = np.linalg.qr(rng.standard_normal((n, d)))
    G = np.sqrt(n) * U * np.sign(np.diag(R))
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q *= np.sign(np.diag(R))
    scales = FEATURE_SCALE * np.logspace(-0.5 * np.log10(kappa_target), 0.0, d)
    X = (G * scales) @ Q.T
    w_bar = rng.standard_normal(d)
    w_bar /= np.linalg.norm(w_bar)
    y = np.where(X @ w_bar >= 0.0, 1, -1).astype(np.int8)
    n_flip = int(round(LABEL_FLIP_FRACTION * n))
    flip = rng.choice(n, size=n_flip, replace=False)
    y[flip] = -y[flip]
    if name is None:
        name = f"synth-n{n}-d{d}-k{kappa_target:g}"
    return Dataset(X, y, name)



def split(ds: Dataset, test_frac: float, seed: int) -> SplitDataset:
    """Uniformly random train/test partition with ``ceil(n(1-test_frac))`` training rows."""
    n = ds.n
    n_train = math.ceil(n * (1.0 - test_frac) - 1e-9)
    if not 0.0 < test_frac < 1.0 or not 1 <= n - n_train <= n - 1:
        raise ValueError(f"test_frac={test_frac} leaves an empty side for n={n}")
    perm = stream(seed, "split").permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return SplitDataset(ds.rows(train_idx), ds.rows(test_idx), seed)
