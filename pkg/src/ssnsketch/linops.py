"""Linear-algebra kernels shared by the rest of the package.

Dense matrices are float64 ``numpy.ndarray`` objects in C order; sparse ones are
``scipy.sparse.csr_matrix`` in canonical form (sorted, duplicate-free indices).
"""

import numpy as np
import scipy.sparse as sp


class DimensionError(ValueError):
    pass


def is_sparse(A) -> bool:
    return sp.issparse(A)


def as_csr(A) -> sp.csr_matrix:
    """Canonical float64 CSR copy of ``A`` (dense or sparse)."""
    C = sp.csr_matrix(A, dtype=np.float64)
    C.sum_duplicates()
    C.sort_indices()
    return C


def densify(A) -> np.ndarray:
    if sp.issparse(A):
        return np.asarray(A.toarray(), dtype=np.float64)
    return np.asarray(A, dtype=np.float64)


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec: A has {A.shape[1]} columns, x has length {x.shape[0]}")
    return np.asarray(A @ x, dtype=np.float64)


def matvec_t(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if A.shape[0] != x.shape[0]:
        raise DimensionError(f"matvec_t: A has {A.shape[0]} rows, x has length {x.shape[0]}")
    return np.asarray(A.T @ x, dtype=np.float64)


def is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def next_power_of_two(k: int) -> int:
    if k < 1:
        raise ValueError("k must be positive")
    return 1 << (k - 1).bit_length()


def fwht(x) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform along axis 0.

    Returns ``H @ x`` where ``H`` is the Sylvester-ordered Hadamard matrix scaled
    by ``1/sqrt(len)``, so ``H`` is symmetric and orthogonal and the transform is
    its own inverse. A 2-D input is transformed column by column in one pass.
    """
    a = np.array(x, dtype=np.float64, copy=True)
    n = a.shape[0]
    if not is_power_of_two(n):
        raise DimensionError(f"fwht: length {n} is not a power of two")
    tail = a.shape[1:]
    h = 1
    while h < n:
        v = a.reshape((n // (2 * h), 2, h) + tail)
        top = v[:, 0] + v[:, 1]
        bot = v[:, 0] - v[:, 1]
        v[:, 0] = top
        v[:, 1] = bot
        h *= 2
    a *= 1.0 / np.sqrt(n)
    return a


def hadamard(n: int) -> np.ndarray:
    """Dense orthonormal Hadamard matrix of order ``n`` (test-sized ``n`` only)."""
    return fwht(np.eye(n))


def sym_eig(A, rtol: float = 1e-10):
    """Eigen-decomposition of a dense symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as columns. Raises ``ValueError`` for non-square input or input
    whose asymmetry exceeds ``rtol`` relative to its largest entry.
    """
    A = densify(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"sym_eig: matrix must be square, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > rtol * scale:
        raise ValueError("sym_eig: matrix is not symmetric")
    return np.linalg.eigh(0.5 * (A + A.T))
