"""Symmetric-matrix primitives shared by the rest of the package.

Symmetric matrices are plain ``numpy`` arrays; every function here that
returns a matrix returns an exactly symmetric one. Positive definite
inputs that need a log-determinant or an inverse are wrapped once in
:class:`SpdMatrix`, which certifies them and caches the eigendecomposition.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimError, InvalidMatrix, SingularCovariance

SPD_TOL = 1e-10


def sym(A):
    """Return the symmetric part of a square array as float64."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimError(f"expected a square matrix, got shape {A.shape}")
    return 0.5 * (A + A.T)


def as_symmetric(A):
    """Validate a square finite array and return its symmetric part."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    return 0.5 * (A + A.T)


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with ``w`` ascending and ``V`` orthonormal so that
    ``A == V @ diag(w) @ V.T``. Each eigenvector is sign-normalised so its
    first non-negligible component is positive, which makes the output
    deterministic.
    """
    A = as_symmetric(A)
    w, V = np.linalg.eigh(A)
    idx = np.argmax(np.abs(V) > 1e-12 * np.abs(V).max(axis=0), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return w, V * signs


def from_eig(w, V):
    """Rebuild ``V diag(w) V^T`` as an exactly symmetric matrix."""
    return sym((V * w) @ V.T)


def split_diag(A):
    """Split ``A`` into its diagonal part and its off-diagonal part."""
    A = sym(A)
    D = np.diag(np.diag(A))
    return D, A - D


def dd(A):
    return np.diag(np.diag(A))


def ofd(A):
    A = np.array(A, dtype=float)
    np.fill_diagonal(A, 0.0)
    return A


def project_psd(A):
    """Frobenius-nearest positive semidefinite matrix (eigenvalue clipping)."""
    w, V = np.linalg.eigh(sym(A))
    return from_eig(np.maximum(w, 0.0), V)


def logdet_psd(A):
    """Log-determinant from log-eigenvalues; ``-inf`` if not positive definite."""
    w = np.linalg.eigvalsh(sym(A))
    if w[0] <= 0:
        return -np.inf
    return float(np.sum(np.log(w)))


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric matrix certified positive definite.

    Build with :meth:`certify`; the constructor does no checking.
    """

    value: np.ndarray
    eigvals: np.ndarray = field(repr=False)
    eigvecs: np.ndarray = field(repr=False)

    @classmethod
    def certify(cls, A, tol=SPD_TOL):
        if isinstance(A, SpdMatrix):
            return A
        S = as_symmetric(A)
        w, V = sym_eig(S)
        if not w[-1] > 0 or w[0] <= tol * w[-1]:
            raise SingularCovariance(
                f"smallest eigenvalue {w[0]:.3e} is not above {tol:g} x largest "
                f"({w[-1]:.3e})")
        S.setflags(write=False)
        return cls(S, w, V)

    @property
    def n(self):
        return self.value.shape[0]

    def logdet(self):
        return float(np.sum(np.log(self.eigvals)))

    def inv(self):
        return from_eig(1.0 / self.eigvals, self.eigvecs)

    def sqrt(self):
        return from_eig(np.sqrt(self.eigvals), self.eigvecs)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.value, dtype=dtype)


def kl_divergence(S, T):
    """Kullback-Leibler divergence between N(0, S) and N(0, T).

    ``0.5 * (-log|S| + log|T| + tr(S T^-1) - n)``.
    """
    S = SpdMatrix.certify(S)
    T = SpdMatrix.certify(T)
    if S.n != T.n:
        raise DimError(f"dimension mismatch: {S.n} vs {T.n}")
    tr = float(np.sum(S.value * T.inv()))
    return 0.5 * (-S.logdet() + T.logdet() + tr - S.n)
