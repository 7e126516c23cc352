"""Complex linear-algebra foundation: vectorization, commutation matrices,
Hermitian eigenstructure, stable log-determinants, and seeded circular
Gaussian sampling.

All matrices are plain numpy arrays with native complex dtype; vec() uses
column stacking throughout the package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# Guard against accidentally huge commutation matrices (mn x mn dense).
MAX_COMMUTATION_DIM = 4096

HERMITIAN_RTOL = 1e-10


class NotPositiveDefiniteError(ValueError):
    """Raised when a factorization requires a positive definite matrix."""


def vec(a):
    """Column-stacking vectorization of a 2-D array."""
    a = np.asarray(a)
    return a.reshape(-1, order="F")


def unvec(v, rows, cols):
    """Inverse of vec(): reshape a length rows*cols vector column-wise."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def commutation_matrix(m, n):
    """Real permutation K with K @ vec(A) = vec(A.T) for every m x n matrix A.

    Satisfies K @ K.T = I; K is orthogonal since it is a permutation.
    """
    if m < 1 or n < 1:
        raise ValueError("commutation matrix requires m >= 1 and n >= 1")
    if m * n > MAX_COMMUTATION_DIM:
        raise ValueError(
            f"commutation dimension {m * n} exceeds maximum {MAX_COMMUTATION_DIM}"
        )
    # vec(A)[i + j*m] = A[i, j] maps to vec(A.T)[j + i*n].
    src = np.arange(m * n)
    i, j = src % m, src // m
    dst = j + i * n
    k = np.zeros((m * n, m * n))
    k[dst, src] = 1.0
    return k


def require_hermitian(a, rtol=HERMITIAN_RTOL, name="matrix"):
    """Validate Hermitian symmetry and return the exactly symmetrized copy."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.conj().T).max() > rtol * scale:
        raise ValueError(f"{name} is not Hermitian within rtol={rtol}")
    return 0.5 * (a + a.conj().T)


def hermitian_eig(a):
    """Eigendecomposition of a Hermitian matrix with reproducible ordering.

    Returns (eigvals, eigvecs) with eigenvalues sorted descending.  Each
    eigenvector's global phase is fixed (largest-magnitude entry made real
    positive) and near-degenerate columns are ordered lexicographically on
    rounded components, so repeated runs produce identical factors.
    """
    a = require_hermitian(a)
    w, u = np.linalg.eigh(a)
    w, u = w[::-1].copy(), u[:, ::-1].copy()
    # Phase canonicalization.
    for j in range(u.shape[1]):
        col = u[:, j]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        if np.abs(pivot) > 0:
            u[:, j] = col * (np.conj(pivot) / np.abs(pivot))
    # Deterministic order inside (numerically) degenerate eigenvalue groups.
    scale = max(np.abs(w).max(), 1.0)
    keys = np.round(w / scale, 10)
    order = np.arange(len(w))
    for val in np.unique(keys):
        grp = np.nonzero(keys == val)[0]
        if len(grp) > 1:
            cols = [tuple(np.round(np.concatenate([u[:, g].real, u[:, g].imag]), 9))
                    for g in grp]
            order[grp] = grp[np.lexsort(np.array(cols).T[::-1])]
    return w[order], u[:, order]


def logdet_psd(a):
    """log det of a Hermitian positive definite matrix via Cholesky.

    Raises NotPositiveDefiniteError when the smallest pivot is not positive.
    """
    a = require_hermitian(a)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))


def psd_sqrt(a, tol=1e-12):
    """Hermitian PSD square root (eigenvalue clipping at -tol*scale)."""
    w, u = hermitian_eig(a)
    scale = max(abs(w[0]), 1.0) if len(w) else 1.0
    if len(w) and w[-1] < -tol * scale:
        raise NotPositiveDefiniteError("matrix has a significantly negative eigenvalue")
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


@dataclass(frozen=True)
class RngState:
    """Deterministic random stream identified by (seed, stream label).

    Identical (seed, stream) pairs reproduce identical sample sequences.
    Streams are single-owner: parallel work must derive children with
    distinct labels instead of sharing one generator.
    """

    seed: int
    stream: str = "root"

    def child(self, label):
        return RngState(self.seed, f"{self.stream}/{label}")

    def generator(self):
        digest = hashlib.sha256(self.stream.encode()).digest()
        spawn_key = tuple(int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=spawn_key)
        return np.random.Generator(np.random.PCG64(seq))


def sample_complex_gaussian(rng, mean, covariance, size=None):
    """Circularly-symmetric complex Gaussian samples around ``mean``.

    ``covariance`` is over vec(mean); samples keep the mean's shape.  A
    Cholesky factor is used, with 1e-12 diagonal loading retried when the
    covariance is numerically rank deficient.  size=None returns one sample,
    otherwise an array of ``size`` stacked samples along axis 0.
    """
    mean = np.asarray(mean, dtype=complex)
    cov = require_hermitian(covariance, name="covariance")
    n = mean.size
    if cov.shape != (n, n):
        raise ValueError(f"covariance shape {cov.shape} does not match mean size {n}")
    gen = rng.generator() if isinstance(rng, RngState) else rng

    count = 1 if size is None else int(size)
    if not np.any(cov):
        out = np.broadcast_to(mean, (count,) + mean.shape).copy()
        return out[0] if size is None else out

    scale = np.abs(np.diag(cov)).max()
    if np.min(np.linalg.eigvalsh(cov)) < -1e-8 * max(scale, 1.0):
        raise NotPositiveDefiniteError("covariance is not positive semidefinite")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        factor = np.linalg.cholesky(cov + 1e-12 * max(scale, 1.0) * np.eye(n))

    # x = mean + F u with u ~ CN(0, I) gives E[(x-m)(x-m)^H] = F F^H.
    white = gen.standard_normal((count, n)) + 1j * gen.standard_normal((count, n))
    white *= np.sqrt(0.5)
    flat = vec(mean) + white @ factor.T
    if mean.ndim > 1:
        out = np.stack([unvec(row, *mean.shape) for row in flat])
    else:
        out = flat
    return out[0] if size is None else out
