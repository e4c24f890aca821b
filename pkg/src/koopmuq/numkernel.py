"""Deterministic numerical kernels shared by the rest of the package.

All routines take and return plain ``numpy`` arrays. Random draws go through
:class:`RngHandle`, a value type naming a Philox stream by ``(seed, stream)``
so that parallel consumers can derive independent, reproducible children.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrix, InvalidParameter, NotSymmetric, RankDeficient

__all__ = [
    "RngHandle",
    "as_matrix",
    "pinv",
    "qr_sign_normalized",
    "eig_sym",
    "gauss_sample",
]

_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngHandle:
    """Names one reproducible random stream.

    Identical ``(seed, stream)`` pairs always yield identical draw sequences.
    The handle holds no state; :meth:`generator` builds a fresh generator each
    call, so a handle can be passed between threads freely.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _UINT64:
                raise InvalidParameter(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[int(self.seed), int(self.stream)]))

    def child(self, index: int) -> "RngHandle":
        """Derive the handle for sub-stream ``index`` (e.g. one MC replicate)."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream), int(index)])
        return RngHandle(self.seed, int(ss.generate_state(1, np.uint64)[0]))


def as_matrix(M, name="matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array or raise :class:`InvalidMatrix`."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidMatrix(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return A


def pinv(M, tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``tol`` times the largest one are treated as zero.
    """
    A = as_matrix(M)
    if not 0.0 < tol < 1.0:
        raise InvalidParameter(f"tol must lie in (0, 1), got {tol}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = tol * s[0] if s.size else 0.0
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def qr_sign_normalized(G):
    """Thin QR factorization with a strictly positive ``R`` diagonal.

    Fixing the signs makes the factorization unique, which is what makes
    ``Q`` Haar-distributed when ``G`` is a Gaussian matrix.
    """
    A = as_matrix(G)
    rows, cols = A.shape
    if rows < cols:
        raise RankDeficient(f"need rows >= cols, got {A.shape}")
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    scale = np.max(np.abs(d)) if d.size else 0.0
    if scale == 0.0 or np.min(np.abs(d)) <= 1e-14 * scale * max(rows, cols):
        raise RankDeficient("matrix is not of full column rank")
    signs = np.sign(d)
    return Q * signs, R * signs[:, None]


def eig_sym(M, sym_tol: float = 1e-10):
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with eigenvectors in the columns.
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"matrix must be square, got {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0)
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise NotSymmetric("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def gauss_sample(rng: RngHandle, mean=0.0, sd=1.0, count=1) -> np.ndarray:
    """``count`` i.i.d. normal draws from the stream named by ``rng``.

    ``mean`` and ``sd`` broadcast against ``count``, so per-column parameters
    can be passed with ``count=(rows, cols)``.
    """
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0) or not np.all(np.isfinite(sd)):
        raise InvalidParameter("standard deviation must be finite and non-negative")
    z = rng.generator().standard_normal(count)
    return mean + sd * z
