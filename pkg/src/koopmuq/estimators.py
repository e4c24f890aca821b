"""DMD and EDMD estimates of the Koopman matrix.

Snapshots are stored as rows, so the estimate ``K`` solves ``X K ~ Y`` in the
least-squares sense and acts on row vectors: ``x_{t+1} ~ x_t K``. For a linear
system ``x_{t+1} = A x_t`` (column convention) this gives ``K = A.T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, ShapeError
from .ingest import NoiseModel, SnapshotPair
from .numkernel import as_matrix, pinv

DICTIONARY_KINDS = ("identity", "quadratic")


@dataclass(frozen=True)
class Dictionary:
    """Observable dictionary: ``identity`` (x) or ``quadratic`` (x, x**2)."""

    kind: str
    input_dim: int

    def __post_init__(self):
        if self.kind not in DICTIONARY_KINDS:
            raise InvalidParameter(f"unknown dictionary {self.kind!r}")
        if self.input_dim < 1:
            raise InvalidParameter("input_dim must be positive")

    @property
    def feature_dim(self):
        return self.input_dim if self.kind == "identity" else 2 * self.input_dim

    def feature_names(self, state_names=None):
        names = list(state_names or [f"x{k + 1}" for k in range(self.input_dim)])
        if self.kind == "identity":
            return names
        return names + [f"{s}^2" for s in names]


@dataclass(frozen=True)
class KoopmanEstimate:
    K: np.ndarray = field(repr=False)
    method: str
    p: int
    m: int

    def to_json(self):
        return {
            "method": self.method,
            "p": self.p,
            "m": self.m,
            "K": self.K.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        p = int(obj["p"])
        K = np.asarray(obj["K"], dtype=float).reshape(p, p)
        return cls(K, obj["method"], p, int(obj["m"]))


def lift(dictionary: Dictionary, M) -> np.ndarray:
    M = as_matrix(M)
    if M.shape[1] != dictionary.input_dim:
        raise ShapeError(f"expected {dictionary.input_dim} columns, got {M.shape[1]}")
    if dictionary.kind == "identity":
        return M
    return np.hstack([M, M * M])


def lift_noise(dictionary: Dictionary, noise: NoiseModel) -> NoiseModel:
    """Noise variances in feature space.

    A centered Gaussian with variance s has a squared counterpart whose second
    moment is 3 s**2, so the quadratic features carry variance 3 s**2.
    """
    noise.check_length(dictionary.input_dim)
    if dictionary.kind == "identity":
        return noise
    v = noise.variances
    return NoiseModel(np.concatenate([v, 3.0 * v**2]), noise.provenance)


def dmd_estimate(snap: SnapshotPair, tol=1e-12) -> KoopmanEstimate:
    K = pinv(snap.X, tol) @ snap.Y
    return KoopmanEstimate(K, "DMD", snap.n, snap.m)


def edmd_estimate(snap: SnapshotPair, dictionary: Dictionary, tol=1e-12) -> KoopmanEstimate:
    if dictionary.kind == "identity":
        # same arithmetic as DMD so the two agree bit for bit
        est = dmd_estimate(snap, tol)
        return KoopmanEstimate(est.K, "EDMD", est.p, est.m)
    G = lift(dictionary, snap.X)
    A = lift(dictionary, snap.Y)
    K = pinv(G, tol) @ A
    return KoopmanEstimate(K, "EDMD", dictionary.feature_dim, snap.m)


def estimate(snap: SnapshotPair, method="DMD", dictionary="identity", tol=1e-12) -> KoopmanEstimate:
    """Dispatch on ``method`` ("DMD" or "EDMD") and dictionary kind."""
    method = method.upper()
    if method == "DMD":
        return dmd_estimate(snap, tol)
    if method == "EDMD":
        if isinstance(dictionary, str):
            dictionary = Dictionary(dictionary, snap.n)
        return edmd_estimate(snap, dictionary, tol)
    raise InvalidParameter(f"unknown method {method!r}")


def residual_norm(snap: SnapshotPair, est: KoopmanEstimate, dictionary: Dictionary | None = None):
    """Frobenius norm of ``lift(X) K - lift(Y)``."""
    if dictionary is None or est.method == "DMD":
        G, A = snap.X, snap.Y
    else:
        G, A = lift(dictionary, snap.X), lift(dictionary, snap.Y)
    return float(np.linalg.norm(G @ est.K - A))
