"""Analytic measurement-uncertainty quantification for the Koopman matrix.

Under the measurement model every recorded entry ``X_ij`` is Gaussian about
the observed value with variance ``s_j`` of its state (or feature) ``j``.
Writing the centered fluctuations ``Xc = X - X_obs`` and ``Yc = Y - Y_obs``,
``Xc.T Xc`` is Wishart with ``m`` degrees of freedom, and the pseudo-inverse
moments follow from the first moment of the inverse Wishart. The elementwise
variance of ``Kc = pinv(Xc) Yc`` is then

    S_ij = s_j / (s_i (m - p - 1))     (i != j)
    S_ii = 1 / (m - p - 1)

and the Koopman matrix itself is modelled as ``K_ij ~ N(K_obs_ij, S_ij)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVariance, DegreesOfFreedomError, ShapeError
from .estimators import KoopmanEstimate
from .ingest import NoiseModel


def check_dof(m, p):
    """The moment formulas need ``m > p + 3``."""
    if not m > p + 3:
        raise DegreesOfFreedomError(
            f"need more than p + 3 = {p + 3} snapshots for p = {p} features, got m = {m}"
        )


def pinv_second_moment(sigma2, m, p):
    """E[(pinv(X)_ij)^2] for an m x p Gaussian X whose column i has variance ``sigma2``."""
    check_dof(m, p)
    if not sigma2 > 0:
        raise DegenerateVariance("variance must be positive")
    return 1.0 / (sigma2 * m * (m - p - 1))


@dataclass(frozen=True)
class VarianceMatrix:
    """Elementwise mean and variance of the Koopman matrix."""

    S: np.ndarray = field(repr=False)
    mean: np.ndarray = field(repr=False)
    m: int
    p: int
    provenance: str = "manufacturer"

    def to_json(self):
        return {
            "m": self.m,
            "p": self.p,
            "provenance": self.provenance,
            "mean": self.mean.ravel().tolist(),
            "S": self.S.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        p = int(obj["p"])
        return cls(
            np.asarray(obj["S"], dtype=float).reshape(p, p),
            np.asarray(obj["mean"], dtype=float).reshape(p, p),
            int(obj["m"]),
            p,
            obj.get("provenance", "manufacturer"),
        )


def variance_formula(variances, m):
    """The matrix ``S`` for feature variances ``variances`` and ``m`` snapshots."""
    s = np.asarray(variances, dtype=float)
    p = s.size
    check_dof(m, p)
    if np.any(s <= 0):
        raise DegenerateVariance("all feature variances must be positive")
    S = s[None, :] / (s[:, None] * (m - p - 1))
    np.fill_diagonal(S, 1.0 / (m - p - 1))
    return S


def analytic_variance(est: KoopmanEstimate, lifted_noise: NoiseModel) -> VarianceMatrix:
    """Variance matrix for ``est`` given the noise model already lifted to feature space."""
    if len(lifted_noise) != est.p:
        raise ShapeError(f"noise has {len(lifted_noise)} variances, estimate has p = {est.p}")
    S = variance_formula(lifted_noise.variances, est.m)
    return VarianceMatrix(S, est.K.copy(), est.m, est.p, lifted_noise.provenance)


def element_distribution(vm: VarianceMatrix, i, j):
    """``(mean, variance)`` of the asymptotic normal law of element ``(i, j)``."""
    if not (0 <= i < vm.p and 0 <= j < vm.p):
        raise IndexError(f"element ({i}, {j}) outside a {vm.p} x {vm.p} matrix")
    return float(vm.mean[i, j]), float(vm.S[i, j])
