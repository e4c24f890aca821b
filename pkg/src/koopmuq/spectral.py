"""Spectral uncertainty: Marchenko-Pastur eigenvalue law, eigenvalue moments,
and Haar-distributed eigenvector ensembles.

The eigenvalues ``s_k`` of ``K K^T / p`` are modelled with the
Marchenko-Pastur density and the Koopman eigenvalue magnitudes are their
positive square roots. Only real magnitudes are modelled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import InvalidParameter, ShapeError
from .numkernel import RngHandle, as_matrix, eig_sym, qr_sign_normalized

GRID_POINTS = 4096


@dataclass(frozen=True)
class MPParams:
    """Marchenko-Pastur law with aspect ratio ``ratio`` and entry variance ``sigma2``."""

    ratio: float
    sigma2: float

    def __post_init__(self):
        if not (0.0 < self.ratio <= 1.0):
            raise InvalidParameter(f"ratio must lie in (0, 1], got {self.ratio}")
        if not self.sigma2 > 0:
            raise InvalidParameter(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def lower(self):
        return self.sigma2 * (1.0 - np.sqrt(self.ratio)) ** 2

    @property
    def upper(self):
        return self.sigma2 * (1.0 + np.sqrt(self.ratio)) ** 2

    def to_json(self):
        return {
            "ratio": self.ratio,
            "sigma2": self.sigma2,
            "lambda_minus": self.lower,
            "lambda_plus": self.upper,
        }


def mp_density(x, params: MPParams):
    """Marchenko-Pastur density; zero outside ``[lower, upper]``.

    Normalized to unit mass, so for ``ratio < 1`` the usual ``2 pi sigma2 x``
    denominator carries an extra factor ``ratio``.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = params.lower, params.upper
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * np.pi * params.sigma2 * params.ratio * xi)
    return out if out.ndim else float(out)


# Substituting x = c - h cos(theta) on [0, pi] turns the density into a smooth
# integrand: f(x) dx = h^2 sin^2(theta) / (2 pi sigma2 ratio x) dtheta.


def _theta_weight(theta, params: MPParams):
    c = params.sigma2 * (1.0 + params.ratio)
    h = 2.0 * params.sigma2 * np.sqrt(params.ratio)
    cos = np.cos(theta)
    x = c - h * cos
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio_term = (1.0 - cos * cos) / x
    # ratio == 1 puts x = 0 at theta = 0; the quotient tends to 2 / h there
    ratio_term = np.where(x > 0, ratio_term, 2.0 / h)
    return h * h * ratio_term / (2.0 * np.pi * params.sigma2 * params.ratio)


def _theta_to_x(theta, params: MPParams):
    c = params.sigma2 * (1.0 + params.ratio)
    h = 2.0 * params.sigma2 * np.sqrt(params.ratio)
    return c - h * np.cos(theta)


@lru_cache(maxsize=64)
def _cdf_table(ratio, sigma2):
    params = MPParams(ratio, sigma2)
    theta = np.linspace(0.0, np.pi, GRID_POINTS)
    w = _theta_weight(theta, params)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(theta))])
    cdf /= cdf[-1]
    return theta, cdf


def mp_cdf(x, params: MPParams):
    """CDF interpolated from the tabulated grid used by :func:`mp_sample`."""
    theta, cdf = _cdf_table(params.ratio, params.sigma2)
    x = np.clip(np.asarray(x, dtype=float), params.lower, params.upper)
    c = params.sigma2 * (1.0 + params.ratio)
    h = 2.0 * params.sigma2 * np.sqrt(params.ratio)
    t = np.arccos(np.clip((c - x) / h, -1.0, 1.0))
    return np.interp(t, theta, cdf)


def mp_sample(rng: RngHandle, params: MPParams, count) -> np.ndarray:
    """Inverse-CDF draws on a :data:`GRID_POINTS`-point quadrature grid."""
    theta, cdf = _cdf_table(params.ratio, params.sigma2)
    u = rng.generator().random(count)
    return _theta_to_x(np.interp(u, cdf, theta), params)


def eigenvalue_moments(params: MPParams, order=4) -> np.ndarray:
    """Raw moments ``E[x^k]``, ``k = 1..order``, of the Marchenko-Pastur law."""
    if order < 1:
        raise InvalidParameter("order must be at least 1")
    moments = []
    for k in range(1, order + 1):
        val, _ = integrate.quad(
            lambda t: _theta_to_x(t, params) ** k * _theta_weight(t, params),
            0.0,
            np.pi,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        moments.append(val)
    return np.array(moments)


def empirical_moments(samples, order=4) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    return np.array([np.mean(x**k) for k in range(1, order + 1)])


def koopman_sym_spectrum(K) -> np.ndarray:
    """Descending square roots of the eigenvalues of ``K K^T / p``."""
    K = as_matrix(K)
    p, q = K.shape
    if p != q:
        raise ShapeError(f"K must be square, got {K.shape}")
    s, _ = eig_sym(K @ K.T / p)
    return np.sqrt(np.clip(s, 0.0, None))


def haar_sample(rng: RngHandle, dim, count) -> list:
    """``count`` Haar-distributed orthogonal ``dim x dim`` matrices."""
    if dim < 1:
        raise InvalidParameter("dim must be positive")
    G = rng.generator().standard_normal((count, dim, dim))
    return [qr_sign_normalized(g)[0] for g in G]


@dataclass(frozen=True)
class Decorrelation:
    statistic: float
    degenerate: bool


def tuple_decorrelation_check(Ks, eigvecs) -> Decorrelation:
    """Largest ``|corr(K_ij, V_ij)|`` across an ensemble.

    ``Ks`` and ``eigvecs`` are stacks of shape ``(count, p, p)``; column ``j``
    of each ``eigvecs[k]`` is the ``j``-th eigenvector of ``Ks[k]``. Pairs with
    no spread in either variable are skipped; if all are, the statistic is 0
    and ``degenerate`` is set.
    """
    Ks = np.asarray(Ks, dtype=float)
    V = np.asarray(eigvecs, dtype=float)
    if Ks.shape != V.shape or Ks.ndim != 3:
        raise ShapeError("K and eigenvector stacks must share shape (count, p, p)")
    a = Ks - Ks.mean(axis=0)
    b = V - V.mean(axis=0)
    sa = np.sqrt(np.sum(a * a, axis=0))
    sb = np.sqrt(np.sum(b * b, axis=0))
    scale = np.maximum(np.abs(Ks).max(axis=0), np.abs(V).max(axis=0)) + 1.0
    ok = (sa > 1e-12 * scale * np.sqrt(len(Ks))) & (sb > 1e-12 * scale * np.sqrt(len(Ks)))
    if not np.any(ok):
        return Decorrelation(0.0, True)
    corr = np.sum(a * b, axis=0)[ok] / (sa[ok] * sb[ok])
    return Decorrelation(float(min(1.0, np.max(np.abs(corr)))), False)


@dataclass(frozen=True)
class SpectralUQ:
    mp: MPParams
    moments: np.ndarray = field(repr=False)
    haar_dim: int

    def to_json(self):
        return {
            "mp": self.mp.to_json(),
            "moments": self.moments.tolist(),
            "haar_dim": self.haar_dim,
        }


def mp_params_from_variance(S, m, ratio=None) -> MPParams:
    """Law for the centered fluctuation of a ``p x p`` matrix with variances ``S``.

    The entry variance is the mean of ``S`` and the default ratio ``p / m``
    (clipped to 1).
    """
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    if ratio is None:
        ratio = min(p / m, 1.0)
    return MPParams(float(ratio), float(np.mean(S)))


def spectral_uq(S, m, order=4, ratio=None) -> SpectralUQ:
    params = mp_params_from_variance(S, m, ratio)
    return SpectralUQ(params, eigenvalue_moments(params, order), int(np.asarray(S).shape[0]))


def density_curve(params: MPParams, points=200):
    """``(x, f(x))`` on an even grid over the support, endpoints included."""
    x = np.linspace(params.lower, params.upper, points)
    return x, mp_density(x, params)
